"""Complex 2x2 Jones calculus.

Jones vectors are length-2 complex arrays and Jones matrices are 2x2 complex
arrays. Backward propagation through a reciprocal element is the transpose of
its forward matrix, so a double pass through fiber ``A`` onto a mirror ``R``
is ``A.T @ R @ A``. With the Faraday mirror ``M = [[0, 1], [-1, 0]]`` this
collapses to ``det(A) * M`` for every 2x2 matrix ``A``.
"""

import numpy as np

from .exceptions import UndefinedInputError

ATOL = 1e-12

_FARADAY = np.array([[0, 1], [-1, 0]], dtype=complex)
_FARADAY.flags.writeable = False
_IDENTITY = np.eye(2, dtype=complex)
_IDENTITY.flags.writeable = False


def jones_vector(e1, e2):
    return np.array([e1, e2], dtype=complex)


def jones_matrix(m11, m12, m21, m22):
    return np.array([[m11, m12], [m21, m22]], dtype=complex)


def identity():
    return _IDENTITY


def faraday_mirror():
    """Round-trip Jones matrix of a 45 degree Faraday rotator plus mirror.

    Maps any polarization onto its orthogonal state: ``M @ M = -I``.
    """
    return _FARADAY


def plain_mirror():
    """Ordinary mirror; preserves polarization in the unfolded frame."""
    return _IDENTITY


def adjoint(m):
    return np.conj(np.swapaxes(m, -1, -2))


def det(m):
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def phase(m, angle):
    """Multiply by the scalar phase ``exp(i*angle)``."""
    return np.exp(1j * angle) * np.asarray(m)


def inner(u, v):
    """Inner product <u|v>, conjugate-linear in ``u``."""
    return np.vdot(u, v)


def norm2(v):
    v = np.asarray(v)
    return float(np.real(np.vdot(v, v)))


def is_unitary(m, atol=ATOL):
    m = np.asarray(m)
    return bool(np.allclose(adjoint(m) @ m, _IDENTITY, rtol=0, atol=atol))


def haar_su2(rng, size=None):
    """Sample Haar-distributed SU(2) matrices.

    Uses a normalized complex Gaussian pair ``(a, b)`` embedded as
    ``[[a, -conj(b)], [b, conj(a)]]``. ``|a|**2`` is then uniform on [0, 1].

    Parameters
    ----------
    rng : numpy.random.Generator
    size : int, optional
        Number of matrices; ``None`` returns a single 2x2 array.
    """
    n = 1 if size is None else size
    z = rng.normal(size=(n, 4))
    a = z[:, 0] + 1j * z[:, 1]
    b = z[:, 2] + 1j * z[:, 3]
    r = np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)
    a, b = a / r, b / r
    out = np.empty((n, 2, 2), dtype=complex)
    out[:, 0, 0] = a
    out[:, 0, 1] = -np.conj(b)
    out[:, 1, 0] = b
    out[:, 1, 1] = np.conj(a)
    return out[0] if size is None else out


def su2_rotation(angle, axis):
    """SU(2) element rotating the Poincare sphere by ``angle`` about ``axis``."""
    nx, ny, nz = axis
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array(
        [[c - 1j * s * nz, -1j * s * nx - s * ny],
         [-1j * s * nx + s * ny, c + 1j * s * nz]],
        dtype=complex,
    )


def nearest_su2(m):
    """Project onto the nearest unitary (polar factor), then fix det to 1."""
    u, _, vh = np.linalg.svd(m)
    w = u @ vh
    return w / np.sqrt(det(w))


def round_trip(forward, mirror):
    """Double-pass operator ``transpose(forward) @ mirror @ forward``."""
    forward = np.asarray(forward)
    return np.swapaxes(forward, -1, -2) @ mirror @ forward


def visibility(e1, e2):
    """Interference contrast ``2|<e1|e2>| / (|e1|^2 + |e2|^2)`` in [0, 1]."""
    total = norm2(e1) + norm2(e2)
    if total == 0.0:
        raise UndefinedInputError("visibility of two zero vectors is undefined")
    return min(1.0, 2.0 * abs(np.vdot(e1, e2)) / total)
