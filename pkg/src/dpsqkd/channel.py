"""Long-distance fiber channel and the slow-drift model.

Polarization drift is an isotropic small-rotation random walk on SU(2);
phase drift is a Gaussian random walk. The same law drives the fiber of
every interferometer arm.
"""

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from . import jones
from .exceptions import InsufficientDataError
from .optics import OpticalArm, TimeBinState

DEFAULT_SIGMA = 0.01


@dataclass(frozen=True, eq=False)
class ChannelState:
    q: np.ndarray = field(default_factory=jones.identity)
    phase: float = 0.0
    sigma_pol: float = DEFAULT_SIGMA
    sigma_phase: float = DEFAULT_SIGMA


def apply_channel(state, ch):
    op = np.exp(1j * ch.phase) * ch.q
    return TimeBinState(state.amps @ op.T)


def random_rotation(rng, sigma):
    """Small random SU(2) element; rotation angle ~ Normal(0, sigma**2)."""
    angle = rng.normal(0.0, sigma)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return jones.su2_rotation(angle, axis)


def _walk_unitary(m, rng, sigma):
    if sigma == 0:
        return m
    return jones.nearest_su2(random_rotation(rng, sigma) @ m)


def _walk_phase(p, rng, sigma):
    if sigma == 0:
        return p
    return p + rng.normal(0.0, sigma)


def drift_step(ch, rng):
    """Advance the channel by one frame of drift."""
    if ch.sigma_pol == 0 and ch.sigma_phase == 0:
        return ch
    q = _walk_unitary(ch.q, rng, ch.sigma_pol)
    return replace(ch, q=q, phase=_walk_phase(ch.phase, rng, ch.sigma_phase))


def drift_arm(arm, rng, sigma_pol, sigma_phase):
    """Same drift law applied to an interferometer arm's fiber and phase."""
    if sigma_pol == 0 and sigma_phase == 0:
        return arm
    return OpticalArm(
        _walk_unitary(arm.forward, rng, sigma_pol),
        _walk_phase(arm.phase, rng, sigma_phase),
        arm.delay,
        arm.mirror,
    )


def polarization_spread(state, tol=1e-30):
    """Largest ``1 - visibility`` between any two populated slots.

    Slot amplitudes are normalized first, so only polarization matters.
    """
    slots = [v / np.sqrt(jones.norm2(v)) for v in state.slots().values()
             if jones.norm2(v) > tol]
    if len(slots) < 2:
        raise InsufficientDataError("need at least two populated slots")
    return max(1.0 - jones.visibility(u, v) for u, v in combinations(slots, 2))
