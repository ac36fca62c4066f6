"""Feedback stabilization of the interferometer phase drifts.

An unmodulated reference pulse train follows the signal ``t0`` slots later
through the same interferometers and fiber. Its plus-port intensity at each
interferential instance is ``(1 + cos theta_j) / 2``, where ``theta_j`` is
the uncorrected phase of pulse ``j + 1`` relative to pulse ``j``. The servo
tracks ``theta_j`` and pre-compensates it at Alice's phase modulator.

A single intensity only gives ``|theta_j|``. By default a second reference
train with a fixed, public ``pi/2`` step between adjacent slots reads the
sine quadrature, which fixes the sign. Without it the sign is chosen by the
nearest-branch rule, which loses lock when the drift crosses 0 or pi.
"""

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .exceptions import MeasurementError, OverlapError
from .optics import PhasePattern

QUADRATURE_BIAS = np.pi / 2
_TOL = 1e-9


@dataclass(frozen=True)
class ServoState:
    estimates: Tuple[float, ...]
    gain: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "estimates", tuple(float(t) for t in self.estimates))
        if not 0.0 < self.gain <= 1.0:
            raise ValueError(f"servo gain must lie in (0, 1], got {self.gain}")
        if not np.all(np.isfinite(self.estimates)):
            raise ValueError("servo estimates must be finite")

    @classmethod
    def zero(cls, pairs, gain=0.5, enabled=True):
        return cls((0.0,) * pairs, gain, enabled)


def min_reference_offset(state):
    """Smallest allowed reference delay for a signal leaving Alice."""
    return max(state.populated()) + 3


def inject_reference(state, t0_slots, bias=0.0):
    """Reference copy of Alice's pulse train, delayed by ``t0_slots``.

    ``state`` is the interferometer output before the modulator. The
    reference never sees the secret phases or the servo corrections; slot
    ``s`` only receives the public offset ``s * bias``.
    """
    if t0_slots < min_reference_offset(state):
        raise OverlapError(
            f"reference delay {t0_slots} overlaps the signal; "
            f"need at least {min_reference_offset(state)}"
        )
    ramp = np.exp(1j * bias * np.arange(len(state)))
    ref = state.amps * ramp[:, None]
    return type(state)(ref).shifted(t0_slots)


def read_reference(ports, t0_slots, pulses):
    """Normalized plus-port intensity at each reference interferential instance.

    ``ports`` are Bob's (plus, minus) states containing the reference.
    Returns ``pulses - 1`` intensities.
    """
    plus, minus = ports
    idx = t0_slots + np.arange(1, pulses)
    p = plus.slot_norms()
    m = minus.slot_norms()
    if idx[-1] >= len(p):
        raise MeasurementError("reference slots missing from the port record")
    total = p[idx] + m[idx]
    if np.any(total <= 0):
        raise MeasurementError("no reference power at an interferential instance")
    return p[idx] / total


def _unwrap_to(value, previous):
    return value + 2 * np.pi * np.round((previous - value) / (2 * np.pi))


def estimate_drift(servo, intensities, quadrature=None):
    """Update the pair-phase estimates from one reference reading.

    Parameters
    ----------
    servo : ServoState
    intensities : array_like
        In-phase readings ``(1 + cos theta) / 2``.
    quadrature : array_like, optional
        Readings of the pi/2-stepped reference, ``(1 - sin theta) / 2``.
        If omitted, the sign is the branch closest to the previous estimate.
    """
    i = _check_intensities(intensities)
    prev = np.asarray(servo.estimates)
    c = 2 * i - 1
    if quadrature is not None:
        s = 1 - 2 * _check_intensities(quadrature)
        measured = _unwrap_to(np.arctan2(s, c), prev)
    else:
        mag = np.arccos(c)
        up = _unwrap_to(mag, prev)
        down = _unwrap_to(-mag, prev)
        measured = np.where(np.abs(up - prev) <= np.abs(down - prev), up, down)
    new = prev + servo.gain * (measured - prev)
    return replace(servo, estimates=tuple(new))


def calibrate(servo, intensities, quadrature=None):
    """Initial estimate taken with zero correction at full gain."""
    fresh = ServoState.zero(len(servo.estimates), 1.0, servo.enabled)
    return replace(servo, estimates=estimate_drift(fresh, intensities, quadrature).estimates)


def _check_intensities(values):
    v = np.asarray(values, dtype=float)
    if np.any(v < -_TOL) or np.any(v > 1 + _TOL):
        raise MeasurementError(f"intensity outside [0, 1]: {v}")
    return np.clip(v, 0.0, 1.0)


def corrections(servo):
    """Per-slot modulator offsets cancelling the estimated pair phases."""
    if not servo.enabled:
        return np.zeros(len(servo.estimates) + 1)
    return np.concatenate([[0.0], -np.cumsum(servo.estimates)])


def apply_correction(servo, pattern):
    """Return ``pattern`` with servo offsets; the 0/pi phases are untouched."""
    return pattern.with_corrections(corrections(servo))
