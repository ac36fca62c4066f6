"""Time-bin propagation through Faraday-mirror Michelson interferometers.

A photon is described by a :class:`TimeBinState`: a Jones vector per time
slot, slots counted in units of the interferometer delay ``T``. Alice's
station splits one input slot into equally spaced co-polarized pulses, the
phase modulator writes the 0/pi pattern, and Bob's two-arm interferometer
overlaps each pulse with its predecessor at two output ports.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np

from . import jones
from .exceptions import ConfigurationError, EmptyStateError

FARADAY = "faraday"
PLAIN = "plain"
_MIRRORS = {FARADAY: jones.faraday_mirror(), PLAIN: jones.plain_mirror()}


class TimeBinState:
    """Photon amplitude over time slots x polarization.

    Stored densely as an ``(n_slots, 2)`` complex array starting at slot 0;
    a slot is *populated* when its amplitude is nonzero.
    """

    __slots__ = ("amps",)

    def __init__(self, amps):
        amps = np.array(amps, dtype=complex).reshape(-1, 2)
        amps.flags.writeable = False
        self.amps = amps

    @classmethod
    def from_slots(cls, slots):
        """Build from a ``{slot: jones_vector}`` mapping."""
        if not slots:
            return cls(np.zeros((0, 2)))
        if min(slots) < 0:
            raise ValueError("slot indices must be non-negative")
        amps = np.zeros((max(slots) + 1, 2), dtype=complex)
        for s, v in slots.items():
            amps[s] = v
        return cls(amps)

    @classmethod
    def single(cls, vector, slot=0):
        return cls.from_slots({slot: vector})

    def __len__(self):
        return len(self.amps)

    def __getitem__(self, slot):
        if 0 <= slot < len(self.amps):
            return self.amps[slot]
        return np.zeros(2, dtype=complex)

    def __eq__(self, other):
        if not isinstance(other, TimeBinState):
            return NotImplemented
        return self.slots().keys() == other.slots().keys() and all(
            np.array_equal(v, other[s]) for s, v in self.slots().items()
        )

    def __repr__(self):
        return f"TimeBinState({self.slots()!r})"

    def slot_norms(self):
        return np.sum(np.abs(self.amps) ** 2, axis=1)

    def norm(self):
        return float(np.sum(self.slot_norms()))

    def populated(self, tol=0.0):
        return [int(s) for s in np.flatnonzero(self.slot_norms() > tol)]

    def slots(self):
        return {s: self.amps[s] for s in self.populated()}

    def shifted(self, offset):
        if offset < 0:
            raise ValueError("offset must be non-negative")
        return TimeBinState(np.vstack([np.zeros((offset, 2)), self.amps]))

    def scaled(self, factor):
        return TimeBinState(factor * self.amps)


@dataclass(frozen=True, eq=False)
class OpticalArm:
    """One interferometer arm.

    ``forward`` is the one-way fiber Jones matrix, ``phase`` the round-trip
    phase, ``delay`` the round-trip delay in slots.
    """

    forward: np.ndarray = field(default_factory=jones.identity)
    phase: float = 0.0
    delay: int = 0
    mirror: str = FARADAY

    def __post_init__(self):
        if self.mirror not in _MIRRORS:
            raise ConfigurationError(f"unknown mirror kind {self.mirror!r}")
        if self.delay < 0:
            raise ConfigurationError("arm delay must be non-negative")

    @cached_property
    def _operator(self):
        rt = jones.round_trip(self.forward, _MIRRORS[self.mirror])
        return np.exp(1j * self.phase) * rt

    def operator(self):
        """Round-trip operator including the arm phase."""
        return self._operator


@dataclass(frozen=True, eq=False)
class FmMi:
    """Michelson interferometer with ``k`` mirror-terminated arms.

    A symmetric k-way coupler contributes ``1/sqrt(k)`` per pass, so each arm
    returns amplitude ``1/k`` to the input side.
    """

    arms: Tuple[OpticalArm, ...]

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if not self.arms:
            raise ConfigurationError("an interferometer needs at least one arm")
        delays = [a.delay for a in self.arms]
        if len(set(delays)) != len(delays):
            raise ConfigurationError(f"duplicate arm delays {delays}")

    @property
    def k(self):
        return len(self.arms)

    @property
    def split_amplitude(self):
        return 1.0 / np.sqrt(self.k)

    @classmethod
    def uniform(cls, delays, mirror=FARADAY, forwards=None, phases=None):
        n = len(delays)
        forwards = [jones.identity()] * n if forwards is None else forwards
        phases = [0.0] * n if phases is None else phases
        return cls(tuple(
            OpticalArm(np.asarray(f, dtype=complex), float(p), int(d), mirror)
            for f, p, d in zip(forwards, phases, delays)
        ))

    def with_arms(self, arms):
        return FmMi(tuple(arms))


def reflect_fmmi(state, mi):
    """Coherent sum over arms of the delayed, round-tripped input."""
    n = len(state)
    out = np.zeros((n + max(a.delay for a in mi.arms), 2), dtype=complex)
    for arm in mi.arms:
        op = arm.operator() / mi.k
        out[arm.delay:arm.delay + n] += state.amps @ op.T
    return TimeBinState(out)


def condition_renormalize(state):
    """Post-select on the photon leaving toward the channel.

    Returns the unit-norm state and the survival probability.
    """
    p = state.norm()
    if p <= 0.0:
        raise EmptyStateError("cannot renormalize a zero-norm state")
    if p == 1.0:
        return state, 1.0
    return state.scaled(1.0 / np.sqrt(p)), p


@dataclass(frozen=True)
class PhasePattern:
    """Alice's modulator setting: secret 0/pi phases plus servo offsets."""

    slot_phases: Tuple[float, ...]
    corrections: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "slot_phases", tuple(float(p) for p in self.slot_phases))
        object.__setattr__(self, "corrections", tuple(float(c) for c in self.corrections))
        for p in self.slot_phases:
            if p != 0.0 and p != np.pi:
                raise ValueError(f"slot phase must be 0 or pi, got {p}")
        if not np.all(np.isfinite(self.corrections)):
            raise ValueError("corrections must be finite")

    @classmethod
    def from_bits(cls, bits, corrections=()):
        """Phases from 0/1 choices (1 means pi)."""
        return cls(tuple(np.pi if b else 0.0 for b in bits), corrections)

    def total(self, n_slots):
        """Per-slot modulation for ``n_slots`` slots; missing entries are 0."""
        out = np.zeros(n_slots)
        m = min(n_slots, len(self.slot_phases))
        out[:m] += self.slot_phases[:m]
        m = min(n_slots, len(self.corrections))
        out[:m] += self.corrections[:m]
        return out

    def with_corrections(self, corrections):
        return PhasePattern(self.slot_phases, tuple(corrections))


def apply_modulator(state, pattern):
    phases = pattern.total(len(state))
    return TimeBinState(state.amps * np.exp(1j * phases)[:, None])


def bob_split(state, bob):
    """Bob's two-arm interferometer read out at both coupler ports.

    Coupler convention: bar ``1/sqrt(2)``, cross ``i/sqrt(2)``. The port
    back toward the circulator (SPD1) sees ``(R_S v_t - R_L v_{t-1}) / 2``;
    the other port (SPD2) sees ``i (R_S v_t + R_L v_{t-1}) / 2``.

    Returns
    -------
    (plus, minus) : TimeBinState, TimeBinState
        The SPD2 and SPD1 port states, each ``len(state) + 1`` slots long.
    """
    s_part, l_part = bob_contributions(state, bob)
    plus = 0.5j * (s_part + l_part)
    minus = 0.5 * (s_part - l_part)
    return TimeBinState(plus), TimeBinState(minus)


def bob_contributions(state, bob):
    """Short- and long-arm contributions per Bob slot, before the coupler."""
    short, long_ = _bob_arms(bob)
    n = len(state)
    s_part = np.zeros((n + 1, 2), dtype=complex)
    l_part = np.zeros((n + 1, 2), dtype=complex)
    s_part[:n] = state.amps @ short.operator().T
    l_part[1:] = state.amps @ long_.operator().T
    return s_part, l_part


def _bob_arms(bob):
    if bob.k != 2:
        raise ConfigurationError(f"Bob's interferometer needs 2 arms, got {bob.k}")
    arms = sorted(bob.arms, key=lambda a: a.delay)
    if [a.delay for a in arms] != [0, 1]:
        raise ConfigurationError("Bob's arm delays must be {0, 1}")
    return arms


@dataclass(frozen=True)
class Scheme:
    """Layout of Alice's station: one delay list per cascaded FM-MI."""

    kind: str
    n: int
    stages: Tuple[Tuple[int, ...], ...]

    @property
    def pulses(self):
        return int(np.prod([len(s) for s in self.stages]))

    @property
    def predicted_efficiency(self):
        return (self.pulses - 1) / self.pulses

    @property
    def label(self):
        return f"{self.kind}:{self.n}"

    def stations(self, mirror=FARADAY):
        """Alice's interferometers with identity fibers and zero phases."""
        return [FmMi.uniform(d, mirror) for d in self.stages]


def build_scheme(kind, n=None):
    """Alice's layout for ``single(k)``, ``series(n)`` or ``parallel(n)``.

    ``kind`` may also be a label such as ``"series:3"``.
    """
    if n is None:
        kind, n = parse_scheme_label(kind)
    if kind == "single":
        if n < 2:
            raise ConfigurationError("single(k) needs k >= 2")
        stages = (tuple(range(n)),)
    elif kind == "series":
        if n < 1:
            raise ConfigurationError("series(n) needs n >= 1")
        stages = tuple((0, 2 ** (n - j)) for j in range(1, n + 1))
    elif kind == "parallel":
        if n < 1:
            raise ConfigurationError("parallel(n) needs n >= 1")
        stages = (tuple(range(n + 1)),)
    else:
        raise ConfigurationError(f"unknown scheme kind {kind!r}")
    return Scheme(kind, int(n), stages)


def parse_scheme_label(label):
    try:
        kind, n = label.split(":")
        return kind.strip(), int(n)
    except (AttributeError, ValueError):
        raise ConfigurationError(f"bad scheme label {label!r}, expected kind:n") from None


def alice_output(stations, vector=(1.0, 0.0)):
    """Propagate one input slot through Alice's cascade (unnormalized)."""
    state = TimeBinState.single(vector)
    for mi in stations:
        state = reflect_fmmi(state, mi)
    return state


FORWARD = "forward"
BACKWARD = "backward"


def isolator_check(direction):
    """Power transmission of Alice's isolator in the given direction."""
    if direction == FORWARD:
        return 1.0
    if direction == BACKWARD:
        return 0.0
    raise ValueError(f"unknown direction {direction!r}")


def probe_alice_backward(probe, stations, pattern=None):
    """Send a probe from the channel back into Alice's station.

    The probe picks up the modulator pattern and the interferometers on the
    way in, but the isolator in front of the source blocks whatever returns.
    """
    state = probe
    if pattern is not None:
        state = apply_modulator(state, pattern)
    for mi in reversed(stations):
        state = reflect_fmmi(state, mi)
    return state.scaled(np.sqrt(isolator_check(BACKWARD)))
