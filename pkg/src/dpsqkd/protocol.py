"""DPS key exchange: encoding, detection, public announcement and sifting.

Arrival instances at Bob are 1-based, ``t_1 .. t_{k+1}`` for a k-pulse
frame. Instance ``t_j`` with ``2 <= j <= k`` interferes pulses ``j-1`` and
``j``; the outer two instances see a single pulse and carry no key.
"""

import json
import socket
import time
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    AnnouncementParseError,
    InsufficientDataError,
    InvalidStateError,
    ProtocolDesyncError,
)
from .optics import PhasePattern

SPD1 = "SPD1"  # circulator port, destructive for equal phases
SPD2 = "SPD2"  # second coupler port, constructive for equal phases
DETECTORS = (SPD1, SPD2)
BIT_OF_DETECTOR = {SPD2: 0, SPD1: 1}


@dataclass(frozen=True)
class DetectionEvent:
    frame: int
    slot: int
    detector: str


@dataclass(frozen=True)
class Announcement:
    """Public click report. Never carries the detector identity."""

    frame: int
    slot: int


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_count: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("detector efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_count < 1.0:
            raise ValueError("dark count probability must lie in [0, 1)")


def differential_bits(phase_bits):
    """Key bit j is 1 iff adjacent phases j and j+1 differ."""
    b = np.asarray(phase_bits, dtype=np.int8)
    return (b[1:] != b[:-1]).astype(np.int8)


def alice_prepare(rng, k):
    """Draw i.i.d. 0/pi phases for ``k`` pulses.

    Returns the ``k - 1`` differential key bits and the phase pattern.
    """
    if k < 2:
        raise ValueError("need at least two pulses")
    phase_bits = rng.integers(0, 2, size=k)
    return differential_bits(phase_bits), PhasePattern.from_bits(phase_bits)


def click_probabilities(ports, det):
    """Per (slot, detector) photon click probabilities, columns SPD1, SPD2."""
    plus, minus = ports
    p = np.stack([minus.slot_norms(), plus.slot_norms()], axis=1)
    if p.sum() > 1.0 + 1e-9:
        raise InvalidStateError(f"port norm {p.sum():.12g} exceeds 1")
    return det.efficiency * p


def measure(ports, det, rng, frame=0):
    """Sample at most one click for one frame.

    The photon lands on one (slot, detector) cell with probability
    ``efficiency * |amplitude|**2``; every cell also fires a dark count with
    probability ``dark_count``. If several cells fire, the earliest wins
    (slot ascending, SPD1 before SPD2).
    """
    p = click_probabilities(ports, det).ravel()
    fired = np.zeros(p.size, dtype=bool)
    u = rng.random()
    cell = int(np.searchsorted(np.cumsum(p), u, side="right"))
    if cell < p.size:
        fired[cell] = True
    if det.dark_count > 0:
        fired |= rng.random(p.size) < det.dark_count
    if not fired.any():
        return None
    first = int(np.argmax(fired))
    return DetectionEvent(frame, first // 2 + 1, DETECTORS[first % 2])


def announce(event):
    return Announcement(event.frame, event.slot)


def sift(events, announcements, alice_phases, bit_of_detector=BIT_OF_DETECTOR):
    """Keep the clicks at interferential instances and derive both keys.

    Parameters
    ----------
    events : iterable of DetectionEvent
        Bob's private record.
    announcements : iterable of Announcement
        What Alice received over the public channel.
    alice_phases : mapping of frame -> sequence of 0/1 phase choices

    Returns
    -------
    key_a, key_b : numpy int8 arrays
    sifted : int
    total : int
        Number of announced clicks.
    """
    bob = {e.frame: e for e in events}
    key_a, key_b = [], []
    total = 0
    for a in sorted(announcements, key=lambda a: a.frame):
        if a.frame not in alice_phases:
            raise ProtocolDesyncError(f"announcement for unknown frame {a.frame}")
        ev = bob.get(a.frame)
        if ev is None or ev.slot != a.slot:
            raise ProtocolDesyncError(f"announcement {a} does not match Bob's record")
        total += 1
        phases = alice_phases[a.frame]
        k = len(phases)
        if not 1 <= a.slot <= k + 1:
            raise ProtocolDesyncError(f"slot {a.slot} out of range for {k} pulses")
        if a.slot == 1 or a.slot == k + 1:
            continue
        key_a.append(int(phases[a.slot - 2] != phases[a.slot - 1]))
        key_b.append(bit_of_detector[ev.detector])
    if len(bob) != total:
        raise ProtocolDesyncError(f"{len(bob)} clicks but {total} announcements")
    return np.array(key_a, dtype=np.int8), np.array(key_b, dtype=np.int8), len(key_a), total


def stats(key_a, key_b, sifted, total):
    """Key creation efficiency and QBER."""
    if total <= 0 or sifted <= 0:
        raise InsufficientDataError("no clicks to evaluate")
    errors = int(np.count_nonzero(np.asarray(key_a) != np.asarray(key_b)))
    return sifted / total, errors / sifted


# Wire format: one compact JSON object per line, UTF-8, LF-terminated.

def encode_announcement(a):
    return (json.dumps({"frame": int(a.frame), "slot": int(a.slot)},
                       separators=(",", ":")) + "\n").encode("utf-8")


def decode_announcement(line, lineno=1):
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            raise AnnouncementParseError(lineno, line, "not UTF-8") from None
    text = line.rstrip("\n")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        raise AnnouncementParseError(lineno, text, "not JSON") from None
    if not isinstance(obj, dict) or set(obj) != {"frame", "slot"}:
        raise AnnouncementParseError(lineno, text, "expected keys frame, slot")
    if not all(type(obj[k]) is int for k in ("frame", "slot")):
        raise AnnouncementParseError(lineno, text, "fields must be integers")
    return Announcement(obj["frame"], obj["slot"])


def write_announcements(stream, announcements):
    for a in announcements:
        stream.write(encode_announcement(a))
    stream.flush()


def read_announcements(stream):
    """Decode every line of a binary stream until EOF."""
    return [decode_announcement(line, i) for i, line in enumerate(stream, start=1)]


class AnnouncementServer:
    """Listen on a TCP port and stream announcements to the first client.

    Binding happens on construction, so ``port=0`` picks a free port that
    is available as :attr:`port` before :meth:`send` blocks.
    """

    def __init__(self, port, host="127.0.0.1", timeout=30.0):
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(timeout)
        self.port = self._sock.getsockname()[1]

    def send(self, announcements):
        try:
            conn, _ = self._sock.accept()
            with conn, conn.makefile("wb") as f:
                write_announcements(f, announcements)
        finally:
            self.close()

    def close(self):
        self._sock.close()


def fetch_announcements(host, port, timeout=30.0):
    """Connect to an :class:`AnnouncementServer` and read its stream."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            conn = socket.create_connection((host, port), timeout=timeout)
            break
        except ConnectionRefusedError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)
    with conn, conn.makefile("rb") as f:
        return read_announcements(f)
