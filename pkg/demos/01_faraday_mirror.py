# Why Faraday mirrors make the interferometers immune to fiber birefringence.
#
# A pulse that goes down a fiber arm and comes back sees the fiber twice:
# forward as A, backward as transpose(A). With an ordinary mirror in
# between the round trip is A.T @ A, which depends on the (unknown, drifting)
# fiber. With a Faraday mirror it is A.T @ M @ A = det(A) * M for *any* A.

import numpy as np

from dpsqkd import jones
from dpsqkd.optics import FmMi, TimeBinState, reflect_fmmi
from dpsqkd.channel import polarization_spread

rng = np.random.default_rng(1)
M = jones.faraday_mirror()
print("Faraday mirror:\n", M)

A = jones.haar_su2(rng)
print("\nrandom fiber A:\n", np.round(A, 3))
print("A.T @ M @ A:\n", np.round(jones.round_trip(A, M), 12))
print("A.T @ A (plain mirror):\n", np.round(jones.round_trip(A, jones.plain_mirror()), 3))

# It even holds for lossy, non-unitary fibers; only det(A) survives.
B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
print("\nnon-unitary B, error of det(B) * M:",
      np.abs(jones.round_trip(B, M) - jones.det(B) * M).max())

# Alice's three-arm interferometer with random fibers in every arm.
# With Faraday mirrors the three output pulses share one polarization.
photon = TimeBinState.single(jones.jones_vector(1, 0))
for mirror in ("faraday", "plain"):
    mi = FmMi.uniform((0, 1, 2), mirror, forwards=jones.haar_su2(rng, 3))
    out = reflect_fmmi(photon, mi)
    print(f"\n{mirror:8s} mirrors: slots {out.populated()}, survival {out.norm():.4f}, "
          f"polarization spread {polarization_spread(out):.3e}")
