# One photon, three time slots: the full key exchange step by step.

import numpy as np

from dpsqkd import jones, protocol
from dpsqkd.channel import ChannelState, apply_channel
from dpsqkd.optics import (
    FmMi, TimeBinState, alice_output, apply_modulator, bob_split,
    build_scheme, condition_renormalize,
)

rng = np.random.default_rng(7)
scheme = build_scheme("single:3")
print(f"{scheme.label}: {scheme.pulses} pulses, "
      f"predicted efficiency {scheme.predicted_efficiency:.4f}")

# Alice splits the photon and keeps it only if it heads for the channel.
stations = scheme.stations()
state, survival = condition_renormalize(alice_output(stations))
print("leaves Alice with probability", round(survival, 4))

# Random 0/pi phases; the key lives in the differences.
bits, pattern = protocol.alice_prepare(rng, scheme.pulses)
print("phases:", np.round(pattern.slot_phases, 3), "key bits:", bits)
state = apply_modulator(state, pattern)

# A random, unknown fiber.
state = apply_channel(state, ChannelState(q=jones.haar_su2(rng), phase=2.1))

# Bob's two-arm interferometer. t_1 and t_4 see one pulse only.
plus, minus = bob_split(state, FmMi.uniform((0, 1)))
p = protocol.click_probabilities((plus, minus), protocol.DetectorModel())
for t, (p1, p2) in enumerate(p, start=1):
    print(f"t_{t}: P(SPD1)={p1:.4f} P(SPD2)={p2:.4f}")

# Many frames: Bob announces click times only, both sides sift.
events, phases = [], {}
for f in range(20_000):
    bits, pattern = protocol.alice_prepare(rng, 3)
    phases[f] = [int(x > 0) for x in pattern.slot_phases]
    s = apply_modulator(condition_renormalize(alice_output(stations))[0], pattern)
    e = protocol.measure(bob_split(s, FmMi.uniform((0, 1))), protocol.DetectorModel(), rng, f)
    if e is not None:
        events.append(e)
wire = b"".join(protocol.encode_announcement(protocol.announce(e)) for e in events[:3])
print("\nfirst announcements on the wire:\n" + wire.decode(), end="")
ka, kb, sifted, total = protocol.sift(events, [protocol.announce(e) for e in events], phases)
eff, qber = protocol.stats(ka, kb, sifted, total)
print(f"sifted {sifted}/{total}: efficiency {eff:.4f}, QBER {qber}")
