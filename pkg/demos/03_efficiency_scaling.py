# More pulses per photon, fewer wasted clicks: efficiency (P - 1) / P.

from dpsqkd import efficiency_table

rows = efficiency_table(["single:3", "series:2", "series:3", "parallel:3", "series:4"],
                        frames=20_000)
print(f"{'scheme':11s} {'pulses':>6s} {'predicted':>9s} {'measured':>9s}")
for r in rows:
    print(f"{r.scheme:11s} {r.pulses:6d} {r.predicted:9.4f} {r.measured:9.4f}")
