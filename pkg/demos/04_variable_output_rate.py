"""
When the output rate will not sit still
=======================================

Wireless links switch modulation as conditions change, so the drain rate
of the queue jumps around. The remote method assumes one output rate and
suffers; the two-sided occupancy method does not care.
"""

from bufprobe import BufferConfig, FlowSpec, RateProfile, build_schedule, simulate
from bufprobe.occupancy import analyze_physical
from bufprobe.remote import analyze_remote

flood = build_schedule(FlowSpec(1500, 60e6, 3000))

profiles = {"constant 19.62 Mbps": RateProfile.constant(19.62e6)}
for half_period in (1000, 3000, 7000, 15000):
    profiles[f"10.88/28.36 Mbps, {half_period} us"] = RateProfile.oscillating(
        10.88e6, 28.36e6, half_period)

for name, profile in profiles.items():
    sim = simulate(flood, BufferConfig("packets", 55, 30, profile))
    m1 = analyze_physical(sim.in_capture, sim.out_capture)
    m2 = analyze_remote(sim.dest_capture)
    print(f"{name:32s} occupancy LL/UL {m1.ll}/{m1.ul}   remote LL/UL {m2.ll_pkts}/{m2.ul_pkts}"
          f"   remote R_out {m2.r_out_bps / 1e6:.2f} Mbps")
