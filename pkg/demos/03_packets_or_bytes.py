"""
Does the device count packets or bytes?
=======================================

Repeat the flood with three packet sizes. A packet-counting queue holds the
same number of packets each time; a byte-counting queue holds the same
number of bytes, so small packets fit in much greater numbers.
"""

from bufprobe import BufferConfig, FlowSpec, RateProfile
from bufprobe.experiment import infer_unit, run_flood, suggest_packet_count

out = RateProfile.constant(10e6)
devices = {
    "packet queue": BufferConfig("packets", 55, 30, out),
    "byte queue": BufferConfig("bytes", 85500, 46636, out),
}

for name, device in devices.items():
    uls = {}
    for size in (1500, 800, 200):
        flood = FlowSpec(size, 20e6, suggest_packet_count(device, size, 20e6))
        uls[size] = run_flood(device, flood).method1.ul
    print(f"{name}: UL in packets per size {uls}")
    print(f"  as bytes: { {s: n * s for s, n in uls.items()} }")
    print(f"  verdict: {infer_unit(uls)}")
