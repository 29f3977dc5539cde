"""
Watching a hysteresis buffer from both sides
============================================

A device that stops accepting packets at 55 and only resumes once its queue
has drained to 30 looks, from the outside, like an ordinary drop-tail queue
with bursty losses. With a capture on each side of the device the limits
can be read off directly.
"""

import numpy as np

from bufprobe import BufferConfig, FlowSpec, RateProfile, build_schedule, simulate
from bufprobe.occupancy import limits_from_occupancy, match_captures, occupancy_samples

# The device: 55-packet queue, re-admission at 30, draining at 11 Mbps.
device = BufferConfig("packets", upper_limit=55, lower_limit=30,
                      output=RateProfile.constant(11e6))

# Flood it with 1500 B packets at twice the output rate.
flood = FlowSpec(packet_size_bytes=1500, input_rate_bps=22e6, packet_count=1200)
result = simulate(build_schedule(flood), device)
print(f"sent {len(result.in_capture)}, delivered {len(result.out_capture)}, "
      f"dropped {len(result.drops)}")

# Pair every packet seen entering with its exit (if any). A packet's
# occupancy is the number of departures between its arrival and its own
# departure, itself included.
matched = match_captures(result.in_capture, result.out_capture)
samples = occupancy_samples(matched)
occ = np.array([s.occupancy_pkts for s in samples])
print("occupancy seen by accepted packets: min", occ.min(), "max", occ.max())

# Losses come in runs. The packet accepted right after a run tells us how
# far the queue had drained before the device let traffic in again.
print("drop run lengths:", result.drop_runs()[:6], "...")
ll, ul = limits_from_occupancy(samples)
print(f"estimated LL={ll} UL={ul}")

# A crude text plot of the sawtooth over the first few hundred packets.
for s in samples[:400:20]:
    print(f"{s.seq:5d} {'#' * s.occupancy_pkts}")
