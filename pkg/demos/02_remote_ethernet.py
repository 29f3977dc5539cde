"""
Sizing a buffer from the receiver alone
=======================================

Without access to the device we only see what comes out at the far end.
The spacing of received packets gives the output rate, the sequence gaps
give the input rate and the drop cycles, and the time until the first gap
gives the buffer size.
"""

from bufprobe import BufferConfig, FlowSpec, RateProfile, build_schedule, simulate
from bufprobe.remote import analyze_remote, detect_loss_epochs
from bufprobe.report import error_percent

device = BufferConfig("packets", 115, 85, RateProfile.constant(10e6))

# Faster floods give sharper estimates: the fill phase is shorter relative
# to the drain, and each drop run covers more sequence numbers.
for r_in in (20e6, 30e6, 40e6):
    sim = simulate(build_schedule(FlowSpec(1500, r_in, 2000)), device)
    dest = sim.dest_capture
    epochs = detect_loss_epochs(dest)
    est = analyze_remote(dest)
    print(f"R_in={r_in / 1e6:.0f} Mbps: first losses m={[e.m_lost for e in epochs[:4]]}")
    print(f"  R_out={est.r_out_bps / 1e6:.3f} Mbps  R_in={est.r_in_bps / 1e6:.3f} Mbps  "
          f"T_r={est.t_r_us / 1000:.1f} ms  L={est.l_buffer_bytes:.0f} B")
    print(f"  LL={est.ll_pkts} ({error_percent(est.ll_pkts, 85)}%)  "
          f"UL={est.ul_pkts} ({error_percent(est.ul_pkts, 115)}%)")
