from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufprobe.errors import ConfigurationError, InvariantViolation, SimulationHorizonError
from bufprobe.model import BufferConfig, FlowSpec, PacketRecord, RateProfile, build_schedule
from bufprobe.simulator import (
    SimResult,
    apply_rate_profile,
    classic_droptail,
    simulate,
    verify_invariants,
)

from conftest import checked_simulate


def test_steady_state_no_queue(sim):
    res, _ = sim(10, 5, 10e6, 5e6, 40)
    assert not res.drops
    delays = [o.ticks - i.ticks for i, o in zip(res.in_capture, res.out_capture)]
    assert set(delays) == {12000}


def test_golden_hysteresis_trace(sim):
    # UL=3, LL=1, 1500 B: arrivals every 600 us, service 1200 us.
    res, _ = sim(3, 1, 10e6, 20e6, 12)
    assert res.drops == ((5, 30000), (6, 36000), (7, 42000), (11, 66000))
    assert [r.seq for r in res.out_capture] == [0, 1, 2, 3, 4, 8, 9, 10]
    assert [r.timestamp_us for r in res.out_capture] == [1200, 2400, 3600, 4800, 6000, 7200, 8400, 9600]
    assert res.arrival_occupancy == {0: 1, 1: 2, 2: 2, 3: 3, 4: 3, 8: 2, 9: 3, 10: 3}
    # seq 5 finds the buffer at 3; seq 6 and 7 see 2 > LL; seq 8 arrives as the
    # occupancy drains to 1 (departure processed first) and is accepted.
    assert res.drop_runs() == [3, 1]


def test_golden_classic_droptail(sim):
    cfg = BufferConfig("packets", 3, 1, RateProfile.constant(10e6))
    res = classic_droptail(build_schedule(FlowSpec(1500, 20e6, 8)), cfg)
    assert [s for s, _ in res.drops] == [5, 7]
    assert res.drop_runs() == [1, 1]


def test_classic_no_drops_when_underloaded(sim):
    res, _ = sim(3, 3, 10e6, 10e6, 50)
    assert not res.drops


@pytest.mark.parametrize("ul", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("ratio", [Fraction(11, 10), Fraction(3, 2), Fraction(19, 10), Fraction(199, 100)])
def test_classic_single_drops_below_double_rate(ul, ratio):
    cfg = BufferConfig("packets", ul, ul, RateProfile.constant(10e6))
    res = checked_simulate(build_schedule(FlowSpec(1500, float(10e6 * ratio), 400)), cfg)
    assert res.drops
    assert set(res.drop_runs()) == {1}


def test_wifi_truth_sawtooth(sim):
    res, _ = sim(55, 30, 5.5e6, 11e6, 1500)
    assert res.max_occupancy() == 55
    first_drop = res.drops[0][1]
    last_arrival = res.in_capture.records[-1].ticks
    troughs = [o for t, o in res.occupancy_trace if first_drop < t <= last_arrival]
    assert min(troughs) == 30
    assert len(res.drop_runs()) >= 2


def test_bytes_unit_no_partial_admission(sim):
    # 4000 B buffer, 1500 B packets: two fit, the third would reach 4500.
    res, cfg = sim(4000, 4000, 10e6, 40e6, 6, unit="bytes")
    assert res.arrival_occupancy[1] == 2
    assert max(o for _, o in res.occupancy_trace) == 3000
    assert res.drops[0][0] == 2


def test_packet_larger_than_byte_buffer():
    cfg = BufferConfig("bytes", 1000, 500, RateProfile.constant(1e6))
    with pytest.raises(ConfigurationError):
        simulate(build_schedule(FlowSpec(1500, 1e6, 3)), cfg)


def test_schedule_must_increase():
    cfg = BufferConfig("packets", 3, 1, RateProfile.constant(1e6))
    with pytest.raises(ConfigurationError):
        simulate([PacketRecord(0, 5, 100), PacketRecord(1, 5, 100)], cfg)


def test_empty_schedule():
    cfg = BufferConfig("packets", 3, 1, RateProfile.constant(1e6))
    res = simulate([], cfg)
    assert len(res.in_capture) == len(res.out_capture) == 0 and res.drops == ()


def test_tie_departure_first():
    # Arrival at exactly the departure tick of the head sees the freed slot.
    cfg = BufferConfig("packets", 1, 1, RateProfile.constant(10e6))
    res = checked_simulate([PacketRecord(0, 0, 1500), PacketRecord(1, 12000, 1500)], cfg)
    assert not res.drops


def test_propagation_delay(sim):
    res, _ = sim(10, 5, 10e6, 20e6, 20, prop_us=2500)
    assert [d.ticks - o.ticks for o, d in zip(res.out_capture, res.dest_capture)] == [25000] * len(res.out_capture)
    assert res.dest_capture.point.value == "destination"


def test_determinism(sim):
    a, _ = sim(20, 8, 10e6, 30e6, 500)
    b, _ = sim(20, 8, 10e6, 30e6, 500)
    assert a == b


def test_rate_profile_constant():
    assert apply_rate_profile(RateProfile.constant(10e6), 1500, 0) == 1200


def test_rate_profile_halving():
    p = RateProfile(((0, 10e6), (600, 5e6)))
    assert apply_rate_profile(p, 1500, 0) == 1800


def test_rate_profile_periodic():
    p = RateProfile.oscillating(5e6, 10e6, 600)  # 10 Mbps for 600 us, then 5 Mbps
    # 6000 bits in the first 600 us, 3000 in the next 600, 3000 more at 10 Mbps.
    assert apply_rate_profile(p, 1500, 0) == 1500


def test_rate_profile_horizon():
    p = RateProfile(((0, 10e6),), end_us=1000)
    with pytest.raises(SimulationHorizonError):
        apply_rate_profile(p, 1500, 0)
    assert apply_rate_profile(p, 1000, 0) == 800


def test_variable_rate_departures(sim):
    p = RateProfile.oscillating(10.88e6, 28.36e6, 5000)
    res, cfg = sim(55, 30, None, 60e6, 2000, profile=p)
    assert res.max_occupancy() == 55


def test_verify_invariants_catches_tampering(sim):
    res, cfg = sim(3, 1, 10e6, 20e6, 12)
    bad = SimResult(res.in_capture, res.out_capture, res.dest_capture, res.drops[:-1],
                    res.occupancy_trace, res.arrival_occupancy)
    with pytest.raises(InvariantViolation):
        verify_invariants(bad, cfg)
    tight = BufferConfig("packets", 3, 1, RateProfile.constant(10e6))
    loose = BufferConfig("packets", 3, 3, RateProfile.constant(10e6))
    verify_invariants(res, tight)
    with pytest.raises(InvariantViolation):
        # Under classic tail-drop seq 6 would have been accepted.
        verify_invariants(classic_droptail(build_schedule(FlowSpec(1500, 20e6, 12)), loose), tight)


@settings(max_examples=60, deadline=None)
@given(
    ul=st.integers(1, 40),
    ll_frac=st.floats(0.01, 1.0),
    ratio=st.floats(0.5, 5.0),
    size=st.sampled_from([200, 800, 1500]),
    unit=st.sampled_from(["packets", "bytes"]),
    count=st.integers(1, 400),
)
def test_invariants_random(ul, ll_frac, ratio, size, unit, count):
    if unit == "bytes":
        ul *= 1500
    ll = max(1, int(ul * ll_frac))
    cfg = BufferConfig(unit, ul, ll, RateProfile.constant(10e6))
    res = checked_simulate(build_schedule(FlowSpec(size, 10e6 * ratio, count)), cfg)
    out = {r.seq for r in res.out_capture}
    dropped = {s for s, _ in res.drops}
    assert out | dropped == {r.seq for r in res.in_capture}
    assert not out & dropped
