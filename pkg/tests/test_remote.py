from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufprobe.errors import (
    FillRateError,
    NoEstimateError,
    PartialWindowError,
    ReorderingError,
    UnderflowError,
)
from bufprobe.model import Capture, PacketRecord
from bufprobe.remote import (
    LossEpoch,
    TrMeasurement,
    analyze_remote,
    buffer_from_tr,
    detect_loss_epochs,
    estimate_buffer,
    estimate_lower_limit,
    estimate_r_in,
    estimate_r_out,
    input_rate,
    measure_tr,
    steady_epochs,
    tr_from_buffer,
)
from bufprobe.report import error_percent

from conftest import run_sim


def _dest(pairs, size=1500):
    return Capture("destination", tuple(PacketRecord(s, int(t * 10), size) for s, t in pairs))


def test_epochs_simple_gap():
    ep = detect_loss_epochs(_dest([(s, 100 * i) for i, s in enumerate([0, 1, 2, 5, 6])]))
    assert len(ep) == 1
    assert (ep[0].first_lost_seq, ep[0].m_lost) == (3, 2)
    assert ep[0].t_last_before_us == 200 and ep[0].t_first_after_us == 300


def test_epochs_none():
    assert detect_loss_epochs(_dest([(s, 10 * s) for s in range(10)])) == []


def test_epochs_trailing_open():
    ep = detect_loss_epochs(_dest([(0, 0), (1, 10), (4, 20)]), sent_count=8)
    assert [(e.first_lost_seq, e.m_lost, e.closed) for e in ep] == [(2, 2, True), (5, 3, False)]


def test_epochs_reordering():
    with pytest.raises(ReorderingError):
        detect_loss_epochs(_dest([(0, 0), (2, 10), (1, 20)]))


def test_epochs_periodic_in_steady_state():
    res, _ = run_sim(115, 85, 10e6, 20e6, 2000)
    ep = detect_loss_epochs(res.dest_capture)
    assert len(ep) >= 4
    assert len({e.m_lost for e in ep[1:]}) == 1
    assert all(e.t_first_after_ticks > e.t_last_before_ticks for e in ep)


def test_r_out_three_packets():
    assert estimate_r_out(_dest([(0, 0), (1, 1200), (2, 2400)])) == pytest.approx(10e6)


def test_r_out_single_packet():
    with pytest.raises(NoEstimateError):
        estimate_r_out(_dest([(0, 0)]))


@pytest.mark.parametrize("r_out", [1e6, 5.5e6, 10e6, 54e6])
def test_r_out_simulator(r_out):
    res, _ = run_sim(55, 30, r_out, 2 * r_out, 600)
    assert estimate_r_out(res.dest_capture) == pytest.approx(r_out, rel=0.01)


def test_r_out_ignores_idle_gap():
    # Two back-to-back bursts separated by an idle period.
    pairs = [(i, 1200 * i) for i in range(10)] + [(10 + i, 100000 + 1200 * i) for i in range(4)]
    assert estimate_r_out(_dest(pairs)) == pytest.approx(10e6)


def test_input_rate_example():
    assert input_rate(100, 20, 72000, 1500) == pytest.approx(20e6)


def test_input_rate_lossless_is_goodput():
    dest = _dest([(s, 600 * s) for s in range(11)])
    assert estimate_r_in(dest, window=(0, 10)) == pytest.approx(20e6)


def test_r_in_window_counts_losses():
    # 20 Mbps source (600 us gap), every third packet lost, receive times = send times.
    pairs = [(s, 600 * s) for s in range(31) if s % 3 != 2]
    assert estimate_r_in(_dest(pairs), window=(0, 30)) == pytest.approx(20e6)


@pytest.mark.parametrize("r_in", [20e6, 30e6, 40e6])
def test_r_in_simulator(r_in):
    res, _ = run_sim(115, 85, 10e6, r_in, 2000)
    assert estimate_r_in(res.dest_capture) == pytest.approx(r_in, rel=0.02)


def test_r_in_partial_window():
    dest = _dest([(0, 0), (1, 10), (4, 20)])
    with pytest.raises(PartialWindowError):
        estimate_r_in(dest, window=(0, 3))
    with pytest.raises(PartialWindowError):
        estimate_r_in(dest, window=(2, 4))


def test_tr_fill_plus_drain_value():
    # 172500 B with both fill and drain rates at 1.25e6 B/s.
    assert tr_from_buffer(Fraction(172500), Fraction(2_500_000), Fraction(1_250_000)) == Fraction(276, 1000)


def test_measure_tr_simulator():
    res, _ = run_sim(115, 85, 10e6, 20e6, 2000)
    tr = measure_tr(res.dest_capture)
    assert float(tr.t_r_us) == pytest.approx(276000, rel=0.01)


def test_measure_tr_no_loss():
    with pytest.raises(UnderflowError):
        measure_tr(_dest([(s, 1200 * s) for s in range(5)]))


def test_split_symmetry():
    t_fill, t_empty = TrMeasurement(Fraction(276000)).split(20e6, 10e6)
    assert t_fill == t_empty == 138000


def test_linearity_in_buffer():
    a = tr_from_buffer(Fraction(172500), Fraction(2_500_000), Fraction(1_250_000))
    b = tr_from_buffer(Fraction(345000), Fraction(2_500_000), Fraction(1_250_000))
    assert b == 2 * a


def test_estimate_buffer_example():
    l_bytes, ul = estimate_buffer(TrMeasurement(Fraction(276000)), 20e6, 10e6, 1500)
    assert l_bytes == 172500 and ul == 115


def test_estimate_buffer_double_rate_simplifies():
    tr = TrMeasurement(Fraction(100000))
    l_bytes, _ = estimate_buffer(tr, 16e6, 8e6, 1000)
    assert l_bytes == Fraction(1, 10) * Fraction(1_000_000) / 2


def test_estimate_buffer_fill_rate_error():
    with pytest.raises(FillRateError):
        estimate_buffer(TrMeasurement(Fraction(1000)), 10e6, 10e6, 1500)
    with pytest.raises(FillRateError):
        buffer_from_tr(Fraction(1), 1, 2)


@settings(max_examples=200)
@given(
    l_bytes=st.fractions(min_value=1, max_value=10**7),
    r_out=st.fractions(min_value=1000, max_value=10**9),
    excess=st.fractions(min_value=Fraction(1, 1000), max_value=10**9),
)
def test_buffer_tr_roundtrip_exact(l_bytes, r_out, excess):
    r_in = r_out + excess
    assert buffer_from_tr(tr_from_buffer(l_bytes, r_in, r_out), r_in, r_out) == l_bytes


def test_lower_limit_ethernet_20m():
    res, _ = run_sim(115, 85, 10e6, 20e6, 2000)
    ep = detect_loss_epochs(res.dest_capture)
    assert estimate_lower_limit(ep, 20e6, 10e6, 115, 1500) == 85


def test_lower_limit_wifi_5_5():
    res, _ = run_sim(55, 30, 5.5e6, 16.5e6, 1500)
    est = analyze_remote(res.dest_capture)
    assert est.ll_pkts == 30


def test_lower_limit_excludes_first_and_outliers():
    ep = [LossEpoch(10, 80, 0, 1), LossEpoch(100, 20, 2, 3), LossEpoch(200, 20, 4, 5),
          LossEpoch(300, 200, 6, 7), LossEpoch(600, 20, 8, 9)]
    assert [e.m_lost for e in steady_epochs(ep)] == [20, 20, 20]
    # drain = 20 * 1/2 + 1/2 = 10.5 -> 11
    assert estimate_lower_limit(ep, 20e6, 10e6, 50, 1500) == 39


def test_lower_limit_needs_steady_epoch():
    with pytest.raises(NoEstimateError):
        estimate_lower_limit([LossEpoch(10, 5, 0, 1)], 20e6, 10e6, 50, 1500)


def test_classic_droptail_ll_tends_to_ul():
    res, _ = run_sim(40, 40, 10e6, 15e6, 800)
    est = analyze_remote(res.dest_capture)
    assert {e.m_lost for e in est.epochs} == {1}
    assert est.ll_pkts == est.ul_pkts


def test_analyze_no_overflow():
    res, _ = run_sim(500, 100, 10e6, 20e6, 100)
    with pytest.raises(UnderflowError, match="no overflow observed"):
        analyze_remote(res.dest_capture)


def test_ethernet_monotone_accuracy():
    errs = []
    for r_in in (20e6, 30e6, 40e6):
        res, _ = run_sim(115, 85, 10e6, r_in, 2000)
        est = analyze_remote(res.dest_capture)
        errs.append((error_percent(est.ll_pkts, 85), error_percent(est.ul_pkts, 115)))
    assert all(b[0] <= a[0] and b[1] <= a[1] for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("mbps", [1, 2, 5.5, 11, 24, 54])
def test_wifi_oracle_equivalence(mbps):
    res, _ = run_sim(55, 30, mbps * 1e6, 2 * mbps * 1e6, 1200)
    est = analyze_remote(res.dest_capture)
    assert abs(est.ul_pkts - 55) / 55 <= 0.05
    assert abs(est.ll_pkts - 30) / 30 <= 0.07
    assert est.r_in_bps > est.r_out_bps > 0
    assert est.ll_pkts <= est.ul_pkts


@settings(max_examples=40, deadline=None)
@given(ul=st.integers(5, 150), ll_frac=st.floats(0.4, 1.0), ratio=st.floats(2.0, 5.0),
       r_out=st.sampled_from([2e6, 10e6, 54e6]))
def test_remote_property_constant_rates(ul, ll_frac, ratio, r_out):
    ll = max(1, round(ul * ll_frac))
    res, _ = run_sim(ul, ll, r_out, r_out * ratio, 10 * ul + 200)
    est = analyze_remote(res.dest_capture)
    # Never more than one packet off, whatever the buffer size.
    assert abs(est.ul_pkts - ul) <= 1 and abs(est.ll_pkts - ll) <= 1
    # Relative bounds, where a single packet fits inside them.
    if ul >= 20:
        assert abs(est.ul_pkts - ul) / ul <= 0.05
    if ll >= 15:
        assert abs(est.ll_pkts - ll) / ll <= 0.07
    assert est.r_in_bps == pytest.approx(r_out * ratio, rel=0.02)
