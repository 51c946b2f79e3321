import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psndyn.tcp import DutyGate, Retransmit, SendData, SetTimer, TcpConn, duty_active, sample_cwnd


def _fill(conn, now=0):
    return conn.send(now)


def test_slow_start_four_acks():
    c = TcpConn(cwnd=4, ssthresh=64)
    assert _fill(c)[0] == SendData(4)
    for seq in range(4):
        c.on_ack(seq, 1000)
    assert c.cwnd == 8
    assert c.mode == "SlowStart"


def test_slow_start_doubles_each_round_trip():
    c = TcpConn(cwnd=1, ssthresh=64)
    seen = []
    now = 0
    for _ in range(6):
        seen.append(c.cwnd)
        first = c.highest_acked + 1
        (sent,) = [a for a in c.send(now) if isinstance(a, SendData)]
        now += 50_000
        for seq in range(first, first + sent.count):
            c.on_ack(seq, now)
    assert seen == [1, 2, 4, 8, 16, 32]


def test_congestion_avoidance_additive():
    c = TcpConn(cwnd=10, ssthresh=10)
    assert c.mode == "CongestionAvoidance"
    c.send(0)
    for seq in range(10):
        c.on_ack(seq, 1000)
    assert c.cwnd == pytest.approx(11.0, abs=0.05)
    # the exact sum of 1/cwnd increments
    w = 10.0
    for _ in range(10):
        w += 1.0 / w
    assert c.cwnd == pytest.approx(w, abs=1e-9)


def _enter_recovery(cwnd):
    c = TcpConn(cwnd=cwnd, ssthresh=64)
    c.send(0)
    for _ in range(2):
        assert c.on_ack(-1, 10) == []
    return c, c.on_ack(-1, 10)


def test_third_dup_ack_halves_and_retransmits():
    c, actions = _enter_recovery(10)
    assert actions[0] == Retransmit(0)
    assert (c.ssthresh, c.cwnd, c.mode, c.recover) == (5, 5, "FastRecovery", 9)
    assert c.effective_window == 8  # +3 inflation, not in the traced cwnd


def test_full_ack_leaves_recovery():
    c, _ = _enter_recovery(21)
    assert c.recover == 20
    c.on_ack(20, 500)
    assert c.mode == "CongestionAvoidance"
    assert c.cwnd == c.ssthresh == 10


def test_partial_ack_retransmits_next_hole():
    c, _ = _enter_recovery(21)
    actions = c.on_ack(5, 500)
    assert actions[0] == Retransmit(6)
    assert c.mode == "FastRecovery"
    assert isinstance(actions[-1], SetTimer)


def test_extra_dup_acks_inflate():
    c, _ = _enter_recovery(10)
    c.on_ack(-1, 20)
    assert c.effective_window == 9 and c.cwnd == 5


@pytest.mark.parametrize("cwnd,ssthresh", [(10, 5), (3, 2), (7, 3), (2, 2), (1, 2)])
def test_halving_rule(cwnd, ssthresh):
    c = TcpConn(cwnd=cwnd, ssthresh=64)
    c.send(0)
    c.on_triple_dup_ack(0)
    assert c.ssthresh == ssthresh and c.cwnd == ssthresh


@pytest.mark.parametrize("cwnd,ssthresh", [(8, 4), (1, 2)])
def test_timeout_resets(cwnd, ssthresh):
    c = TcpConn(cwnd=cwnd, ssthresh=64)
    c.send(0)
    actions = c.on_timeout(1_000_000)
    assert actions[0] == Retransmit(0)
    assert (c.cwnd, c.ssthresh, c.mode, c.dup_acks) == (1, ssthresh, "SlowStart", 0)


def test_timeout_backoff_caps():
    c = TcpConn(cwnd=4, rto=1.0, max_rto=64.0)
    c.send(0)
    rtos = []
    for i in range(9):
        c.on_timeout(i)
        rtos.append(c.rto)
    assert rtos == [2, 4, 8, 16, 32, 64, 64, 64, 64]
    assert c.timer_deadline == 8 + 64_000_000


def test_rtt_sample_sets_rto_with_floor():
    c = TcpConn(cwnd=1)
    c.send(0)
    c.on_ack(0, 30_000)  # 30 ms sample: srtt + 4 rttvar = 90 ms, floored
    assert c.rto == pytest.approx(0.2)


def test_karn_rule_skips_retransmitted_samples():
    c = TcpConn(cwnd=1, rto=1.0)
    c.send(0)
    c.on_timeout(1_000_000)
    c.on_ack(0, 1_010_000)
    assert c.rto == 2.0


@pytest.mark.parametrize("cwnd,inflight,avail", [(10, 7, 3), (5.9, 5, 0), (1, 0, 1)])
def test_window_available(cwnd, inflight, avail):
    c = TcpConn(cwnd=cwnd)
    c.send(0, inflight)
    assert len(c.in_flight) == inflight
    assert c.window_available() == avail


def test_stale_ack_ignored():
    c = TcpConn(cwnd=4)
    c.send(0)
    c.on_ack(2, 10)
    before = (c.cwnd, c.highest_acked, c.dup_acks)
    assert c.on_ack(0, 20) == []
    assert (c.cwnd, c.highest_acked, c.dup_acks) == before


def test_duty_gate():
    assert all(duty_active(DutyGate(1.0), t) for t in (0, 0.3, 0.999, 7.5))
    assert not any(duty_active(DutyGate(0.0), t) for t in (0, 0.3, 0.999, 7.5))
    g = DutyGate(0.5)
    assert duty_active(g, 0.25) and not duty_active(g, 0.75)
    assert duty_active(DutyGate(0.5, phase=0.5), 0.75)
    with pytest.raises(ValueError):
        DutyGate(1.5)


def test_sample_cwnd_constant_flow():
    c = TcpConn(flow_id=3)
    trace = []
    for k in range(100):
        sample_cwnd(c, k * 0.01, trace)
    assert len(trace) == 100
    assert {r.cwnd for r in trace} == {1.0}
    assert trace[5].time_s == pytest.approx(0.05) and trace[0].flow == 3


# random interleavings of protocol events
_ops = st.lists(
    st.one_of(
        st.tuples(st.just("send"), st.integers(0, 20)),
        st.tuples(st.just("ack"), st.integers(0, 30)),
        st.tuples(st.just("dup"), st.just(0)),
        st.tuples(st.just("timeout"), st.just(0)),
    ),
    max_size=120,
)


@settings(max_examples=300, deadline=None)
@given(st.floats(1, 80), st.floats(2, 80), _ops)
def test_floors_hold_under_any_sequence(cwnd, ssthresh, ops):
    c = TcpConn(cwnd=cwnd, ssthresh=ssthresh, max_cwnd=200)
    now = 0
    for op, arg in ops:
        now += 1000
        outstanding = len(c.in_flight)
        if op == "send":
            c.send(now, arg)
        elif op == "ack" and outstanding:
            c.on_ack(c.highest_acked + 1 + arg % outstanding, now)
        elif op == "dup" and outstanding:
            c.on_ack(c.highest_acked, now)
        elif op == "timeout" and outstanding:
            c.on_timeout(now)
        assert c.cwnd >= 1.0
        assert c.ssthresh >= 2.0
        assert c.effective_window >= 1.0
        assert c.window_available() >= 0


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.integers(2, 60), st.integers(0, 40))
def test_slow_start_linear_in_acks(cwnd0, ssthresh, k):
    c = TcpConn(cwnd=cwnd0, ssthresh=ssthresh, max_cwnd=500)
    acked = 0
    while acked < k:
        c.send(0)
        if c.mode != "SlowStart":
            break
        c.on_ack(c.highest_acked + 1, 1)
        acked += 1
        if c.mode == "SlowStart":
            assert c.cwnd == cwnd0 + acked < ssthresh
        else:
            assert c.cwnd >= ssthresh and c.cwnd == cwnd0 + acked
            break


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 500))
def test_halving_exact(cwnd):
    c = TcpConn(cwnd=cwnd, ssthresh=1000, max_cwnd=500)
    c.send(0, 1)
    c.on_triple_dup_ack(0)
    assert c.cwnd == max(math.floor(cwnd / 2), 2)
