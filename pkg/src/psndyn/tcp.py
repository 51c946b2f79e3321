"""TCP NewReno congestion control and the duty-cycled traffic gate.

Per-flow state lives in two array rows (float and int fields) so that the
same transition functions drive the compiled simulator and the standalone
:class:`TcpConn` used by unit and property tests. Sequence numbers count
packets; an ACK carries the highest in-order sequence the receiver holds
(-1 before anything arrives).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .simcore import US_PER_S, to_us

SLOW_START = 0
CONGESTION_AVOIDANCE = 1
FAST_RECOVERY = 2
MODE_NAMES = ("SlowStart", "CongestionAvoidance", "FastRecovery")

# float fields
F_CWND = 0
F_SSTHRESH = 1
F_INFLATE = 2  # fast-recovery window inflation, kept apart from the traced cwnd
F_SRTT = 3
F_RTTVAR = 4
F_RTO = 5
F_MAX_CWND = 6
F_MIN_RTO = 7
F_MAX_RTO = 8
F_NFIELDS = 9

# int fields
I_MODE = 0
I_DUPACKS = 1
I_HIGHEST_ACKED = 2
I_SND_NXT = 3
I_MAX_SENT = 4
I_RECOVER = 5
I_TIMER_DEADLINE = 6  # us, -1 when stopped
I_TIMER_EVT = 7  # time of the live timer event, -1 if none
I_HAS_RTT = 8
I_BACKLOG = 9
I_GREEDY = 10
I_SENT = 11  # every DATA transmission, retransmissions included
I_RETX = 12
I_DATA_DROPS = 13
I_ACK_DROPS = 14
I_TIMEOUTS = 15
I_FAST_RETX = 16
I_RCV_NEXT = 17  # receiver side: next in-order seq expected
I_DELIVERED = 18  # DATA arrivals at the receiver, duplicates included
I_ACKS = 19
I_SRC = 20
I_DST = 21
I_DIR = 22
I_OFFERED = 23
I_HOST_BUSY = 24  # end of the sender NIC's current serialization
I_NFIELDS = 25

RING = 1024  # per-flow sequence ring; every window stays well inside it

STALE = -2
NO_RETX = -1


def new_state(n_flows, init_cwnd=1.0, init_ssthresh=64.0, rto_init=1.0, min_rto=0.2, max_rto=64.0,
              max_cwnd=float(RING // 2 - 8)):
    fs = np.zeros((n_flows, F_NFIELDS), dtype=np.float64)
    ist = np.zeros((n_flows, I_NFIELDS), dtype=np.int64)
    fs[:, F_CWND] = init_cwnd
    fs[:, F_SSTHRESH] = init_ssthresh
    fs[:, F_RTO] = rto_init
    fs[:, F_MIN_RTO] = min_rto
    fs[:, F_MAX_RTO] = max_rto
    fs[:, F_MAX_CWND] = max_cwnd
    ist[:, I_MODE] = SLOW_START if init_cwnd < init_ssthresh else CONGESTION_AVOIDANCE
    ist[:, I_HIGHEST_ACKED] = -1
    ist[:, I_MAX_SENT] = -1
    ist[:, I_RECOVER] = -1
    ist[:, I_TIMER_DEADLINE] = -1
    ist[:, I_TIMER_EVT] = -1
    send_t = np.full((n_flows, RING), -1, dtype=np.int64)
    retx_mark = np.zeros((n_flows, RING), dtype=np.int8)
    rcv_buf = np.zeros((n_flows, RING), dtype=np.int8)
    return fs, ist, send_t, retx_mark, rcv_buf


@njit
def window_available(fs, ist, f):
    wnd = math.floor(fs[f, F_CWND] + fs[f, F_INFLATE])
    in_flight = ist[f, I_SND_NXT] - 1 - ist[f, I_HIGHEST_ACKED]
    avail = wnd - in_flight
    if avail < 0:
        return 0
    return avail


@njit
def rtt_sample(fs, ist, f, r):
    """Jacobson/Karels update; clears any timeout backoff."""
    if ist[f, I_HAS_RTT] == 0:
        fs[f, F_SRTT] = r
        fs[f, F_RTTVAR] = r / 2.0
        ist[f, I_HAS_RTT] = 1
    else:
        fs[f, F_RTTVAR] = 0.75 * fs[f, F_RTTVAR] + 0.25 * abs(fs[f, F_SRTT] - r)
        fs[f, F_SRTT] = 0.875 * fs[f, F_SRTT] + 0.125 * r
    rto = fs[f, F_SRTT] + 4.0 * fs[f, F_RTTVAR]
    if rto < fs[f, F_MIN_RTO]:
        rto = fs[f, F_MIN_RTO]
    if rto > fs[f, F_MAX_RTO]:
        rto = fs[f, F_MAX_RTO]
    fs[f, F_RTO] = rto


@njit
def halve_ssthresh(cwnd):
    s = math.floor(cwnd / 2.0)
    if s < 2.0:
        s = 2.0
    return s


@njit
def on_triple_dup_ack(fs, ist, f):
    """Enter fast recovery; returns the sequence to retransmit."""
    s = halve_ssthresh(fs[f, F_CWND])
    fs[f, F_SSTHRESH] = s
    fs[f, F_CWND] = s
    fs[f, F_INFLATE] = 3.0
    ist[f, I_MODE] = FAST_RECOVERY
    ist[f, I_RECOVER] = ist[f, I_MAX_SENT]
    ist[f, I_FAST_RETX] += 1
    return ist[f, I_HIGHEST_ACKED] + 1


@njit
def on_timeout(fs, ist, f):
    """Retransmission timeout; returns the sequence to retransmit."""
    fs[f, F_SSTHRESH] = halve_ssthresh(fs[f, F_CWND])
    fs[f, F_CWND] = 1.0
    fs[f, F_INFLATE] = 0.0
    ist[f, I_MODE] = SLOW_START
    ist[f, I_DUPACKS] = 0
    rto = 2.0 * fs[f, F_RTO]
    if rto > fs[f, F_MAX_RTO]:
        rto = fs[f, F_MAX_RTO]
    fs[f, F_RTO] = rto
    ist[f, I_RECOVER] = ist[f, I_MAX_SENT]
    ist[f, I_TIMEOUTS] += 1
    # go-back-N from the first unacknowledged packet
    ist[f, I_SND_NXT] = ist[f, I_HIGHEST_ACKED] + 1
    return ist[f, I_HIGHEST_ACKED] + 1


@njit
def on_ack(fs, ist, send_t, retx_mark, f, ack_seq, now):
    """Process one cumulative ACK.

    Returns a sequence number to retransmit, NO_RETX, or STALE.
    """
    ha = ist[f, I_HIGHEST_ACKED]
    ist[f, I_ACKS] += 1
    if ack_seq < ha:
        return STALE
    if ack_seq == ha:
        if ist[f, I_SND_NXT] - 1 > ha:
            ist[f, I_DUPACKS] += 1
            if ist[f, I_MODE] == FAST_RECOVERY:
                fs[f, F_INFLATE] += 1.0
            elif ist[f, I_DUPACKS] == 3 and ack_seq >= ist[f, I_RECOVER]:
                return on_triple_dup_ack(fs, ist, f)
        return NO_RETX

    newly = ack_seq - ha
    ist[f, I_HIGHEST_ACKED] = ack_seq
    if ist[f, I_SND_NXT] <= ack_seq:
        ist[f, I_SND_NXT] = ack_seq + 1
    slot = ack_seq % RING
    if retx_mark[f, slot] == 0 and send_t[f, slot] >= 0:
        rtt_sample(fs, ist, f, (now - send_t[f, slot]) / US_PER_S)

    if ist[f, I_MODE] == FAST_RECOVERY:
        if ack_seq >= ist[f, I_RECOVER]:
            ist[f, I_MODE] = CONGESTION_AVOIDANCE
            fs[f, F_CWND] = fs[f, F_SSTHRESH]
            fs[f, F_INFLATE] = 0.0
            ist[f, I_DUPACKS] = 0
            return NO_RETX
        # partial ACK: deflate by the newly acked amount, add one back
        fs[f, F_INFLATE] += 1.0 - newly
        if fs[f, F_CWND] + fs[f, F_INFLATE] < 1.0:
            fs[f, F_INFLATE] = 1.0 - fs[f, F_CWND]
        return ack_seq + 1

    ist[f, I_DUPACKS] = 0
    if ist[f, I_MODE] == SLOW_START:
        fs[f, F_CWND] += 1.0
        if fs[f, F_CWND] >= fs[f, F_SSTHRESH]:
            ist[f, I_MODE] = CONGESTION_AVOIDANCE
    else:
        fs[f, F_CWND] += 1.0 / fs[f, F_CWND]
    if fs[f, F_CWND] > fs[f, F_MAX_CWND]:
        fs[f, F_CWND] = fs[f, F_MAX_CWND]
    return NO_RETX


@njit
def rto_us(fs, f):
    return np.int64(fs[f, F_RTO] * US_PER_S + 0.5)


@njit
def gate_active(now, on_us, period_us, phase_us):
    if on_us <= 0:
        return False
    if on_us >= period_us:
        return True
    return (now - phase_us) % period_us < on_us


# ---------------------------------------------------------------------------
# Python-facing wrappers


@dataclass(frozen=True)
class DutyGate:
    x: float
    period: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise ValueError(f"duty ratio must lie in [0, 1], got {self.x}")
        if self.period <= 0:
            raise ValueError("gate period must be positive")

    @property
    def on_us(self) -> int:
        return to_us(self.x * self.period)


def duty_active(gate: DutyGate, now: float) -> bool:
    """True while the source offers data, ``now`` in seconds."""
    return bool(gate_active(to_us(now), gate.on_us, to_us(gate.period), to_us(gate.phase)))


@dataclass(frozen=True)
class SendData:
    count: int


@dataclass(frozen=True)
class Retransmit:
    seq: int


@dataclass(frozen=True)
class SetTimer:
    deadline: int  # us


class TcpConn:
    """A single NewReno sender, drivable without an event loop.

    ``on_ack``/``on_triple_dup_ack``/``on_timeout`` mutate the connection and
    return the actions the sender would take. Times are integer microseconds.
    """

    def __init__(self, flow_id: int = 0, cwnd: float = 1.0, ssthresh: float = 64.0, rto: float = 1.0,
                 min_rto: float = 0.2, max_rto: float = 64.0, max_cwnd: float = float(RING // 2 - 8)):
        self.flow_id = flow_id
        self._fs, self._is, self._send_t, self._retx, _ = new_state(
            1, cwnd, ssthresh, rto, min_rto, max_rto, max_cwnd)

    # state views
    @property
    def cwnd(self) -> float:
        return float(self._fs[0, F_CWND])

    @property
    def effective_window(self) -> float:
        return float(self._fs[0, F_CWND] + self._fs[0, F_INFLATE])

    @property
    def ssthresh(self) -> float:
        return float(self._fs[0, F_SSTHRESH])

    @property
    def mode(self) -> str:
        return MODE_NAMES[int(self._is[0, I_MODE])]

    @property
    def dup_acks(self) -> int:
        return int(self._is[0, I_DUPACKS])

    @property
    def highest_acked(self) -> int:
        return int(self._is[0, I_HIGHEST_ACKED])

    @property
    def recover(self) -> int:
        return int(self._is[0, I_RECOVER])

    @property
    def rto(self) -> float:
        return float(self._fs[0, F_RTO])

    @property
    def timer_deadline(self) -> int | None:
        d = int(self._is[0, I_TIMER_DEADLINE])
        return None if d < 0 else d

    @property
    def in_flight(self) -> range:
        return range(self.highest_acked + 1, int(self._is[0, I_SND_NXT]))

    def _set(self, ifield=None, value=None, ffield=None):
        if ifield is not None:
            self._is[0, ifield] = value
        if ffield is not None:
            self._fs[0, ffield] = value

    def window_available(self) -> int:
        return int(window_available(self._fs, self._is, 0))

    def send(self, now: int, count: int | None = None) -> list:
        """Transmit up to ``count`` new packets (default: whole window)."""
        n = self.window_available() if count is None else min(count, self.window_available())
        for _ in range(n):
            seq = int(self._is[0, I_SND_NXT])
            self._transmit(seq, now)
            self._is[0, I_SND_NXT] = seq + 1
        actions: list = [SendData(n)] if n else []
        return actions + self._arm_timer(now, restart=False)

    def _transmit(self, seq: int, now: int):
        slot = seq % RING
        retx = seq <= self._is[0, I_MAX_SENT]
        self._send_t[0, slot] = now
        self._retx[0, slot] = 1 if retx else 0
        if seq > self._is[0, I_MAX_SENT]:
            self._is[0, I_MAX_SENT] = seq
        self._is[0, I_SENT] += 1

    def _arm_timer(self, now: int, restart: bool) -> list:
        outstanding = self._is[0, I_SND_NXT] - 1 > self._is[0, I_HIGHEST_ACKED]
        if not outstanding:
            self._is[0, I_TIMER_DEADLINE] = -1
            return []
        if restart or self._is[0, I_TIMER_DEADLINE] < 0:
            d = int(now) + int(rto_us(self._fs, 0))
            self._is[0, I_TIMER_DEADLINE] = d
            return [SetTimer(d)]
        return []

    def on_ack(self, ack_seq: int, now: int) -> list:
        before = self.highest_acked
        r = int(on_ack(self._fs, self._is, self._send_t, self._retx, 0, int(ack_seq), int(now)))
        actions: list = []
        if r >= 0:
            self._transmit(r, now)
            actions.append(Retransmit(r))
        actions += self._arm_timer(now, restart=self.highest_acked != before)
        return actions

    def on_triple_dup_ack(self, now: int) -> list:
        r = int(on_triple_dup_ack(self._fs, self._is, 0))
        self._transmit(r, now)
        return [Retransmit(r)] + self._arm_timer(now, restart=False)

    def on_timeout(self, now: int) -> list:
        r = int(on_timeout(self._fs, self._is, 0))
        self._transmit(r, now)
        self._is[0, I_SND_NXT] = r + 1
        return [Retransmit(r)] + self._arm_timer(now, restart=True)


@dataclass(frozen=True)
class TraceRow:
    time_s: float
    flow: int
    cwnd: float


def sample_cwnd(conn: TcpConn, now: float, trace: list | None = None) -> TraceRow:
    row = TraceRow(float(now), conn.flow_id, conn.cwnd)
    if trace is not None:
        trace.append(row)
    return row
