"""Compiled simulation loop for a line of store-and-forward nodes.

Each hop is a single PacketArrival event: when a link admits a packet its
service end follows from the link's FIFO state, so no separate
transmit-complete event is needed. Sources are gated either by a duty cycle
(with a fixed application packet rate, or greedy) or by an explicit list of
burst windows.
"""

from __future__ import annotations

import numpy as np

from . import tcp
from ._jit import njit
from .simcore import (
    EV_AUX, EV_FLOW, EV_KIND, EV_NODE, EV_PID, EV_PKIND, EV_SEQ, EV_T, INF_TIME, K_APP, K_ARRIVE,
    K_GATE_OFF, K_GATE_ON, K_TIMER, M_NFREE, M_NOW, M_SIZE, PKT_ACK, PKT_DATA, SchedulingInPast,
    heap_grow, heap_peek_time, heap_pop, heap_push, link_admit, new_heap,
)
from .tcp import (
    F_CWND, I_HOST_BUSY, I_ACK_DROPS, I_BACKLOG, I_DATA_DROPS, I_DELIVERED, I_DIR, I_DST, I_GREEDY,
    I_HIGHEST_ACKED, I_MAX_SENT, I_OFFERED, I_RCV_NEXT, I_RETX, I_SENT, I_SND_NXT, I_SRC,
    I_TIMER_DEADLINE, I_TIMER_EVT, RING, STALE,
)

GATE_APP = 0
GATE_GREEDY = 1
GATE_WINDOWS = 2
GATE_OFF = 3

# global counters
G_PID = 0
G_INJECTED = 1
G_DELIVERED = 2
G_DROPPED = 3
G_IN_NETWORK = 4
G_NEXT_SAMPLE = 5
G_NLOG = 6
G_EVENTS = 7
G_RNG = 8
G_NFIELDS = 9

LOG_SEND = 0
LOG_RECV = 1
LOG_DROP = 2
LOG_RETX = 3
LOG_NAMES = ("send", "recv", "drop", "retransmit")
LOG_T, LOG_KIND, LOG_FLOW, LOG_NODE, LOG_SEQ, LOG_AUX = range(6)

MARGIN = 2 * RING + 64


@njit
def _rand_below(g, n):
    # Park-Miller minimal standard LCG; products stay below 2**47 so the
    # compiled and interpreted paths agree bit for bit
    x = (g[G_RNG] * 48271) % 2147483647
    g[G_RNG] = x
    return x % n


@njit
def _link_id(node, direction, n_nodes):
    if direction > 0:
        return node
    return n_nodes - 1 + node - 1


@njit
def _log(log, g, t, kind, flow, node, seq, aux):
    n = g[G_NLOG]
    log[n, 0] = t
    log[n, 1] = kind
    log[n, 2] = flow
    log[n, 3] = node
    log[n, 4] = seq
    log[n, 5] = aux
    g[G_NLOG] = n + 1


@njit
def _forward(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes, prop_us, ser_us,
             f, node, direction, pkind, seq, created, pid, now, ist):
    link = _link_id(node, direction, n_nodes)
    end = link_admit(dep, head, count, busy, link, qcap, now, ser_us)
    if end < 0:
        g[G_DROPPED] += 1
        if pkind == PKT_DATA:
            ist[f, I_DATA_DROPS] += 1
            if rec:
                _log(log, g, now, LOG_DROP, f, node, seq, created)
        else:
            ist[f, I_ACK_DROPS] += 1
        return
    heap_push(ev, heap, free, meta, end + prop_us, K_ARRIVE, f, node + direction, seq, pkind, created, pid)
    g[G_IN_NETWORK] += 1


@njit
def _schedule_timer(ev, heap, free, meta, ist, f, deadline):
    cur = ist[f, I_TIMER_EVT]
    if cur < 0 or cur > deadline:
        heap_push(ev, heap, free, meta, deadline, K_TIMER, f, 0, 0, 0, deadline, 0)
        ist[f, I_TIMER_EVT] = deadline


@njit
def _arm_timer(ev, heap, free, meta, fs, ist, f, now, restart):
    if ist[f, I_SND_NXT] - 1 <= ist[f, I_HIGHEST_ACKED]:
        ist[f, I_TIMER_DEADLINE] = -1
        return
    if restart or ist[f, I_TIMER_DEADLINE] < 0:
        d = now + tcp.rto_us(fs, f)
        ist[f, I_TIMER_DEADLINE] = d
        _schedule_timer(ev, heap, free, meta, ist, f, d)


@njit
def _transmit(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes, prop_us, ser_data,
              access_us, jitter_us, fs, ist, send_t, retx_mark, f, seq, now):
    slot = seq % RING
    retx = seq <= ist[f, I_MAX_SENT]
    send_t[f, slot] = now
    if retx:
        retx_mark[f, slot] = 1
        ist[f, I_RETX] += 1
    else:
        retx_mark[f, slot] = 0
        ist[f, I_MAX_SENT] = seq
    ist[f, I_SENT] += 1
    src = ist[f, I_SRC]
    if rec:
        _log(log, g, now, LOG_RETX if retx else LOG_SEND, f, src, seq, now)
    g[G_INJECTED] += 1
    pid = g[G_PID]
    g[G_PID] = pid + 1
    if access_us > 0 or jitter_us > 0:
        # sender-side processing jitter, then the NIC paces packets onto the first hop
        start = ist[f, I_HOST_BUSY]
        if start < now:
            start = now
        if jitter_us > 0:
            start += _rand_below(g, jitter_us)
        ist[f, I_HOST_BUSY] = start + access_us
        heap_push(ev, heap, free, meta, start + access_us, K_ARRIVE, f, src, seq, PKT_DATA, now, pid)
        g[G_IN_NETWORK] += 1
        return
    _forward(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes, prop_us, ser_data,
             f, src, ist[f, I_DIR], PKT_DATA, seq, now, pid, now, ist)


@njit
def _try_send(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes, prop_us, ser_data,
              access_us, jitter_us, fs, ist, send_t, retx_mark, f, now):
    sent_any = False
    while tcp.window_available(fs, ist, f) > 0:
        seq = ist[f, I_SND_NXT]
        if seq <= ist[f, I_MAX_SENT]:
            pass
        elif ist[f, I_BACKLOG] > 0:
            ist[f, I_BACKLOG] -= 1
        elif ist[f, I_GREEDY] == 0:
            break
        _transmit(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes, prop_us,
                  ser_data, access_us, jitter_us, fs, ist, send_t, retx_mark, f, seq, now)
        ist[f, I_SND_NXT] = seq + 1
        sent_any = True
    if sent_any:
        _arm_timer(ev, heap, free, meta, fs, ist, f, now, False)


@njit
def _grow_log(log):
    out = np.zeros((log.shape[0] * 2, log.shape[1]), dtype=np.int64)
    out[: log.shape[0]] = log
    return out


@njit
def simulate(t_end, ev, heap, free, meta, g, log, rec, audit, do_audit,
             n_nodes, qcap, prop_us, ser_data, ser_ack, access_us, jitter_us, dep, head, count, busy,
             fs, ist, send_t, retx_mark, rcv_buf,
             gate_kind, on_us, period_us, phase_us, app_int_us, win_starts, win_len_us,
             cw, n_main, sample_us, n_samples):
    """Process every event with timestamp <= ``t_end``.

    cwnd of the first ``n_main`` flows is sampled at k * sample_us, after all
    events at that instant. Returns the possibly reallocated heap and log
    arrays.
    """
    while True:
        t_ev = heap_peek_time(ev, heap, meta)
        k = g[G_NEXT_SAMPLE]
        t_s = INF_TIME
        if k < n_samples:
            t_s = k * sample_us
        if t_s <= t_end and t_s < t_ev:
            for f in range(n_main):
                cw[k, f] = fs[f, F_CWND]
            if do_audit:
                in_heap = 0
                for i in range(meta[M_SIZE]):
                    if ev[heap[i], EV_KIND] == K_ARRIVE:
                        in_heap += 1
                audit[k, 0] = g[G_INJECTED]
                audit[k, 1] = g[G_DELIVERED]
                audit[k, 2] = g[G_DROPPED]
                audit[k, 3] = in_heap
            g[G_NEXT_SAMPLE] = k + 1
            continue
        if t_ev > t_end:
            break

        if meta[M_NFREE] < MARGIN:
            ev, heap, free = heap_grow(ev, heap, free, meta)
        if rec and log.shape[0] - g[G_NLOG] < MARGIN:
            log = _grow_log(log)

        slot = heap_pop(ev, heap, free, meta)
        now = ev[slot, EV_T]
        kind = ev[slot, EV_KIND]
        f = ev[slot, EV_FLOW]
        node = ev[slot, EV_NODE]
        seq = ev[slot, EV_SEQ]
        pkind = ev[slot, EV_PKIND]
        aux = ev[slot, EV_AUX]
        pid = ev[slot, EV_PID]
        g[G_EVENTS] += 1

        if kind == K_ARRIVE:
            g[G_IN_NETWORK] -= 1
            direction = ist[f, I_DIR]
            if pkind == PKT_DATA:
                if node != ist[f, I_DST]:
                    _forward(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                             prop_us, ser_data, f, node, direction, PKT_DATA, seq, aux, pid, now, ist)
                    continue
                g[G_DELIVERED] += 1
                ist[f, I_DELIVERED] += 1
                if rec:
                    _log(log, g, now, LOG_RECV, f, node, seq, aux)
                nxt = ist[f, I_RCV_NEXT]
                if seq == nxt:
                    nxt += 1
                    while rcv_buf[f, nxt % RING] != 0:
                        rcv_buf[f, nxt % RING] = 0
                        nxt += 1
                    ist[f, I_RCV_NEXT] = nxt
                elif seq > nxt:
                    rcv_buf[f, seq % RING] = 1
                g[G_INJECTED] += 1
                apid = g[G_PID]
                g[G_PID] = apid + 1
                _forward(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                         prop_us, ser_ack, f, node, -direction, PKT_ACK, nxt - 1, now, apid, now, ist)
            else:
                if node != ist[f, I_SRC]:
                    _forward(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                             prop_us, ser_ack, f, node, -direction, PKT_ACK, seq, aux, pid, now, ist)
                    continue
                g[G_DELIVERED] += 1
                before = ist[f, I_HIGHEST_ACKED]
                r = tcp.on_ack(fs, ist, send_t, retx_mark, f, seq, now)
                if r == STALE:
                    continue
                if r >= 0:
                    _transmit(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                              prop_us, ser_data, access_us, jitter_us, fs, ist, send_t, retx_mark, f, r, now)
                _arm_timer(ev, heap, free, meta, fs, ist, f, now, ist[f, I_HIGHEST_ACKED] != before)
                _try_send(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                          prop_us, ser_data, access_us, jitter_us, fs, ist, send_t, retx_mark, f, now)

        elif kind == K_TIMER:
            if now != ist[f, I_TIMER_EVT]:
                continue
            ist[f, I_TIMER_EVT] = -1
            d = ist[f, I_TIMER_DEADLINE]
            if d < 0:
                continue
            if d > now:
                _schedule_timer(ev, heap, free, meta, ist, f, d)
                continue
            if ist[f, I_SND_NXT] - 1 <= ist[f, I_HIGHEST_ACKED]:
                ist[f, I_TIMER_DEADLINE] = -1
                continue
            r = tcp.on_timeout(fs, ist, f)
            _transmit(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                      prop_us, ser_data, access_us, jitter_us, fs, ist, send_t, retx_mark, f, r, now)
            ist[f, I_SND_NXT] = r + 1
            _arm_timer(ev, heap, free, meta, fs, ist, f, now, True)

        elif kind == K_APP:
            ist[f, I_BACKLOG] += 1
            ist[f, I_OFFERED] += 1
            _try_send(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                      prop_us, ser_data, access_us, jitter_us, fs, ist, send_t, retx_mark, f, now)
            j = seq + 1
            if j * app_int_us[f] < on_us[f]:
                heap_push(ev, heap, free, meta, aux + j * app_int_us[f], K_APP, f, 0, j, 0, aux, 0)
            else:
                nxt_cycle = aux + period_us[f]
                heap_push(ev, heap, free, meta, nxt_cycle, K_APP, f, 0, 0, 0, nxt_cycle, 0)

        elif kind == K_GATE_ON:
            ist[f, I_GREEDY] = 1
            _try_send(ev, heap, free, meta, g, log, rec, dep, head, count, busy, qcap, n_nodes,
                      prop_us, ser_data, access_us, jitter_us, fs, ist, send_t, retx_mark, f, now)
            if gate_kind[f] == GATE_WINDOWS:
                heap_push(ev, heap, free, meta, win_starts[seq] + win_len_us, K_GATE_OFF, f, 0, seq, 0, aux, 0)
            elif on_us[f] < period_us[f]:
                heap_push(ev, heap, free, meta, aux + on_us[f], K_GATE_OFF, f, 0, seq, 0, aux, 0)

        elif kind == K_GATE_OFF:
            ist[f, I_GREEDY] = 0
            if gate_kind[f] == GATE_WINDOWS:
                if seq + 1 < win_starts.shape[0]:
                    heap_push(ev, heap, free, meta, win_starts[seq + 1], K_GATE_ON, f, 0, seq + 1, 0, 0, 0)
            else:
                nxt_cycle = aux + period_us[f]
                heap_push(ev, heap, free, meta, nxt_cycle, K_GATE_ON, f, 0, 0, 0, nxt_cycle, 0)

    if meta[M_NOW] < t_end:
        meta[M_NOW] = t_end
    return ev, heap, free, log


def _seed_state(seed):
    return int(seed) % 2147483646 + 1


class Simulator:
    """Line network of ``n_nodes`` with one TCP flow per (src, dst) pair.

    ``gates`` holds one ``(kind, on_us, period_us, phase_us, app_interval_us)``
    tuple per flow. Only the first ``n_main`` flows are sampled into the cwnd
    trace. Times are integer microseconds.
    """

    def __init__(self, n_nodes, flows, gates, *, queue_capacity=50, prop_us=10_000, ser_data_us=8_000,
                 ser_ack_us=320, access_us=0, jitter_us=0, seed=0, init_cwnd=1.0, init_ssthresh=64.0, rto_init=1.0, min_rto=0.2,
                 max_rto=64.0, max_cwnd=float(RING // 2 - 8), n_main=None, sample_us=10_000,
                 horizon_us=0, window_starts_us=(), window_len_us=0, record_events=True, audit=False):
        if n_nodes < 2:
            raise ValueError("need at least two nodes")
        if queue_capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        if not 1.0 <= max_cwnd <= RING // 2 - 8:
            raise ValueError(f"max_cwnd must lie in [1, {RING // 2 - 8}]")
        nf = len(flows)
        self.n_nodes = n_nodes
        self.n_flows = nf
        self.n_main = nf if n_main is None else n_main
        self.qcap = int(queue_capacity)
        self.prop_us = int(prop_us)
        self.ser_data = int(ser_data_us)
        self.ser_ack = int(ser_ack_us)
        self.access_us = int(access_us)
        self.jitter_us = int(jitter_us)
        self.sample_us = int(sample_us)
        self.n_samples = int(horizon_us // sample_us) if sample_us > 0 else 0
        self.record_events = bool(record_events)
        self.do_audit = bool(audit)

        self.ev, self.heap, self.free, self.meta = new_heap(4 * MARGIN)
        self.g = np.zeros(G_NFIELDS, dtype=np.int64)
        self.g[G_RNG] = _seed_state(seed)
        self.log = np.zeros((4 * MARGIN if record_events else 1, 6), dtype=np.int64)
        self.audit = np.zeros((self.n_samples if audit else 0, 4), dtype=np.int64)
        nl = 2 * (n_nodes - 1)
        self.dep = np.zeros((nl, self.qcap), dtype=np.int64)
        self.head = np.zeros(nl, dtype=np.int64)
        self.count = np.zeros(nl, dtype=np.int64)
        self.busy = np.zeros(nl, dtype=np.int64)
        self.fs, self.ist, self.send_t, self.retx_mark, self.rcv_buf = tcp.new_state(
            nf, init_cwnd, init_ssthresh, rto_init, min_rto, max_rto, max_cwnd)
        self.cw = np.zeros((self.n_samples, self.n_main), dtype=np.float64)

        gk = np.full(nf, GATE_OFF, dtype=np.int64)
        self.on_us = np.zeros(nf, dtype=np.int64)
        self.period_us = np.ones(nf, dtype=np.int64)
        self.phase_us = np.zeros(nf, dtype=np.int64)
        self.app_int_us = np.zeros(nf, dtype=np.int64)
        self.win_starts = np.asarray(window_starts_us, dtype=np.int64).reshape(-1)
        self.win_len_us = int(window_len_us)
        for f, ((src, dst), gate) in enumerate(zip(flows, gates)):
            if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
                raise ValueError(f"flow {f} endpoints outside the line")
            self.ist[f, I_SRC] = src
            self.ist[f, I_DST] = dst
            self.ist[f, I_DIR] = 1 if dst > src else -1
            kind, on, period, phase, app_int = gate
            if src == dst:
                kind = GATE_OFF
            gk[f] = kind
            self.on_us[f] = on
            self.period_us[f] = max(int(period), 1)
            self.phase_us[f] = phase
            self.app_int_us[f] = app_int
            self._seed_gate(f, kind, on, phase, app_int)
        self.gate_kind = gk

    def _push(self, t, kind, f, seq=0, aux=0):
        heap_push(self.ev, self.heap, self.free, self.meta, int(t), kind, f, 0, seq, 0, int(aux), 0)

    def _seed_gate(self, f, kind, on, phase, app_int):
        if kind == GATE_APP and on > 0:
            if app_int <= 0:
                raise ValueError("application interval must be positive")
            self._push(phase, K_APP, f, 0, phase)
        elif kind == GATE_GREEDY and on > 0:
            self._push(phase, K_GATE_ON, f, 0, phase)
        elif kind == GATE_WINDOWS and self.win_starts.size:
            self._push(self.win_starts[0], K_GATE_ON, f, 0, 0)

    @property
    def now(self) -> int:
        return int(self.meta[M_NOW])

    def run_until(self, t_end_us: int) -> "Simulator":
        t_end_us = int(t_end_us)
        if t_end_us < self.now:
            raise SchedulingInPast(f"cannot run back to {t_end_us} us from {self.now} us")
        self.ev, self.heap, self.free, self.log = simulate(
            t_end_us, self.ev, self.heap, self.free, self.meta, self.g, self.log, self.record_events,
            self.audit, self.do_audit, self.n_nodes, self.qcap, self.prop_us, self.ser_data, self.ser_ack,
            self.access_us, self.jitter_us, self.dep, self.head, self.count, self.busy, self.fs, self.ist, self.send_t, self.retx_mark,
            self.rcv_buf, self.gate_kind, self.on_us, self.period_us, self.phase_us, self.app_int_us,
            self.win_starts, self.win_len_us, self.cw, self.n_main, self.sample_us, self.n_samples)
        return self

    # results
    @property
    def events(self) -> np.ndarray:
        """Logged events as rows (t_us, kind, flow, node, seq, created_us)."""
        return self.log[: self.g[G_NLOG]]

    @property
    def samples_taken(self) -> int:
        return int(self.g[G_NEXT_SAMPLE])

    def counter(self, field: int) -> np.ndarray:
        return self.ist[:, field].copy()

    @property
    def totals(self) -> dict:
        return {
            "injected": int(self.g[G_INJECTED]),
            "delivered": int(self.g[G_DELIVERED]),
            "dropped": int(self.g[G_DROPPED]),
            "in_network": int(self.g[G_IN_NETWORK]),
            "events": int(self.g[G_EVENTS]),
        }

    def flow_counters(self) -> dict:
        return {
            "sent": self.counter(I_SENT),
            "retransmits": self.counter(I_RETX),
            "dropped": self.counter(I_DATA_DROPS),
            "ack_dropped": self.counter(I_ACK_DROPS),
            "delivered": self.counter(I_DELIVERED),
            "goodput": self.counter(I_RCV_NEXT),
            "offered": self.counter(I_OFFERED),
            "timeouts": self.counter(tcp.I_TIMEOUTS),
            "fast_retransmits": self.counter(tcp.I_FAST_RETX),
        }
