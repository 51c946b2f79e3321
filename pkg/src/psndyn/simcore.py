"""Discrete-event core: integer-microsecond clock, array-backed event heap,
and drop-tail FIFO links.

The heap and link kernels are shared by the compiled simulator loop and by
the small Python-facing wrappers (:class:`EventQueue`, :class:`Link`) so there
is exactly one implementation of ordering and queueing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._jit import njit

US_PER_S = 1_000_000
INF_TIME = np.iinfo(np.int64).max

# event slot fields
EV_T = 0
EV_CTR = 1
EV_KIND = 2
EV_FLOW = 3
EV_NODE = 4
EV_SEQ = 5
EV_PKIND = 6
EV_AUX = 7
EV_PID = 8
EV_NFIELDS = 9

# heap bookkeeping (meta array)
M_SIZE = 0
M_NFREE = 1
M_CTR = 2
M_NOW = 3
M_NFIELDS = 4

# event kinds
K_ARRIVE = 0  # PacketArrival
K_TIMER = 1  # TimerFire
K_APP = 2  # application offers one packet
K_GATE_ON = 3  # SourceGateToggle (on)
K_GATE_OFF = 4  # SourceGateToggle (off)

PKT_DATA = 0
PKT_ACK = 1


class SchedulingInPast(ValueError):
    pass


def to_us(seconds: float) -> int:
    """Convert seconds to integer microseconds (nearest)."""
    return int(round(float(seconds) * US_PER_S))


def to_seconds(us: int) -> float:
    return us / US_PER_S


def serialization_us(size_bytes: int, bandwidth_bps: float) -> int:
    return to_us(size_bytes * 8.0 / bandwidth_bps)


# ---------------------------------------------------------------------------
# heap kernels


def new_heap(capacity: int = 1024):
    ev = np.zeros((capacity, EV_NFIELDS), dtype=np.int64)
    heap = np.zeros(capacity, dtype=np.int64)
    free = np.arange(capacity - 1, -1, -1, dtype=np.int64)
    meta = np.zeros(M_NFIELDS, dtype=np.int64)
    meta[M_NFREE] = capacity
    return ev, heap, free, meta


@njit
def heap_grow(ev, heap, free, meta):
    cap = ev.shape[0]
    new_cap = cap * 2
    ev2 = np.zeros((new_cap, ev.shape[1]), dtype=np.int64)
    ev2[:cap] = ev
    heap2 = np.zeros(new_cap, dtype=np.int64)
    heap2[:cap] = heap
    free2 = np.zeros(new_cap, dtype=np.int64)
    nfree = meta[M_NFREE]
    free2[:nfree] = free[:nfree]
    # new slots handed out lowest-first
    for i in range(cap):
        free2[nfree + i] = new_cap - 1 - i
    meta[M_NFREE] = nfree + cap
    return ev2, heap2, free2


@njit
def _before(ev, a, b):
    ta = ev[a, EV_T]
    tb = ev[b, EV_T]
    if ta != tb:
        return ta < tb
    return ev[a, EV_CTR] < ev[b, EV_CTR]


@njit
def heap_push(ev, heap, free, meta, t, kind, flow, node, seq, pkind, aux, pid):
    """Insert an event; caller guarantees a free slot and ``t >= now``."""
    nfree = meta[M_NFREE] - 1
    slot = free[nfree]
    meta[M_NFREE] = nfree
    ev[slot, EV_T] = t
    ev[slot, EV_CTR] = meta[M_CTR]
    meta[M_CTR] += 1
    ev[slot, EV_KIND] = kind
    ev[slot, EV_FLOW] = flow
    ev[slot, EV_NODE] = node
    ev[slot, EV_SEQ] = seq
    ev[slot, EV_PKIND] = pkind
    ev[slot, EV_AUX] = aux
    ev[slot, EV_PID] = pid
    i = meta[M_SIZE]
    meta[M_SIZE] = i + 1
    while i > 0:
        parent = (i - 1) >> 1
        ps = heap[parent]
        if _before(ev, slot, ps):
            heap[i] = ps
            i = parent
        else:
            break
    heap[i] = slot
    return slot


@njit
def heap_pop(ev, heap, free, meta):
    """Remove the earliest event and return its slot.

    The slot is released immediately: read its fields before the next push.
    """
    size = meta[M_SIZE] - 1
    top = heap[0]
    meta[M_SIZE] = size
    if size > 0:
        last = heap[size]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= size:
                break
            if c + 1 < size and _before(ev, heap[c + 1], heap[c]):
                c += 1
            if _before(ev, heap[c], last):
                heap[i] = heap[c]
                i = c
            else:
                break
        heap[i] = last
    free[meta[M_NFREE]] = top
    meta[M_NFREE] += 1
    meta[M_NOW] = ev[top, EV_T]
    return top


@njit
def heap_peek_time(ev, heap, meta):
    if meta[M_SIZE] == 0:
        return INF_TIME
    return ev[heap[0], EV_T]


# ---------------------------------------------------------------------------
# drop-tail link kernel


@njit
def link_admit(dep, head, count, busy, link, qcap, now, ser):
    """Offer a packet to directed link ``link`` at ``now``.

    Occupancy counts every accepted packet whose serialization has not yet
    finished, the one in service included. Returns the service end time, or
    -1 when the buffer is full and the packet is dropped.
    """
    h = head[link]
    c = count[link]
    while c > 0 and dep[link, h] <= now:
        h += 1
        if h == qcap:
            h = 0
        c -= 1
    head[link] = h
    if c >= qcap:
        count[link] = c
        return -1
    start = busy[link]
    if start < now:
        start = now
    end = start + ser
    busy[link] = end
    pos = h + c
    if pos >= qcap:
        pos -= qcap
    dep[link, pos] = end
    count[link] = c + 1
    return end


@njit
def link_occupancy(dep, head, count, link, qcap, now):
    h = head[link]
    n = 0
    for i in range(count[link]):
        j = h + i
        if j >= qcap:
            j -= qcap
        if dep[link, j] > now:
            n += 1
    return n


# ---------------------------------------------------------------------------
# Python-facing types


@dataclass(frozen=True)
class SimEvent:
    at: int  # microseconds
    kind: int
    payload: Any = None
    tiebreak: int = -1


class EventQueue:
    """Time-ordered pending events with FIFO tie-break on equal timestamps."""

    def __init__(self, capacity: int = 16):
        self._ev, self._heap, self._free, self._meta = new_heap(capacity)
        self._payloads: dict[int, Any] = {}

    def __len__(self) -> int:
        return int(self._meta[M_SIZE])

    @property
    def now(self) -> int:
        return int(self._meta[M_NOW])

    def schedule(self, at: int, kind: int = 0, payload: Any = None) -> "EventQueue":
        at = int(at)
        if at < self.now:
            raise SchedulingInPast(f"event at {at} us precedes current time {self.now} us")
        if self._meta[M_NFREE] == 0:
            self._ev, self._heap, self._free = heap_grow(self._ev, self._heap, self._free, self._meta)
        ctr = int(self._meta[M_CTR])
        heap_push(self._ev, self._heap, self._free, self._meta, at, kind, 0, 0, 0, 0, 0, ctr)
        self._payloads[ctr] = payload
        return self

    def peek_time(self) -> int | None:
        return None if len(self) == 0 else int(heap_peek_time(self._ev, self._heap, self._meta))

    def pop(self) -> SimEvent:
        if len(self) == 0:
            raise IndexError("pop from empty EventQueue")
        slot = heap_pop(self._ev, self._heap, self._free, self._meta)
        row = self._ev[slot]
        ctr = int(row[EV_PID])
        return SimEvent(int(row[EV_T]), int(row[EV_KIND]), self._payloads.pop(ctr), int(row[EV_CTR]))


def schedule(queue: EventQueue, ev: SimEvent) -> EventQueue:
    return queue.schedule(ev.at, ev.kind, ev.payload)


@dataclass
class Packet:
    id: int
    flow_id: int
    kind: int  # PKT_DATA or PKT_ACK
    seq: int
    size: int
    created_at: int = 0
    hop_count: int = 0

    def __post_init__(self):
        if self.seq < -1:
            raise ValueError("seq must be >= -1")
        if self.size <= 0:
            raise ValueError("packet size must be positive")


@dataclass(frozen=True)
class Enqueued:
    delivery_at: int


@dataclass(frozen=True)
class Dropped:
    at: int
    flow_id: int
    node: int


@dataclass
class Link:
    """One directed link with a drop-tail FIFO of ``capacity`` packets."""

    src: int
    dst: int
    bandwidth: float = 1e6
    propagation_delay: float = 0.010
    capacity: int = 50
    drops: list = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self._dep = np.zeros((1, self.capacity), dtype=np.int64)
        self._head = np.zeros(1, dtype=np.int64)
        self._count = np.zeros(1, dtype=np.int64)
        self._busy = np.zeros(1, dtype=np.int64)

    @property
    def busy_until(self) -> int:
        return int(self._busy[0])

    def queue_length(self, now: int) -> int:
        return int(link_occupancy(self._dep, self._head, self._count, 0, self.capacity, now))

    def service_us(self, pkt: Packet) -> int:
        return serialization_us(pkt.size, self.bandwidth)


def enqueue_packet(link: Link, pkt: Packet, now: int) -> Enqueued | Dropped:
    end = link_admit(
        link._dep, link._head, link._count, link._busy, 0, link.capacity, int(now), link.service_us(pkt)
    )
    if end < 0:
        d = Dropped(int(now), pkt.flow_id, link.src)
        link.drops.append(d)
        return d
    return Enqueued(int(end) + to_us(link.propagation_delay))


def delivery_time(link: Link, pkt: Packet, now: int) -> int:
    """Far-end arrival time for ``pkt`` if it were admitted at ``now``.

    Service starts once the link has finished every packet already accepted.
    Does not modify the link.
    """
    start = max(int(now), link.busy_until)
    return start + link.service_us(pkt) + to_us(link.propagation_delay)
