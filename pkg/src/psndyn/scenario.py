"""Line-topology experiments: flows crossing the line, duty sweeps, perturbation bursts."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis.pca import CwndSeries
from .engine import GATE_APP, GATE_OFF, GATE_WINDOWS, LOG_RECV, Simulator
from .errors import InvalidNodeCount, InvalidSchedule
from .simcore import US_PER_S, to_us

WORKERS_ENV = "PSNDYN_WORKERS"


@dataclass(frozen=True)
class LinkParams:
    bandwidth: float = 1e6  # bit/s
    propagation_delay: float = 0.010  # s
    queue_capacity: int = 200  # packets, including the one in service


@dataclass(frozen=True)
class Topology:
    n_nodes: int
    link_params: LinkParams = LinkParams()

    @property
    def links(self) -> list[tuple[int, int]]:
        return [(i, i + 1) for i in range(self.n_nodes - 1)]

    def degree(self, node: int) -> int:
        return (node > 0) + (node < self.n_nodes - 1)

    def next_hop(self, node: int, dst: int) -> int:
        if node == dst:
            return node
        return node + 1 if dst > node else node - 1

    def route(self, src: int, dst: int) -> list[int]:
        step = 1 if dst >= src else -1
        return list(range(src, dst + step, step))


def build_line_topology(n: int, link_params: LinkParams = LinkParams()) -> Topology:
    if n < 2:
        raise InvalidNodeCount(f"a line needs at least 2 nodes, got {n}")
    return Topology(n, link_params)


@dataclass(frozen=True)
class Flow:
    id: int
    src: int
    dst: int

    @property
    def route(self) -> list[int]:
        step = 1 if self.dst >= self.src else -1
        return list(range(self.src, self.dst + step, step))

    @property
    def hops(self) -> int:
        return abs(self.dst - self.src)


def assign_flows(n: int) -> list[Flow]:
    if n < 2:
        raise InvalidNodeCount(f"a line needs at least 2 nodes, got {n}")
    return [Flow(k, k, n - k - 1) for k in range(n)]


@dataclass(frozen=True)
class PerturbationSchedule:
    interval: float
    burst_len: float
    windows: tuple[tuple[float, float], ...]
    src: int = 0
    dst: int = 29

    @property
    def count(self) -> int:
        return len(self.windows)

    def active(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.windows)


def perturbation_windows(duration: float, interval: float = 100.0, burst_len: float = 10.0,
                         src: int = 0, dst: int = 29) -> PerturbationSchedule:
    if burst_len <= 0 or interval <= 0:
        raise InvalidSchedule("interval and burst length must be positive")
    if burst_len >= interval:
        raise InvalidSchedule(f"burst length {burst_len} must be shorter than the interval {interval}")
    n = max(int(math.floor((duration - burst_len) / interval + 1e-9)), 0)
    wins = tuple((interval * i, interval * i + burst_len) for i in range(1, n + 1))
    return PerturbationSchedule(interval, burst_len, wins, src, dst)


@dataclass(frozen=True)
class TcpParams:
    init_cwnd: float = 1.0
    init_ssthresh: float = 32.0
    rto_init: float = 1.0
    min_rto: float = 0.2
    max_rto: float = 64.0
    max_cwnd: float = 64.0


@dataclass(frozen=True)
class ExperimentConfig:
    duty: float = 0.5
    duration: float = 1000.0
    seed: int = 0
    sample_dt: float = 0.01
    n_nodes: int = 30
    link: LinkParams = LinkParams()
    tcp: TcpParams = TcpParams()
    packet_size: int = 1000  # bytes
    ack_size: int = 40
    app_rate: float = 25.0  # packets/s while the gate is open
    duty_period: float = 1.0
    pacing: bool = True  # sender NIC serialises packets before the first queue
    jitter: float = 0.0  # s, uniform sender-side delay
    perturb: bool = False
    perturb_interval: float = 100.0
    perturb_burst: float = 10.0
    record_events: bool = True

    def __post_init__(self):
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {self.duty}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.sample_dt <= 0:
            raise ValueError("sample_dt must be positive")
        if self.app_rate <= 0:
            raise ValueError("app_rate must be positive")
        if self.n_nodes < 2:
            raise InvalidNodeCount(f"a line needs at least 2 nodes, got {self.n_nodes}")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "link" in d and isinstance(d["link"], dict):
            d["link"] = LinkParams(**d["link"])
        if "tcp" in d and isinstance(d["tcp"], dict):
            d["tcp"] = TcpParams(**d["tcp"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def schedule(self) -> PerturbationSchedule:
        return perturbation_windows(self.duration, self.perturb_interval, self.perturb_burst,
                                    0, self.n_nodes - 1)


@dataclass
class RunArtifacts:
    config: ExperimentConfig
    cwnd: np.ndarray  # samples x flows
    events: np.ndarray  # rows (t_us, kind, flow, node, seq, created_us)
    counters: dict
    totals: dict
    schedule: PerturbationSchedule | None
    manifest: dict = field(default_factory=dict)

    @property
    def n_flows(self) -> int:
        return self.cwnd.shape[1]

    def series(self, flow: int) -> CwndSeries:
        return CwndSeries(flow, self.config.sample_dt, self.cwnd[:, flow])

    def throughput(self) -> np.ndarray:
        sent = self.counters["sent"][: self.n_flows]
        drops = self.counters["dropped"][: self.n_flows]
        return np.where(sent > 0, 1.0 - drops / np.maximum(sent, 1), 1.0)

    def transit_times(self, flow: int) -> np.ndarray:
        """Source-to-destination delay in seconds of every delivered DATA packet of ``flow``."""
        ev = self.events
        rows = ev[(ev[:, 1] == LOG_RECV) & (ev[:, 2] == flow)]
        return (rows[:, 0] - rows[:, 5]) / US_PER_S

    def median_transit(self) -> np.ndarray:
        out = np.full(self.n_flows, np.nan)
        ev = self.events
        rec = ev[ev[:, 1] == LOG_RECV]
        for f in range(self.n_flows):
            r = rec[rec[:, 2] == f]
            if r.size:
                out[f] = np.median(r[:, 0] - r[:, 5]) / US_PER_S
        return out

    def first_delivery(self) -> np.ndarray:
        out = np.full(self.n_flows, np.nan)
        ev = self.events
        rec = ev[ev[:, 1] == LOG_RECV]
        for f in range(self.n_flows):
            r = rec[rec[:, 2] == f]
            if r.size:
                out[f] = r[0, 0] / US_PER_S
        return out


def build_simulator(cfg: ExperimentConfig) -> tuple[Simulator, PerturbationSchedule | None]:
    n = cfg.n_nodes
    flows = [(f.src, f.dst) for f in assign_flows(n)]
    bw = cfg.link.bandwidth
    ser = max(to_us(cfg.packet_size * 8 / bw), 1)
    ser_ack = max(to_us(cfg.ack_size * 8 / bw), 1)
    period = to_us(cfg.duty_period)
    on = int(round(cfg.duty * period))
    app_int = max(to_us(1.0 / cfg.app_rate), 1)
    gates = [(GATE_APP if on > 0 else GATE_OFF, on, period, 0, app_int)] * n
    sched = None
    starts: list[int] = []
    if cfg.perturb:
        sched = cfg.schedule
        flows.append((sched.src, sched.dst))
        gates.append((GATE_WINDOWS, 0, 1, 0, 0))
        starts = [to_us(a) for a, _ in sched.windows]
        if not starts:
            gates[-1] = (GATE_OFF, 0, 1, 0, 0)
    t = cfg.tcp
    sim = Simulator(
        n, flows, gates, queue_capacity=cfg.link.queue_capacity, prop_us=to_us(cfg.link.propagation_delay),
        ser_data_us=ser, ser_ack_us=ser_ack, access_us=ser if cfg.pacing else 0, jitter_us=to_us(cfg.jitter),
        seed=cfg.seed, init_cwnd=t.init_cwnd, init_ssthresh=t.init_ssthresh, rto_init=t.rto_init,
        min_rto=t.min_rto, max_rto=t.max_rto, max_cwnd=t.max_cwnd, n_main=n, sample_us=to_us(cfg.sample_dt),
        horizon_us=to_us(cfg.duration), window_starts_us=starts, window_len_us=to_us(cfg.perturb_burst),
        record_events=cfg.record_events,
    )
    return sim, sched


def run_experiment(cfg: ExperimentConfig) -> RunArtifacts:
    sim, sched = build_simulator(cfg)
    sim.run_until(to_us(cfg.duration))
    manifest = {"config": cfg.to_dict(), "config_hash": cfg.digest(), "seed": cfg.seed}
    return RunArtifacts(cfg, sim.cw.copy(), sim.events.copy(), sim.flow_counters(), sim.totals, sched, manifest)


@dataclass
class SweepArtifacts:
    runs: dict  # (duty, perturbed) -> RunArtifacts

    @property
    def duties(self) -> list[float]:
        return sorted({d for d, _ in self.runs})

    def get(self, duty: float, perturbed: bool = False) -> RunArtifacts:
        return self.runs[(duty, perturbed)]

    def __len__(self):
        return len(self.runs)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if raw.strip():
        return max(int(raw), 1)
    return 1


def run_sweep(base: ExperimentConfig, duty_grid, with_and_without_perturbation: bool = False,
              perturbed: bool | None = None, workers: int | None = None) -> SweepArtifacts:
    """Run ``base`` at every duty in the grid.

    With ``with_and_without_perturbation`` each duty is run twice; otherwise
    the perturbation flag is ``perturbed`` (default: the base config's).
    """
    grid = [float(d) for d in duty_grid]
    if not grid:
        raise ValueError("duty grid is empty")
    for d in grid:
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {d}")
    if with_and_without_perturbation:
        flags = [False, True]
    else:
        flags = [base.perturb if perturbed is None else perturbed]
    keys = [(d, p) for d in grid for p in flags]
    cfgs = [base.replace(duty=d, perturb=p) for d, p in keys]
    n = worker_count() if workers is None else workers
    if n > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(run_experiment, cfgs))
    else:
        results = [run_experiment(c) for c in cfgs]
    return SweepArtifacts(dict(zip(keys, results)))
