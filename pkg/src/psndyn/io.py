"""Artifact files: atomic writes, CSV tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .engine import LOG_NAMES
from .simcore import US_PER_S

MANIFEST = "manifest.json"

_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_npy(path: Path, arr: np.ndarray) -> None:
    buf = io.BytesIO()
    np.save(buf, arr, allow_pickle=False)
    atomic_write_bytes(path, buf.getvalue())


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def events_rows(events: np.ndarray):
    for t, kind, flow, node, seq, _ in events.tolist():
        yield f"{t / US_PER_S:.6f}", LOG_NAMES[kind], flow, node, seq


def write_events(path: Path, events: np.ndarray) -> None:
    write_csv(path, ("time_s", "event", "flow", "node", "seq"), events_rows(events))


def write_cwnd(path: Path, cwnd: np.ndarray, dt: float) -> None:
    """Long-format cwnd trace; one row per (sample, flow)."""
    n, nf = cwnd.shape
    buf = io.StringIO()
    buf.write("time_s,flow,cwnd\n")
    # repr of a float round-trips exactly, so the CSV carries the same values as the .npy
    for i, row in enumerate(cwnd.tolist()):
        t = f"{i * dt:.6f}"
        buf.write("".join(f"{t},{f},{v!r}\n" for f, v in enumerate(row)))
    atomic_write_text(path, buf.getvalue())


def read_cwnd(path: Path) -> np.ndarray:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nf = int(raw[:, 1].max()) + 1 if raw.size else 0
    return raw[:, 2].reshape(-1, nf)


def read_manifest(directory: Path) -> dict | None:
    p = Path(directory) / MANIFEST
    if not p.exists():
        return None
    return json.loads(p.read_text())


def write_manifest(directory: Path, manifest: dict) -> None:
    directory = Path(directory)
    arts = manifest.get("artifacts", {})
    manifest = dict(manifest)
    manifest["artifacts"] = {k: file_hash(directory / k) for k in sorted(arts) if (directory / k).exists()}
    atomic_write_text(directory / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


COUNTER_FIELDS = ("sent", "retransmits", "dropped", "ack_dropped", "delivered", "goodput", "offered",
                  "timeouts", "fast_retransmits")


def save_run(run, directory: Path, events_csv: bool = True) -> list[str]:
    """Write a run's traces and counters; returns the artifact file names."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = ["cwnd.npy", "cwnd.csv", "events.npy", "counters.csv"]
    save_npy(d / "cwnd.npy", run.cwnd)
    write_cwnd(d / "cwnd.csv", run.cwnd, run.config.sample_dt)
    save_npy(d / "events.npy", run.events)
    if events_csv:
        write_events(d / "events.csv", run.events)
        names.append("events.csv")
    nf = len(run.counters["sent"])
    write_csv(d / "counters.csv", ("flow",) + COUNTER_FIELDS,
              ([f] + [int(run.counters[k][f]) for k in COUNTER_FIELDS] for f in range(nf)))
    return names


def load_run(directory: Path):
    from .scenario import ExperimentConfig, RunArtifacts

    d = Path(directory)
    man = read_manifest(d)
    if man is None or man.get("kind") != "run":
        raise FileNotFoundError(f"{d} is not a run directory")
    cfg = ExperimentConfig.from_dict(man["config"])
    # the .npy twin is a fast path; the CSV is the interchange format
    cw = np.load(d / "cwnd.npy", allow_pickle=False) if (d / "cwnd.npy").exists() else read_cwnd(d / "cwnd.csv")
    ev = np.load(d / "events.npy", allow_pickle=False)
    rows = read_csv(d / "counters.csv")
    counters = {k: np.array([int(r[k]) for r in rows], dtype=np.int64) for k in COUNTER_FIELDS}
    return RunArtifacts(cfg, cw, ev, counters, man.get("totals", {}), cfg.schedule if cfg.perturb else None, man)
