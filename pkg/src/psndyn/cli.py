"""Command-line front end: ``psndyn <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, report
from ._jit import backend
from .analysis.graph import perturbed_windows
from .config import AnalysisConfig, load_profile
from .errors import UsageError
from .scenario import SweepArtifacts, run_experiment, run_sweep

COMMANDS = ("simulate", "sweep", "bifurcation", "pca", "transitions", "stats", "report")
PLOT_FLOWS = (0, 5, 15, 20)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_duty(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise UsageError(f"duty must be a number, got {text!r}") from None
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise UsageError(f"duty must lie in [0, 1], got {x}")
    return x


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list; every value must be a duty ratio."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be start:stop:step, got {text!r}")
        try:
            a, b, s = (float(p) for p in parts)
        except ValueError:
            raise UsageError(f"grid must be numeric, got {text!r}") from None
        if s <= 0 or b < a:
            raise UsageError(f"grid needs step > 0 and stop >= start, got {text!r}")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        vals = [round(a + i * s, 10) for i in range(n)]
    else:
        vals = [float(p) for p in text.split(",") if p.strip()]
    if not vals:
        raise UsageError("grid is empty")
    return [parse_duty(str(v)) for v in vals]


def _perturb_flags(mode: str) -> list[bool]:
    return {"off": [False], "on": [True], "both": [False, True]}[mode]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="psndyn", description="Packet-switching network dynamics: simulate and analyse cwnd traces.")
    p.add_argument("--version", action="version", version=f"psndyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, run_input=False):
        sp.add_argument("--config", default="desk", help="config file or bundled profile (paper, desk)")
        sp.add_argument("--out", "-o", type=Path, required=not run_input, help="output directory")
        sp.add_argument("--force", action="store_true", help="overwrite a directory holding a different manifest")
        if run_input:
            sp.add_argument("--run", type=Path, required=True, help="run or sweep directory to analyse")
            sp.add_argument("--flows", default="all", help="comma list of flows, or 'all'")

    def overrides(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--duration", type=float)

    s = sub.add_parser("simulate", help="run one experiment")
    common(s)
    overrides(s)
    s.add_argument("--duty", type=parse_duty)
    s.add_argument("--perturb", choices=("on", "off"))
    s.add_argument("--no-events-csv", action="store_true", help="keep only the binary event log")

    s = sub.add_parser("sweep", help="run a grid of duty ratios")
    common(s)
    overrides(s)
    s.add_argument("--grid", type=parse_grid, default=parse_grid("0.1:0.8:0.1"))
    s.add_argument("--perturb", choices=("both", "on", "off"), default="off")
    s.add_argument("--workers", type=int, help="worker processes (default: $PSNDYN_WORKERS or 1)")
    s.add_argument("--no-events-csv", action="store_true")

    for name, hlp in (("bifurcation", "peak scatter per duty"), ("pca", "window projections"),
                      ("transitions", "state transition graphs"), ("stats", "per-flow statistics table"),
                      ("report", "summary table and plot-ready CSVs")):
        s = sub.add_parser(name, help=hlp)
        common(s, run_input=True)
        if name in ("stats", "report"):
            s.add_argument("--no-lyapunov", action="store_true")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    ns = build_parser().parse_args(argv)
    if ns.command in COMMANDS[2:] and ns.out is None:
        ns.out = ns.run
    return ns


# --- helpers ---------------------------------------------------------------

def _profile(ns):
    prof = load_profile(ns.config)
    exp = prof.experiment
    kw = {}
    for k in ("seed", "duration"):
        v = getattr(ns, k, None)
        if v is not None:
            kw[k] = v
    if getattr(ns, "duty", None) is not None:
        kw["duty"] = ns.duty
    if getattr(ns, "perturb", None) in ("on", "off"):
        kw["perturb"] = ns.perturb == "on"
    try:
        exp = exp.replace(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None
    return exp, prof.analysis


def _guard(out: Path, identity: dict, force: bool) -> None:
    """Refuse to reuse a directory whose manifest describes a different job."""
    old = io.read_manifest(out)
    if old is None or force:
        return
    if {k: old.get(k) for k in identity} != identity:
        raise UsageError(f"{out} holds a different manifest; pass --force to overwrite")


def _mark_started(out: Path, ident: dict) -> None:
    # overwritten on success; a crash leaves complete=false behind
    out.mkdir(parents=True, exist_ok=True)
    io.atomic_write_text(out / io.MANIFEST, json.dumps({**ident, "complete": False}, indent=2) + "\n")


def _base_manifest(kind, argv, **extra):
    return {"kind": kind, "argv": list(argv), "backend": backend(), "version": __version__, "complete": True, **extra}


def _run_manifest(run, argv):
    return _base_manifest("run", argv, config=run.config.to_dict(), config_hash=run.config.digest(),
                          seed=run.config.seed, totals=run.totals)


def _cell_name(duty: float, perturbed: bool) -> str:
    return f"duty_{duty:.2f}_{'perturbed' if perturbed else 'plain'}"


def _load(path: Path):
    """A run directory loads as one run; a sweep directory as a SweepArtifacts."""
    man = io.read_manifest(path)
    if man is None:
        raise FileNotFoundError(f"no manifest in {path}")
    if man["kind"] == "run":
        return io.load_run(path)
    runs = {}
    for cell in man["cells"]:
        r = io.load_run(path / cell["dir"])
        runs[(r.config.duty, r.config.perturb)] = r
    return SweepArtifacts(runs)


def _runs(obj):
    if isinstance(obj, SweepArtifacts):
        return [obj.runs[k] for k in sorted(obj.runs)]
    return [obj]


def _flows(spec: str, n: int) -> list[int]:
    if spec == "all":
        return list(range(n))
    try:
        fl = [int(x) for x in spec.split(",")]
    except ValueError:
        raise UsageError(f"flows must be 'all' or a comma list, got {spec!r}") from None
    bad = [f for f in fl if not 0 <= f < n]
    if bad:
        raise UsageError(f"flows out of range: {bad}")
    return fl


def _prefix(run) -> str:
    return _cell_name(run.config.duty, run.config.perturb)


def _analysis_for(ns, loaded):
    man = io.read_manifest(ns.run)
    if man and "analysis" in man:
        a = man["analysis"]
        a["lyapunov_fit"] = tuple(a["lyapunov_fit"])
        return AnalysisConfig(**a)
    return load_profile(ns.config).analysis


# --- commands --------------------------------------------------------------

def cmd_simulate(ns, argv) -> int:
    cfg, ana = _profile(ns)
    ident = {"kind": "run", "config_hash": cfg.digest()}
    _guard(ns.out, ident, ns.force)
    _mark_started(ns.out, ident)
    run = run_experiment(cfg)
    names = io.save_run(run, ns.out, events_csv=not ns.no_events_csv)
    man = _run_manifest(run, argv)
    man["analysis"] = ana.to_dict()
    man["artifacts"] = names
    io.write_manifest(ns.out, man)
    t = run.throughput()
    print(f"simulated duty={cfg.duty} duration={cfg.duration}s: {run.totals['events']} events, "
          f"min throughput {t.min():.4f} -> {ns.out}")
    return 0


def cmd_sweep(ns, argv) -> int:
    cfg, ana = _profile(ns)
    flags = _perturb_flags(ns.perturb)
    ident = {"kind": "sweep", "config_hash": cfg.digest(), "grid": ns.grid, "perturb": ns.perturb}
    _guard(ns.out, ident, ns.force)
    _mark_started(ns.out, ident)
    sw = run_sweep(cfg, ns.grid, with_and_without_perturbation=len(flags) == 2,
                   perturbed=flags[0], workers=ns.workers)
    cells = []
    for (duty, pert), run in sorted(sw.runs.items()):
        d = ns.out / _cell_name(duty, pert)
        names = io.save_run(run, d, events_csv=not ns.no_events_csv)
        man = _run_manifest(run, argv)
        man["analysis"] = ana.to_dict()
        man["artifacts"] = names
        io.write_manifest(d, man)
        cells.append({"dir": d.name, "duty": duty, "perturbed": pert, "config_hash": run.config.digest()})
    rest = {k: v for k, v in ident.items() if k != "kind"}
    io.write_manifest(ns.out, _base_manifest("sweep", argv, **rest, analysis=ana.to_dict(), cells=cells))
    print(f"swept {len(cells)} runs -> {ns.out}")
    return 0


def _write_analysis_manifest(out: Path, kind: str, argv, names: list[str], source: Path) -> None:
    path = out / f"{kind}.manifest.json"
    arts = {n: io.file_hash(out / n) for n in sorted(names)}
    body = _base_manifest(kind, argv, source=str(source), artifacts=arts)
    io.atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


def cmd_bifurcation(ns, argv) -> int:
    loaded = _load(ns.run)
    a = _analysis_for(ns, loaded)
    sw = loaded if isinstance(loaded, SweepArtifacts) else SweepArtifacts(
        {(loaded.config.duty, loaded.config.perturb): loaded})
    n = _runs(sw)[0].n_flows
    rows = []
    for pert in sorted({p for _, p in sw.runs}):
        for f in _flows(ns.flows, n):
            for duty, peak in report.bifurcation_points(sw, f, pert, a):
                rows.append((duty, f, f"{peak:.6g}", int(pert)))
    io.write_csv(ns.out / "bifurcation.csv", ("duty", "flow", "peak_value", "perturbed"), rows)
    _write_analysis_manifest(ns.out, "bifurcation", argv, ["bifurcation.csv"], ns.run)
    print(f"{len(rows)} peaks -> {ns.out / 'bifurcation.csv'}")
    return 0


def _pca_rows(run, f, a):
    m = report.flow_pca(run, f, a)
    p = m.projections
    mask = (perturbed_windows(p.shape[0], a.window, run.schedule.windows) if run.schedule is not None
            else np.zeros(p.shape[0], dtype=bool))
    return m, [(i, f"{p[i, 0]:.10g}", f"{p[i, 1]:.10g}", int(mask[i])) for i in range(p.shape[0])]


def cmd_pca(ns, argv) -> int:
    loaded = _load(ns.run)
    a = _analysis_for(ns, loaded)
    names = []
    for run in _runs(loaded):
        for f in _flows(ns.flows, run.n_flows):
            m, rows = _pca_rows(run, f, a)
            name = f"pca/{_prefix(run)}_flow{f:02d}.csv"
            io.write_csv(ns.out / name, ("window_index", "pc1", "pc2", "perturbed_flag"), rows)
            ename = f"pca/{_prefix(run)}_flow{f:02d}_eigenvalues.csv"
            io.write_csv(ns.out / ename, ("rank", "eigenvalue"),
                         ((i + 1, f"{v:.10g}") for i, v in enumerate(m.eigenvalues)))
            names += [name, ename]
    _write_analysis_manifest(ns.out, "pca", argv, names, ns.run)
    print(f"{len(names) // 2} projections -> {ns.out / 'pca'}")
    return 0


def cmd_transitions(ns, argv) -> int:
    loaded = _load(ns.run)
    a = _analysis_for(ns, loaded)
    names = []
    for run in _runs(loaded):
        for f in _flows(ns.flows, run.n_flows):
            g = report.flow_graph(run, f, a)
            base = f"graphs/{_prefix(run)}_flow{f:02d}"
            io.atomic_write_text(ns.out / f"{base}.dot", g.to_dot(f"flow{f}"))
            io.atomic_write_text(ns.out / f"{base}.json", g.to_json())
            names += [f"{base}.dot", f"{base}.json"]
    _write_analysis_manifest(ns.out, "transitions", argv, names, ns.run)
    print(f"{len(names) // 2} graphs -> {ns.out / 'graphs'}")
    return 0


STATS_HEADER = ("flow", "duty", "sent", "dropped", "throughput", "n_states", "n_dims_99", "lyapunov")


def _stats_row(s):
    return (s.flow_id, f"{s.duty:.2f}", s.sent, s.dropped, f"{s.throughput:.6f}", s.n_states, s.n_dims_99,
            "nan" if math.isnan(s.lyapunov) else f"{s.lyapunov:.6g}")


def _all_stats(ns, loaded, a):
    stats = []
    for run in _runs(loaded):
        for f in _flows(ns.flows, run.n_flows):
            stats.append(report.flow_stats(run, f, a, lyapunov=not ns.no_lyapunov))
    return stats


def _write_stats(out: Path, stats) -> list[str]:
    names = []
    for pert, name in ((False, "stats.csv"), (True, "stats_perturbed.csv")):
        rows = [_stats_row(s) for s in stats if s.perturbed == pert]
        if rows:
            io.write_csv(out / name, STATS_HEADER, rows)
            names.append(name)
    return names


def cmd_stats(ns, argv) -> int:
    loaded = _load(ns.run)
    a = _analysis_for(ns, loaded)
    names = _write_stats(ns.out, _all_stats(ns, loaded, a))
    _write_analysis_manifest(ns.out, "stats", argv, names, ns.run)
    print(f"stats -> {', '.join(str(ns.out / n) for n in names)}")
    return 0


def cmd_report(ns, argv) -> int:
    loaded = _load(ns.run)
    a = _analysis_for(ns, loaded)
    sw = loaded if isinstance(loaded, SweepArtifacts) else SweepArtifacts(
        {(loaded.config.duty, loaded.config.perturb): loaded})
    out = ns.out / "report"
    stats = _all_stats(ns, sw, a)
    names = [f"report/{n}" for n in _write_stats(out, stats)]
    duties = sorted({d for d, _ in sw.runs})
    plain = [d for d in duties if (d, False) in sw.runs]
    base = plain or duties
    pflag = bool(plain) is False

    # packet events and transit times at the lowest and highest duty
    rows, trows = [], []
    for d in sorted({base[0], base[-1]}):
        run = sw.get(d, pflag)
        med = run.median_transit()
        first = run.first_delivery()
        for f in range(run.n_flows):
            trows.append((f"{d:.2f}", f, f"{med[f]:.6f}", f"{first[f]:.6f}", int(run.counters["dropped"][f])))
        for r in io.events_rows(run.events):
            rows.append((f"{d:.2f}",) + r)
    io.write_csv(out / "event_trace.csv", ("duty", "time_s", "event", "flow", "node", "seq"), rows)
    io.write_csv(out / "transit.csv", ("duty", "flow", "median_transit_s", "first_delivery_s", "drops"), trows)
    names += ["report/event_trace.csv", "report/transit.csv"]

    fl = [f for f in PLOT_FLOWS if f < _runs(sw)[0].n_flows]
    rows = []
    for f in fl:
        rows += [(d, f, f"{p:.6g}") for d, p in report.bifurcation_points(sw, f, pflag, a)]
    io.write_csv(out / "bifurcation.csv", ("duty", "flow", "peak_value"), rows)

    rows = []
    for d in base:
        run = sw.get(d, True) if (d, True) in sw.runs else sw.get(d, pflag)
        for f in fl:
            _, pr = _pca_rows(run, f, a)
            rows += [(f"{d:.2f}", f) + r for r in pr]
    io.write_csv(out / "pca_trajectories.csv", ("duty", "flow", "window_index", "pc1", "pc2", "perturbed_flag"), rows)

    by = {(s.duty, s.flow_id, s.perturbed): s for s in stats}
    rows = [(f"{d:.2f}", f, by[(d, f, pflag)].n_states, by[(d, f, pflag)].dropped, by[(d, f, pflag)].n_dims_99)
            for d in base for f in range(_runs(sw)[0].n_flows)]
    io.write_csv(out / "states_drops_dims.csv", ("duty", "flow", "n_states", "drops", "n_dims_99"), rows)

    rows = []
    for d in base:
        for f in range(_runs(sw)[0].n_flows):
            with_p = by.get((d, f, True))
            without = by.get((d, f, False))
            rows.append((f"{d:.2f}", f, f"{with_p.throughput:.6f}" if with_p else "",
                         f"{without.throughput:.6f}" if without else ""))
    io.write_csv(out / "throughput.csv", ("duty", "flow", "throughput_perturbed", "throughput_plain"), rows)

    corr = report.correlations(stats, perturbed=pflag)
    io.write_csv(out / "correlations.csv", ("flow", "r_states_drops", "r_states_dims"),
                 ((c["flow"], f"{c['r_states_drops']:.6f}", f"{c['r_states_dims']:.6f}") for c in corr))
    names += [f"report/{n}" for n in ("bifurcation.csv", "pca_trajectories.csv", "states_drops_dims.csv",
                                      "throughput.csv", "correlations.csv")]

    summary = []
    for c in corr:
        f = c["flow"]
        fs = [by[(d, f, pflag)] for d in base]
        summary.append((f, f"{min(s.throughput for s in fs):.4f}", max(s.n_states for s in fs),
                        f"{c['r_states_drops']:.3f}", f"{c['r_states_dims']:.3f}"))
    hdr = ("flow", "min_throughput", "max_states", "r_states_drops", "r_states_dims")
    io.write_csv(out / "summary.csv", hdr, summary)
    names.append("report/summary.csv")
    _write_analysis_manifest(ns.out, "report", argv, names, ns.run)

    print(" ".join(f"{h:>15}" for h in hdr))
    for row in summary:
        print(" ".join(f"{str(v):>15}" for v in row))
    return 0


HANDLERS = {
    "simulate": cmd_simulate, "sweep": cmd_sweep, "bifurcation": cmd_bifurcation, "pca": cmd_pca,
    "transitions": cmd_transitions, "stats": cmd_stats, "report": cmd_report,
}


def execute(ns: argparse.Namespace, argv=()) -> int:
    try:
        return HANDLERS[ns.command](ns, argv)
    except UsageError:
        raise
    except Exception as e:
        if ns.command in COMMANDS[2:] and ns.out is not None and Path(ns.out).is_dir():
            body = _base_manifest(ns.command, argv, source=str(ns.run), complete=False, error=str(e))
            io.atomic_write_text(ns.out / f"{ns.command}.manifest.json", json.dumps(body, indent=2) + "\n")
        raise


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse_args(argv)
        return execute(ns, argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, LookupError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
