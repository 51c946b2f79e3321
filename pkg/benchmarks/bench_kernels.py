"""Time the compiled kernels against the pure-Python fallback.

Each measurement runs in a fresh interpreter because the backend is chosen at
import time from PSNDYN_DISABLE_JIT.

    python benchmarks/bench_kernels.py [--sim-seconds 20] [--nn-points 1500] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from psndyn import _jit
from psndyn.analysis.lyapunov import delay_embed, nearest_neighbors
from psndyn.scenario import ExperimentConfig, run_experiment

sim_s, nn_pts, repeat = float(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
cfg = ExperimentConfig(duty=0.8, duration=sim_s, record_events=False)
x = np.sin(np.arange(nn_pts + 50) * 0.37) + 0.1 * np.random.default_rng(0).normal(size=nn_pts + 50)
y = delay_embed(x, 5, 10)

def best(fn):
    fn()  # warm-up, includes compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out

t_sim, run = best(lambda: run_experiment(cfg))
t_nn, nn = best(lambda: nearest_neighbors(y, nn_pts, 50))
print(json.dumps({"backend": _jit.backend(), "engine_s": t_sim, "events": int(run.totals["events"]),
                  "nn_s": t_nn, "nn_hash": int(np.asarray(nn).sum())}))
"""


def measure(disable: bool, args) -> dict:
    env = dict(os.environ, PSNDYN_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", CHILD, str(args.sim_seconds), str(args.nn_points), str(args.repeat)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sim-seconds", type=float, default=20.0, help="simulated seconds of the 30-node line at duty 0.8")
    ap.add_argument("--nn-points", type=int, default=1500, help="reference vectors for the neighbour search")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = measure(False, args), measure(True, args)
    if fast["events"] != slow["events"] or fast["nn_hash"] != slow["nn_hash"]:
        sys.exit("backends disagree")
    print(f"{'kernel':<22}{'numba s':>10}{'python s':>11}{'speedup':>10}")
    for name, key in (("engine", "engine_s"), ("nearest neighbours", "nn_s")):
        print(f"{name:<22}{fast[key]:>10.3f}{slow[key]:>11.3f}{slow[key] / fast[key]:>9.1f}x")
    print(f"engine events per run: {fast['events']}")


if __name__ == "__main__":
    main()
