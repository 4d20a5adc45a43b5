"""Compiled vs pure-Python kernel on bound structures of growing size.

    python3 benchmarks/bench_kernel.py [--steps 400] [--repeat 3]

Prints steps/second per backend and the speedup, and checks that both
backends produce identical traces.
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from structgen import isomorphic_copy, pool, random_props  # noqa: E402

from predlearn import available_backends
from predlearn.network import Bank
from predlearn.oscillation import run


def build(n_sem, n_roles, seed=0):
    rng = np.random.default_rng(seed)
    net = pool(n_sem)
    props = random_props(rng, net, n_roles=n_roles, max_props=n_roles)
    isomorphic_copy(net, Bank.DRIVER, Bank.RECIPIENT, rng)
    return net, props


def time_backend(net, drive, steps, backend, repeat):
    best, trace = np.inf, None
    for _ in range(repeat):
        work = net.copy()
        t0 = time.perf_counter()
        trace, _ = run(work, drive, steps, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled kernel not built; only the python backend is available")
    print(f"{'semantics':>9} {'roles':>5} {'units':>5} " + " ".join(f"{b + ' st/s':>14}" for b in backends)
          + f" {'speedup':>8} {'identical':>9}")
    for n_sem, n_roles in ((16, 1), (32, 2), (64, 4), (128, 8), (256, 16)):
        net, props = build(n_sem, n_roles)
        drive = {p.p_unit: 1.0 for p in props}
        res = {b: time_backend(net, drive, args.steps, b, args.repeat) for b in backends}
        rate = {b: args.steps / t for b, (t, _) in res.items()}
        same = len(backends) < 2 or np.array_equal(res["compiled"][1].activations, res["python"][1].activations)
        speed = rate["compiled"] / rate["python"] if len(backends) == 2 else float("nan")
        print(f"{n_sem:>9} {n_roles:>5} {len(net.tokens) + len(net.semantics):>5} "
              + " ".join(f"{rate[b]:>14.0f}" for b in backends) + f" {speed:>8.1f} {str(same):>9}")


if __name__ == "__main__":
    main()
