"""Compare the numba and pure-numpy kernels.

Runs each backend in a fresh interpreter, since the backend is fixed at import
time by BNOPRISK_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--proposals 20000] [--length 5000]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from bnoprisk import NUMBA_ENABLED
from bnoprisk.corrstats import CorrelationTarget
from bnoprisk.synthgen import GeneratorConfig, run
from bnoprisk._kernels import lagged_products

proposals, length = int(sys.argv[1]), int(sys.argv[2])
cfg = GeneratorConfig(3, length, CorrelationTarget.homogeneous(3, 25.0), [100.0, 50.0, 10.0],
                      plateau_window=proposals + 1, max_iterations=proposals, seed=1)
x = np.random.default_rng(0).exponential(size=(3, length))

warm = GeneratorConfig(3, 200, CorrelationTarget.homogeneous(3, 5.0), [1.0, 1.0, 1.0],
                       max_iterations=2000, seed=0)
run(warm)
lagged_products(x, length, 125)

t0 = time.perf_counter()
for _ in range(5):
    lagged_products(x, length, 125)
t_prod = (time.perf_counter() - t0) / 5

t0 = time.perf_counter()
_, rep = run(cfg)
t_run = time.perf_counter() - t0
print(json.dumps({"numba": NUMBA_ENABLED, "lagged_products_s": t_prod,
                  "descent_us_per_proposal": 1e6 * t_run / rep.proposals,
                  "final_objective": rep.final_objective}))
"""


def measure(disable: bool, proposals: int, length: int) -> dict:
    env = dict(os.environ)
    env.pop("BNOPRISK_DISABLE_NUMBA", None)
    if disable:
        env["BNOPRISK_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(proposals), str(length)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--proposals", type=int, default=20000)
    ap.add_argument("--length", type=int, default=5000)
    args = ap.parse_args()

    fast = measure(False, args.proposals, args.length)
    slow = measure(True, args.proposals, args.length)
    print(f"{'kernel':<28}{'numba':>14}{'numpy':>14}{'speedup':>10}")
    for key, label in (("lagged_products_s", "lagged products (s)"),
                       ("descent_us_per_proposal", "descent (us/proposal)")):
        print(f"{label:<28}{fast[key]:>14.4g}{slow[key]:>14.4g}{slow[key] / fast[key]:>10.1f}")
    rel = abs(fast["final_objective"] - slow["final_objective"]) / abs(fast["final_objective"])
    print(f"final objective relative difference: {rel:.1e}")


if __name__ == "__main__":
    main()
