"""Time the hot kernels with numba on and off.

Each mode runs in a fresh interpreter because the switch is read at import
time.  Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from byzcount._accel import USE_NUMBA
from byzcount.engine import StopCondition, new_simulation
from byzcount.graph import diameter, generate_hnd, tree_like_fraction, vertex_expansion_exact

repeat = int(sys.argv[1])

def best_of(fn):
    fn()                      # warm-up (includes jit compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

g20 = generate_hnd(20, 4, 0)
g1k = generate_hnd(1024, 8, 0)
g20k = generate_hnd(20000, 8, 0)

def congest():
    sim = new_simulation(g1k, ("congest", {"c": 1}), byz={0, 1}, adversary="beacon-spam", seed=0)
    sim.run_until(StopCondition("max-rounds", 200))

out = {
    "numba": USE_NUMBA,
    "expansion_n20": best_of(lambda: vertex_expansion_exact(g20)),
    "diameter_n1024": best_of(lambda: diameter(g1k)),
    "tree_like_n20000_r1": best_of(lambda: tree_like_fraction(g20k, 1)),
    "congest_n1024_200_rounds": best_of(congest),
}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("BYZCOUNT_DISABLE_NUMBA", None)
    if disable:
        env["BYZCOUNT_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True)
    if res.returncode:
        sys.exit(res.stderr)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="also write the raw timings here")
    args = ap.parse_args()
    jit = run(False, args.repeat)
    plain = run(True, args.repeat)
    print(f"{'kernel':<28}{'numba s':>10}{'fallback s':>12}{'speedup':>9}")
    for key in jit:
        if key == "numba":
            continue
        print(f"{key:<28}{jit[key]:>10.4f}{plain[key]:>12.4f}{plain[key] / jit[key]:>8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": jit, "fallback": plain}, fh, indent=1)


if __name__ == "__main__":
    main()
