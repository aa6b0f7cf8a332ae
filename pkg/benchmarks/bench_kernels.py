"""Compiled kernels against the numpy fallback.

Times the sub-Laplacian, the fused flow right-hand side and one RK4 step on
each backend and lattice, and reports the speedup.  Run with::

    python3 benchmarks/bench_kernels.py [--repeat 7] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from cryamabe import _backend
from cryamabe.lattice import make_lattice, sample

LATTICES = [(8, 8, 32), (16, 16, 64), (32, 32, 128)]
KAPPA = 0.25


def _cases(lat, u):
    dt = 1e-5
    return {
        "sublaplacian": lambda: _backend.sublaplacian(u, lat, KAPPA),
        "flow_eval": lambda: _backend.flow_eval(u, lat, KAPPA, None, True),
        "rk4_step": lambda: _backend.rk4_step(u, lat, KAPPA, dt),
    }


def _best(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def run(repeat: int) -> list[dict]:
    rows = []
    backends = ["python"] + (["compiled"] if _backend.compiled_available() else [])
    for counts in LATTICES:
        lat = make_lattice(1, counts)
        u = np.array((1.0 + 0.1 * sample(lat, "random", {"seed": 0, "cutoff": 3})).values)
        u = 1.0 + 0.1 * (u - 1.0) / np.abs(u - 1.0).max()
        for name in ("sublaplacian", "flow_eval", "rk4_step"):
            timing = {}
            for b in backends:
                with _backend.use_backend(b):
                    timing[b] = _best(_cases(lat, u)[name], repeat)
            row = {"lattice": "x".join(map(str, counts)), "kernel": name, **timing}
            if "compiled" in timing:
                row["speedup"] = timing["python"] / timing["compiled"]
            rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        print("compiled kernels are not built; timing the fallback only", file=sys.stderr)
    rows = run(args.repeat)
    print(f"{'lattice':>12} {'kernel':>13} {'python':>11} {'compiled':>11} {'speedup':>8}")
    for r in rows:
        comp = f"{r['compiled'] * 1e6:9.1f}us" if "compiled" in r else f"{'-':>11}"
        sp = f"{r['speedup']:7.2f}x" if "speedup" in r else f"{'-':>8}"
        print(f"{r['lattice']:>12} {r['kernel']:>13} {r['python'] * 1e6:9.1f}us {comp} {sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
