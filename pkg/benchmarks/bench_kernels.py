"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints per-kernel wall times for both backends and checks that their outputs
are bit-identical.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from symmatch import _kernels_py
from symmatch.geom.geodesic import _csr
from symmatch.train.synth import make_template

try:
    from symmatch import _kernels as compiled
except ImportError:  # no build available
    compiled = None


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    mesh, _ = make_template(2000)
    indptr, indices, weights = _csr(len(mesh), mesh.edges(), mesh.positions)
    sources = np.arange(0, len(mesh), 10, dtype=np.int64)
    yield "dijkstra 2000 verts x 200 sources", lambda k: k.dijkstra(indptr, indices, weights, sources, len(mesh))
    q = rng.standard_normal((3000, 20))
    d = rng.standard_normal((3000, 20))
    yield "nn_argmin 3000 x 3000, k=20", lambda k: k.nn_argmin(q, d)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':40s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}  identical")
    for name, run in cases(rng):
        tp, op = _time(lambda: run(_kernels_py), args.repeat)
        if compiled is None:
            print(f"{name:40s} {tp:10.4f} {'n/a':>11s} {'':>8s}  -")
            continue
        tc, oc = _time(lambda: run(compiled), args.repeat)
        if isinstance(op, tuple):
            same = all(np.asarray(a).tobytes() == np.asarray(b).tobytes() for a, b in zip(op, oc))
        else:
            same = op.tobytes() == oc.tobytes()
        print(f"{name:40s} {tp:10.4f} {tc:11.4f} {tp / tc:7.1f}x  {same}")


if __name__ == "__main__":
    main()
