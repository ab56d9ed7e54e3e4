"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times each kernel on representative shapes with both backends, checks that
they agree, and prints one row per (kernel, shape).
"""
import argparse
import json
import sys
import timeit

import numpy as np

from lpdvoretzky import kernels

CASES = [
    # (kernel, rows, atoms, q)
    ("power_sums", 4096, 1024, 3.0),
    ("power_sums", 4096, 1024, 4.0),
    ("power_sums", 2048, 256, 2.5),
    ("signed_powers", 2048, 256, 3.0),
    ("signed_powers", 2048, 256, 4.5),
    ("farthest_update", 300_000, 3, None),
    ("farthest_update", 800_000, 8, None),
]


def _args(kernel, rows, atoms, q, g):
    if kernel == "farthest_update":
        C = g.standard_normal((rows, atoms))
        C /= np.linalg.norm(C, axis=1)[:, None]
        return lambda b: kernels.farthest_update(C, C[0], np.full(rows, np.inf), backend=b)
    P = g.standard_normal((rows, atoms))
    c = g.uniform(0.5, 1.5, atoms)
    fn = getattr(kernels, kernel)
    return lambda b: fn(P, c, q, backend=b)


def run(repeat=5, seed=0):
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the NumPy backend only", file=sys.stderr)
    g = np.random.default_rng(seed)
    out = []
    for kernel, rows, atoms, q in CASES:
        call = _args(kernel, rows, atoms, q, g)
        row = {"kernel": kernel, "rows": rows, "width": atoms, "q": q}
        results = {}
        for b in backends:
            results[b] = call(b)
            row[b] = min(timeit.repeat(lambda: call(b), number=1, repeat=repeat))
        if len(results) == 2:
            a, c = results["python"], results["cython"]
            row["agree"] = bool(a == c) if kernel == "farthest_update" else bool(np.allclose(a, c, rtol=1e-12, atol=0))
            row["speedup"] = row["python"] / row["cython"]
        out.append(row)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    a = ap.parse_args(argv)
    rows = run(a.repeat)
    print(f"{'kernel':16s} {'shape':>14s} {'q':>4s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s} agree")
    for r in rows:
        shape = f"{r['rows']}x{r['width']}"
        q = "-" if r["q"] is None else f"{r['q']:g}"
        cy = f"{1e3 * r['cython']:10.2f}" if "cython" in r else f"{'-':>10s}"
        sp = f"{r['speedup']:8.2f}" if "speedup" in r else f"{'-':>8s}"
        print(f"{r['kernel']:16s} {shape:>14s} {q:>4s} {1e3 * r['python']:10.2f} {cy} {sp} {r.get('agree', '-')}")
    if a.json:
        with open(a.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
