"""Compare the numba and pure-numpy kernel backends.

Times every kernel on inputs shaped like the toy-model workload, checks
that both backends agree, then times a short end-to-end generation run in a
subprocess per backend (the backend is fixed at import time).

    python benchmarks/bench_kernels.py [--repeat 200] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from iqrip import kernels

E2E_SNIPPET = """
import time
from iqrip import SamplerConfig, default_model, default_prompt, generate, kernels
m = default_model(); pr = default_prompt(m)
generate(m, SamplerConfig(seed=0, max_len=20), "iqr-ip", pr)  # warm caches and JIT
t = time.perf_counter()
for s in range(20):
    generate(m, SamplerConfig(seed=s), "iqr-ip", pr)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def make_inputs(rng: np.random.Generator) -> dict:
    probs = np.sort(rng.dirichlet(np.full(537, 0.3)))[::-1].copy()
    codes = rng.integers(0, 300, size=5000).astype(np.int64)
    lower = rng.dirichlet(np.ones(537))
    next_ids = np.sort(rng.choice(537, size=40, replace=False)).astype(np.int64)
    counts = rng.integers(1, 50, size=40).astype(np.float64)
    return {
        "inverse_cdf_index": (probs, 0.731),
        "assign_bands": (probs[:150], 0.02, 0.01, 0.001, -0.01, True),
        "window_entropies": (codes, 200, 300),
        "mix_level": (lower, next_ids, counts, float(counts.sum()), 0.01, 0.8),
    }


def bench(repeat: int) -> list[dict]:
    if kernels.numba_impl is None:
        sys.exit("numba is not importable; nothing to compare")
    inputs = make_inputs(np.random.default_rng(0))
    rows = []
    for name, args in inputs.items():
        fast = getattr(kernels.numba_impl, name)
        slow = getattr(kernels.numpy_impl, name)
        a, b = fast(*args), slow(*args)  # first call compiles
        agree = bool(np.allclose(a, b, rtol=0, atol=1e-12))
        t_fast = min(timeit.repeat(lambda: fast(*args), number=repeat, repeat=3)) / repeat
        t_slow = min(timeit.repeat(lambda: slow(*args), number=repeat, repeat=3)) / repeat
        rows.append({"kernel": name, "numba_us": t_fast * 1e6, "numpy_us": t_slow * 1e6,
                     "speedup": t_slow / t_fast, "agree": agree})
    return rows


def end_to_end() -> dict:
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, IQRIP_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", E2E_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, seconds = res.stdout.split()
        out[backend] = float(seconds)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--skip-e2e", action="store_true")
    ap.add_argument("--json", default=None, help="also write results to this file")
    args = ap.parse_args()

    rows = bench(args.repeat)
    print(f"{'kernel':<20}{'numba us':>12}{'numpy us':>12}{'speedup':>10}  agree")
    for r in rows:
        print(f"{r['kernel']:<20}{r['numba_us']:>12.2f}{r['numpy_us']:>12.2f}{r['speedup']:>9.1f}x  {r['agree']}")
    result = {"kernels": rows}
    if not args.skip_e2e:
        e2e = end_to_end()
        result["generate_20x200_s"] = e2e
        print("generate 20 x 200 tokens: " + ", ".join(f"{k} {v:.2f}s" for k, v in e2e.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main()
