"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each workload in a fresh subprocess per backend (the backend is fixed at
import time by CFSTAB_BACKEND) and prints a timing table.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, sys, time
import numpy as np
import cfstab.kernels as K
from cfstab import data, nn
from cfstab.rng import stream

def timeit(fn, repeat):
    fn()  # warm-up (JIT compile on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best

repeat = int(sys.argv[1])
dims = np.array([2, 32, 16, 1], dtype=np.int64)
rng = np.random.default_rng(0)
theta = rng.normal(scale=0.5, size=K.param_count(dims))
X = rng.normal(size=(4096, 2))
x = rng.normal(size=2)
tgrid = np.linspace(0.1, 1.0, 10)

ds = data.synth_2d("blobs", 500, 0.35, seed=7)
tr, _ = data.split(ds, 0.7, seed=11)
spec = nn.NetworkSpec((2, 32, 16, 1))
cfg = nn.TrainConfig(seed=101, epochs=20, batch_size=32)
net0 = nn.init_network(spec, 101)

def bench_forward_batch():
    K.forward_batch(theta, dims, X)

def bench_grad_point():
    for _ in range(2000):
        K.score_and_grad(theta, dims, x, 1)

def bench_path_objective():
    for _ in range(500):
        K.path_objective(theta, dims, x, tgrid, 1)

def bench_train():
    nn.train(net0, tr, cfg)

out = {"backend": K.BACKEND}
for name, fn in [("forward_batch_4096", bench_forward_batch),
                 ("score_and_grad_x2000", bench_grad_point),
                 ("path_objective_x500", bench_path_objective),
                 ("train_20_epochs", bench_train)]:
    out[name] = timeit(fn, repeat)
print(json.dumps(out))
"""


def run_backend(backend: str, repeat: int) -> dict:
    env = dict(os.environ, CFSTAB_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)],
                          capture_output=True, text=True, env=env)
    if proc.returncode != 0:
        raise SystemExit(f"{backend} worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    results = {b: run_backend(b, args.repeat) for b in ("numba", "numpy")}
    names = [k for k in results["numba"] if k != "backend"]
    width = max(len(n) for n in names)
    print(f"{'workload'.ljust(width)}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in names:
        a = results["numba"][name]
        b = results["numpy"][name]
        print(f"{name.ljust(width)}  {a * 1e3:>8.2f}ms  {b * 1e3:>8.2f}ms  {b / a:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
