"""Kernel-level checks: loop/vectorized backend agreement and hand oracles."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from cfstab import kernels as K
from cfstab.rng import stream


def random_theta(dims, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(scale=0.7, size=K.param_count(dims))


def oracle_forward(theta, dims, x):
    """Naive triple-loop affine/ReLU composition, independent of the kernels."""
    layers = []
    off = 0
    for i in range(len(dims) - 1):
        din, dout = int(dims[i]), int(dims[i + 1])
        w = [[theta[off + o * din + j] for j in range(din)] for o in range(dout)]
        off += dout * din
        b = [theta[off + o] for o in range(dout)]
        off += dout
        layers.append((w, b))
    cur = list(x)
    for li, (w, b) in enumerate(layers):
        nxt = []
        for o in range(len(b)):
            acc = b[o]
            for j in range(len(cur)):
                acc += w[o][j] * cur[j]
            if li < len(layers) - 1 and acc < 0.0:
                acc = 0.0
            nxt.append(acc)
        cur = nxt
    return np.array(cur)


def test_forward_matches_tripleloop_oracle():
    dims = np.array([4, 8, 8, 1], dtype=np.int64)
    theta = random_theta(dims, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(50):
        x = rng.normal(size=4)
        got = K.forward_one(theta, dims, x)
        want = oracle_forward(theta, dims, x)
        assert np.max(np.abs(got - want)) <= 1e-12


@pytest.mark.parametrize("dims", [(3, 5, 2), (2, 4, 4, 1), (6, 1)])
def test_backends_agree(dims):
    dims = np.array(dims, dtype=np.int64)
    theta = random_theta(dims, seed=3)
    rng = np.random.default_rng(4)
    x = rng.normal(size=int(dims[0]))
    X = rng.normal(size=(9, int(dims[0])))
    tgrid = np.linspace(0.1, 1.0, 10)
    m = int(dims[-1])
    target = 1 if m == 1 else m - 1

    np.testing.assert_allclose(K.forward_one(theta, dims, x),
                               K._np_forward_one(theta, dims, x), rtol=0, atol=1e-12)
    np.testing.assert_allclose(K.forward_batch(theta, dims, X),
                               K._np_forward_batch(theta, dims, X), rtol=0, atol=1e-12)
    np.testing.assert_allclose(K.hidden_preacts(theta, dims, x),
                               K._np_hidden_preacts(theta, dims, x), rtol=0, atol=1e-12)
    seed_vec = np.zeros(m)
    seed_vec[0] = 1.0
    np.testing.assert_allclose(K.backward_one(theta, dims, x, seed_vec),
                               K._np_backward_one(theta, dims, x, seed_vec), rtol=0, atol=1e-12)
    s1, g1 = K.score_and_grad(theta, dims, x, target)
    s2, g2 = K._np_score_and_grad(theta, dims, x, target)
    assert abs(s1 - s2) <= 1e-12
    np.testing.assert_allclose(g1, g2, rtol=0, atol=1e-12)
    j1, gj1 = K.path_objective(theta, dims, x, tgrid, target)
    j2, gj2 = K._np_path_objective(theta, dims, x, tgrid, target)
    assert abs(j1 - j2) <= 1e-12
    np.testing.assert_allclose(gj1, gj2, rtol=0, atol=1e-12)


def test_train_backends_agree():
    dims = np.array([3, 6, 1], dtype=np.int64)
    theta = random_theta(dims, seed=5)
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 3))
    y = (rng.random(40) > 0.5).astype(np.int64)
    perms = np.stack([stream(9, ep + 1).permutation(40) for ep in range(4)]).astype(np.int64)
    t1, l1 = K.train_adam(theta, dims, X, y, 4, 16, 1e-3, 0.9, 0.999, 1e-7, perms)
    t2, l2 = K._np_train_adam(theta, dims, X, y, 4, 16, 1e-3, 0.9, 0.999, 1e-7, perms)
    np.testing.assert_allclose(t1, t2, rtol=0, atol=1e-10)
    np.testing.assert_allclose(l1, l2, rtol=0, atol=1e-10)


def oracle_adam_step(theta, g, mom, vel, t, lr, b1, b2, eps):
    """Textbook keras-variant Adam update, written independently."""
    mom = b1 * mom + (1 - b1) * g
    vel = b2 * vel + (1 - b2) * g * g
    alpha = lr * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
    return theta - alpha * mom / (np.sqrt(vel) + eps), mom, vel


def test_train_adam_matches_manual_steps():
    # Single-logit linear model, batch = full data, no shuffle: gradients are
    # computable by hand, so the optimizer trace has an independent oracle.
    dims = np.array([2, 1], dtype=np.int64)
    theta = np.array([0.5, -0.25, 0.1])  # w = (0.5, -0.25), b = 0.1
    X = np.array([[1.0, 2.0], [-1.0, 0.5], [0.3, -0.7], [2.0, 1.0]])
    y = np.array([1, 0, 1, 0], dtype=np.int64)
    perms = np.tile(np.arange(4), (3, 1)).astype(np.int64)
    got, losses = K.train_adam(theta, dims, X, y, 3, 4, 0.01, 0.9, 0.999, 1e-7, perms)

    th = theta.copy()
    mom = np.zeros(3)
    vel = np.zeros(3)
    exp_losses = []
    for step in range(1, 4):
        z = X @ th[:2] + th[2]
        s = 1.0 / (1.0 + np.exp(-z))
        loss = np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z))))
        exp_losses.append(loss)
        dz = (s - y) / 4.0
        g = np.array([dz @ X[:, 0], dz @ X[:, 1], dz.sum()])
        th, mom, vel = oracle_adam_step(th, g, mom, vel, step, 0.01, 0.9, 0.999, 1e-7)
    np.testing.assert_allclose(got, th, rtol=0, atol=1e-14)
    np.testing.assert_allclose(losses, exp_losses, rtol=0, atol=1e-14)


def test_zero_parameters_forward_is_zero():
    dims = np.array([3, 4, 2], dtype=np.int64)
    theta = np.zeros(K.param_count(dims))
    x = np.array([0.3, -2.0, 5.0])
    assert np.all(K.forward_one(theta, dims, x) == 0.0)


def test_numpy_fallback_env_flag():
    code = (
        "import os, json, numpy as np\n"
        "os.environ['CFSTAB_BACKEND']='numpy'\n"
        "import cfstab.kernels as K\n"
        "dims = np.array([2,3,1], dtype=np.int64)\n"
        "theta = np.arange(K.param_count(dims), dtype=np.float64)/10\n"
        "out = K.forward_one(theta, dims, np.array([0.5,-1.0]))\n"
        "print(json.dumps({'backend': K.BACKEND, 'out': out.tolist()}))\n"
    )
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                          env={**os.environ, "CFSTAB_BACKEND": "numpy"})
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(proc.stdout)
    assert doc["backend"] == "numpy"
    dims = np.array([2, 3, 1], dtype=np.int64)
    theta = np.arange(K.param_count(dims), dtype=np.float64) / 10
    here = K.forward_one(theta, dims, np.array([0.5, -1.0]))
    np.testing.assert_allclose(doc["out"], here, rtol=0, atol=1e-12)
