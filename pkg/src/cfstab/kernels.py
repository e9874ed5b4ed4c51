"""Numeric kernels for dense ReLU nets, with a numba and a pure-numpy backend.

Parameters of a network with layer widths ``dims = [d0, d1, ..., dL]`` are
packed into a flat float64 vector ``theta``: for each layer, the weight matrix
(out x in, row-major) followed by the bias vector. Hidden layers apply ReLU,
the final layer is affine. The ReLU subgradient at exactly 0 is 0, and the
activation mask everywhere uses the strict test ``pre > 0``.

Backend selection: env var ``CFSTAB_BACKEND`` = ``numba`` | ``numpy`` | ``auto``
(default auto = numba when importable). The numba kernels are explicit loops
(deterministic summation order); the numpy fallback is vectorized. Within one
backend all results are bitwise reproducible; across backends they agree to
float tolerance only.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _resolve_backend() -> str:
    flag = os.environ.get("CFSTAB_BACKEND", "auto").strip().lower()
    if flag in ("", "auto"):
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
        return "numba"
    if flag in ("numba", "numpy"):
        return flag
    raise RuntimeError(f"CFSTAB_BACKEND must be 'numba', 'numpy' or 'auto', got {flag!r}")


BACKEND = _resolve_backend()


# ---------------------------------------------------------------------------
# packed-parameter layout helpers (backend independent)
# ---------------------------------------------------------------------------

def param_count(dims) -> int:
    dims = np.asarray(dims, dtype=np.int64)
    return int(sum(dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(dims) - 1)))


def layer_offsets(dims):
    """(w_offset, b_offset) of each layer inside the packed vector."""
    dims = np.asarray(dims, dtype=np.int64)
    offs = []
    off = 0
    for i in range(len(dims) - 1):
        din, dout = int(dims[i]), int(dims[i + 1])
        offs.append((off, off + dout * din))
        off += dout * din + dout
    return offs


def pack_params(layers) -> np.ndarray:
    """Flatten [(W, b), ...] into one float64 vector."""
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel(order="C"))
        parts.append(np.asarray(b, dtype=np.float64).ravel(order="C"))
    return np.concatenate(parts) if parts else np.zeros(0)


def unpack_params(theta, dims):
    """Views (W, b) per layer into the packed vector; no copies."""
    dims = np.asarray(dims, dtype=np.int64)
    out = []
    for i, (woff, boff) in enumerate(layer_offsets(dims)):
        din, dout = int(dims[i]), int(dims[i + 1])
        w = theta[woff:woff + dout * din].reshape(dout, din)
        b = theta[boff:boff + dout]
        out.append((w, b))
    return out


# ---------------------------------------------------------------------------
# numba backend: explicit-loop kernels
# ---------------------------------------------------------------------------

def _nb_forward_batch(theta, dims, X):
    n = X.shape[0]
    L = dims.shape[0] - 1
    dmax = 0
    for i in range(dims.shape[0]):
        if dims[i] > dmax:
            dmax = dims[i]
    cur = np.zeros((n, dmax))
    nxt = np.zeros((n, dmax))
    for r in range(n):
        for j in range(dims[0]):
            cur[r, j] = X[r, j]
    off = 0
    for l in range(L):
        din = dims[l]
        dout = dims[l + 1]
        woff = off
        boff = off + dout * din
        for r in range(n):
            for o in range(dout):
                acc = theta[boff + o]
                wrow = woff + o * din
                for i in range(din):
                    acc += theta[wrow + i] * cur[r, i]
                if l < L - 1 and acc < 0.0:
                    acc = 0.0
                nxt[r, o] = acc
        off = boff + dout
        tmp = cur
        cur = nxt
        nxt = tmp
    out = np.empty((n, dims[L]))
    for r in range(n):
        for j in range(dims[L]):
            out[r, j] = cur[r, j]
    return out


def _nb_forward_one(theta, dims, x):
    L = dims.shape[0] - 1
    dmax = 0
    for i in range(dims.shape[0]):
        if dims[i] > dmax:
            dmax = dims[i]
    cur = np.zeros(dmax)
    nxt = np.zeros(dmax)
    for j in range(dims[0]):
        cur[j] = x[j]
    off = 0
    for l in range(L):
        din = dims[l]
        dout = dims[l + 1]
        woff = off
        boff = off + dout * din
        for o in range(dout):
            acc = theta[boff + o]
            wrow = woff + o * din
            for i in range(din):
                acc += theta[wrow + i] * cur[i]
            if l < L - 1 and acc < 0.0:
                acc = 0.0
            nxt[o] = acc
        off = boff + dout
        tmp = cur
        cur = nxt
        nxt = tmp
    out = np.empty(dims[L])
    for j in range(dims[L]):
        out[j] = cur[j]
    return out


def _nb_hidden_preacts(theta, dims, x):
    L = dims.shape[0] - 1
    dmax = 0
    htot = 0
    for i in range(dims.shape[0]):
        if dims[i] > dmax:
            dmax = dims[i]
    for l in range(1, L):
        htot += dims[l]
    pre = np.empty(htot)
    cur = np.zeros(dmax)
    nxt = np.zeros(dmax)
    for j in range(dims[0]):
        cur[j] = x[j]
    off = 0
    hoff = 0
    for l in range(L - 1):
        din = dims[l]
        dout = dims[l + 1]
        woff = off
        boff = off + dout * din
        for o in range(dout):
            acc = theta[boff + o]
            wrow = woff + o * din
            for i in range(din):
                acc += theta[wrow + i] * cur[i]
            pre[hoff + o] = acc
            nxt[o] = acc if acc > 0.0 else 0.0
        hoff += dout
        off = boff + dout
        tmp = cur
        cur = nxt
        nxt = tmp
    return pre


def _nb_backward_one(theta, dims, x, seed):
    """d(seed . logits)/dx for one input point."""
    L = dims.shape[0] - 1
    dmax = 0
    for i in range(dims.shape[0]):
        if dims[i] > dmax:
            dmax = dims[i]
    acts = np.zeros((L, dmax))     # input of each layer
    pre = np.zeros((L, dmax))      # hidden pre-activations (rows 0..L-2)
    offs_w = np.empty(L, np.int64)
    offs_b = np.empty(L, np.int64)
    off = 0
    for l in range(L):
        offs_w[l] = off
        offs_b[l] = off + dims[l + 1] * dims[l]
        off += dims[l + 1] * dims[l] + dims[l + 1]
    for j in range(dims[0]):
        acts[0, j] = x[j]
    for l in range(L):
        din = dims[l]
        dout = dims[l + 1]
        woff = offs_w[l]
        boff = offs_b[l]
        for o in range(dout):
            acc = theta[boff + o]
            wrow = woff + o * din
            for i in range(din):
                acc += theta[wrow + i] * acts[l, i]
            if l < L - 1:
                pre[l, o] = acc
                acts[l + 1, o] = acc if acc > 0.0 else 0.0
        # final-layer outputs are not needed here
    delta = np.zeros(dmax)
    newd = np.zeros(dmax)
    for j in range(dims[L]):
        delta[j] = seed[j]
    for l in range(L - 1, -1, -1):
        din = dims[l]
        dout = dims[l + 1]
        woff = offs_w[l]
        for i in range(din):
            acc = 0.0
            for o in range(dout):
                acc += delta[o] * theta[woff + o * din + i]
            if l > 0 and not (pre[l - 1, i] > 0.0):
                acc = 0.0
            newd[i] = acc
        tmp = delta
        delta = newd
        newd = tmp
    out = np.empty(dims[0])
    for j in range(dims[0]):
        out[j] = delta[j]
    return out


def _nb_sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _nb_score_and_grad(theta, dims, x, target):
    """(class-probability of target, its gradient wrt x)."""
    m = dims[dims.shape[0] - 1]
    logits = _nb_forward_one(theta, dims, x)
    seed = np.zeros(m)
    if m == 1:
        s = _nb_sigmoid(logits[0])
        ds = s * (1.0 - s)
        if target == 1:
            score = s
            seed[0] = ds
        else:
            score = 1.0 - s
            seed[0] = -ds
    else:
        zmax = logits[0]
        for k in range(1, m):
            if logits[k] > zmax:
                zmax = logits[k]
        se = 0.0
        for k in range(m):
            se += math.exp(logits[k] - zmax)
        score = math.exp(logits[target] - zmax) / se
        for k in range(m):
            pk = math.exp(logits[k] - zmax) / se
            if k == target:
                seed[k] = score * (1.0 - pk)
            else:
                seed[k] = -score * pk
    g = _nb_backward_one(theta, dims, x, seed)
    return score, g


def _nb_path_objective(theta, dims, xp, tgrid, target):
    """Mean target score over {t*xp : t in tgrid} and its gradient wrt xp."""
    d = dims[0]
    G = tgrid.shape[0]
    J = 0.0
    g = np.zeros(d)
    z = np.empty(d)
    for k in range(G):
        t = tgrid[k]
        for j in range(d):
            z[j] = t * xp[j]
        s, gs = _nb_score_and_grad(theta, dims, z, target)
        J += s
        for j in range(d):
            g[j] += t * gs[j]
    J /= G
    for j in range(d):
        g[j] /= G
    return J, g


def _nb_train_adam(theta0, dims, X, y, epochs, batch_size, lr, b1, b2, eps_hat, perms):
    """Mini-batch Adam on BCE (m=1) or softmax CE (m>1); keras update rule."""
    n = X.shape[0]
    L = dims.shape[0] - 1
    m_out = dims[L]
    P = theta0.shape[0]
    theta = theta0.copy()
    dmax = 0
    for i in range(dims.shape[0]):
        if dims[i] > dmax:
            dmax = dims[i]
    offs_w = np.empty(L, np.int64)
    offs_b = np.empty(L, np.int64)
    off = 0
    for l in range(L):
        offs_w[l] = off
        offs_b[l] = off + dims[l + 1] * dims[l]
        off += dims[l + 1] * dims[l] + dims[l + 1]

    mom = np.zeros(P)
    vel = np.zeros(P)
    g = np.zeros(P)
    acts = np.zeros((L + 1, batch_size, dmax))   # acts[l] = input of layer l; acts[L] = logits
    pre = np.zeros((L, batch_size, dmax))
    delta = np.zeros((batch_size, dmax))
    newd = np.zeros((batch_size, dmax))
    losses = np.zeros(epochs)
    p1 = 1.0  # running b1^t
    p2 = 1.0  # running b2^t

    for ep in range(epochs):
        total = 0.0
        for start in range(0, n, batch_size):
            end = start + batch_size
            if end > n:
                end = n
            bcur = end - start
            # forward
            for r in range(bcur):
                src = perms[ep, start + r]
                for j in range(dims[0]):
                    acts[0, r, j] = X[src, j]
            for l in range(L):
                din = dims[l]
                dout = dims[l + 1]
                woff = offs_w[l]
                boff = offs_b[l]
                for r in range(bcur):
                    for o in range(dout):
                        acc = theta[boff + o]
                        wrow = woff + o * din
                        for i in range(din):
                            acc += theta[wrow + i] * acts[l, r, i]
                        if l < L - 1:
                            pre[l, r, o] = acc
                            acts[l + 1, r, o] = acc if acc > 0.0 else 0.0
                        else:
                            acts[L, r, o] = acc
            # loss and dL/dlogits (mean over batch)
            if m_out == 1:
                for r in range(bcur):
                    z = acts[L, r, 0]
                    yv = float(y[perms[ep, start + r]])
                    az = z if z >= 0.0 else -z
                    total += (z if z > 0.0 else 0.0) - z * yv + math.log1p(math.exp(-az))
                    delta[r, 0] = (_nb_sigmoid(z) - yv) / bcur
            else:
                for r in range(bcur):
                    zmax = acts[L, r, 0]
                    for k in range(1, m_out):
                        if acts[L, r, k] > zmax:
                            zmax = acts[L, r, k]
                    se = 0.0
                    for k in range(m_out):
                        se += math.exp(acts[L, r, k] - zmax)
                    lab = y[perms[ep, start + r]]
                    total += zmax + math.log(se) - acts[L, r, lab]
                    for k in range(m_out):
                        pk = math.exp(acts[L, r, k] - zmax) / se
                        if k == lab:
                            pk -= 1.0
                        delta[r, k] = pk / bcur
            # backward: parameter grads + input deltas
            for l in range(L - 1, -1, -1):
                din = dims[l]
                dout = dims[l + 1]
                woff = offs_w[l]
                boff = offs_b[l]
                for o in range(dout):
                    wrow = woff + o * din
                    accb = 0.0
                    for r in range(bcur):
                        accb += delta[r, o]
                    g[boff + o] = accb
                    for i in range(din):
                        accw = 0.0
                        for r in range(bcur):
                            accw += delta[r, o] * acts[l, r, i]
                        g[wrow + i] = accw
                if l > 0:
                    for r in range(bcur):
                        for i in range(din):
                            acc = 0.0
                            for o in range(dout):
                                acc += delta[r, o] * theta[woff + o * din + i]
                            if not (pre[l - 1, r, i] > 0.0):
                                acc = 0.0
                            newd[r, i] = acc
                    tmp = delta
                    delta = newd
                    newd = tmp
            # Adam step (keras variant: eps_hat added to sqrt of uncorrected v)
            p1 *= b1
            p2 *= b2
            alpha = lr * math.sqrt(1.0 - p2) / (1.0 - p1)
            for p in range(P):
                mom[p] = b1 * mom[p] + (1.0 - b1) * g[p]
                vel[p] = b2 * vel[p] + (1.0 - b2) * g[p] * g[p]
                theta[p] -= alpha * mom[p] / (math.sqrt(vel[p]) + eps_hat)
        losses[ep] = total / n
    return theta, losses


# ---------------------------------------------------------------------------
# numpy backend: vectorized equivalents
# ---------------------------------------------------------------------------

def _np_forward_layers(theta, dims, X):
    """All layer inputs plus logits; X is (n, d0)."""
    layers = unpack_params(theta, dims)
    acts = [X]
    cur = X
    for l, (w, b) in enumerate(layers):
        z = cur @ w.T + b
        if l < len(layers) - 1:
            cur = np.maximum(z, 0.0)
            acts.append(cur)
        else:
            acts.append(z)
    return acts


def _np_forward_batch(theta, dims, X):
    return _np_forward_layers(theta, dims, X)[-1]


def _np_forward_one(theta, dims, x):
    return _np_forward_batch(theta, dims, x[None, :])[0]


def _np_hidden_preacts(theta, dims, x):
    layers = unpack_params(theta, dims)
    cur = x
    pres = []
    for w, b in layers[:-1]:
        z = w @ cur + b
        pres.append(z)
        cur = np.maximum(z, 0.0)
    return np.concatenate(pres) if pres else np.zeros(0)


def _np_backward_batch(theta, dims, X, seeds):
    """d(seeds[r] . logits[r])/dX[r] for each row r."""
    layers = unpack_params(theta, dims)
    acts = [X]
    pres = []
    cur = X
    for l, (w, b) in enumerate(layers):
        z = cur @ w.T + b
        if l < len(layers) - 1:
            pres.append(z)
            cur = np.maximum(z, 0.0)
            acts.append(cur)
    delta = seeds
    for l in range(len(layers) - 1, -1, -1):
        w, _ = layers[l]
        delta = delta @ w
        if l > 0:
            delta = delta * (pres[l - 1] > 0.0)
    return delta


def _np_backward_one(theta, dims, x, seed):
    return _np_backward_batch(theta, dims, x[None, :], seed[None, :])[0]


def _np_sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _np_softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _np_score_and_grad(theta, dims, x, target):
    m = int(dims[-1])
    logits = _np_forward_one(theta, dims, x)
    seed = np.zeros(m)
    if m == 1:
        s = float(_np_sigmoid(logits[:1])[0])
        ds = s * (1.0 - s)
        if target == 1:
            score, seed[0] = s, ds
        else:
            score, seed[0] = 1.0 - s, -ds
    else:
        p = _np_softmax(logits)
        score = float(p[target])
        seed = -score * p
        seed[target] += score
    return score, _np_backward_one(theta, dims, x, seed)


def _np_path_objective(theta, dims, xp, tgrid, target):
    m = int(dims[-1])
    G = len(tgrid)
    Z = tgrid[:, None] * xp[None, :]
    logits = _np_forward_batch(theta, dims, Z)
    seeds = np.zeros((G, m))
    if m == 1:
        s = _np_sigmoid(logits[:, 0])
        ds = s * (1.0 - s)
        if target == 1:
            scores, seeds[:, 0] = s, ds
        else:
            scores, seeds[:, 0] = 1.0 - s, -ds
    else:
        p = _np_softmax(logits)
        scores = p[:, target]
        seeds = -scores[:, None] * p
        seeds[np.arange(G), target] += scores
    grads = _np_backward_batch(theta, dims, Z, seeds)
    J = float(scores.mean())
    g = (tgrid[:, None] * grads).sum(axis=0) / G
    return J, g


def _np_train_adam(theta0, dims, X, y, epochs, batch_size, lr, b1, b2, eps_hat, perms):
    n = X.shape[0]
    m_out = int(dims[-1])
    theta = theta0.copy()
    layers = unpack_params(theta, dims)          # views: updates write through
    P = theta.shape[0]
    mom = np.zeros(P)
    vel = np.zeros(P)
    g = np.zeros(P)
    g_views = unpack_params(g, dims)
    losses = np.zeros(epochs)
    p1 = 1.0
    p2 = 1.0
    for ep in range(epochs):
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perms[ep, start:min(start + batch_size, n)]
            bcur = len(idx)
            xb = X[idx]
            yb = y[idx]
            # forward
            acts = [xb]
            pres = []
            cur = xb
            for l, (w, b) in enumerate(layers):
                z = cur @ w.T + b
                if l < len(layers) - 1:
                    pres.append(z)
                    cur = np.maximum(z, 0.0)
                    acts.append(cur)
                else:
                    logits = z
            if m_out == 1:
                z0 = logits[:, 0]
                yv = yb.astype(np.float64)
                total += float(np.sum(np.maximum(z0, 0.0) - z0 * yv + np.log1p(np.exp(-np.abs(z0)))))
                delta = ((_np_sigmoid(z0) - yv) / bcur)[:, None]
            else:
                zmax = logits.max(axis=1, keepdims=True)
                se = np.exp(logits - zmax).sum(axis=1)
                total += float(np.sum(zmax[:, 0] + np.log(se) - logits[np.arange(bcur), yb]))
                delta = np.exp(logits - zmax) / se[:, None]
                delta[np.arange(bcur), yb] -= 1.0
                delta /= bcur
            # backward
            for l in range(len(layers) - 1, -1, -1):
                w, _ = layers[l]
                gw, gb = g_views[l]
                gw[:] = delta.T @ acts[l]
                gb[:] = delta.sum(axis=0)
                if l > 0:
                    delta = (delta @ w) * (pres[l - 1] > 0.0)
            # Adam step
            p1 *= b1
            p2 *= b2
            alpha = lr * math.sqrt(1.0 - p2) / (1.0 - p1)
            mom *= b1
            mom += (1.0 - b1) * g
            vel *= b2
            vel += (1.0 - b2) * g * g
            theta -= alpha * mom / (np.sqrt(vel) + eps_hat)
        losses[ep] = total / n
    return theta, losses


# ---------------------------------------------------------------------------
# backend binding
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    _jit = njit(cache=True, nogil=True)
    # rebind callees first so the jitted callers resolve them as dispatchers
    _nb_sigmoid = _jit(_nb_sigmoid)
    _nb_forward_batch = _jit(_nb_forward_batch)
    _nb_forward_one = _jit(_nb_forward_one)
    _nb_hidden_preacts = _jit(_nb_hidden_preacts)
    _nb_backward_one = _jit(_nb_backward_one)
    _nb_score_and_grad = _jit(_nb_score_and_grad)
    _nb_path_objective = _jit(_nb_path_objective)
    _nb_train_adam = _jit(_nb_train_adam)

    forward_batch = _nb_forward_batch
    forward_one = _nb_forward_one
    hidden_preacts = _nb_hidden_preacts
    backward_one = _nb_backward_one
    score_and_grad = _nb_score_and_grad
    path_objective = _nb_path_objective
    train_adam = _nb_train_adam
else:
    forward_batch = _np_forward_batch
    forward_one = _np_forward_one
    hidden_preacts = _np_hidden_preacts
    backward_one = _np_backward_one
    score_and_grad = _np_score_and_grad
    path_objective = _np_path_objective
    train_adam = _np_train_adam
