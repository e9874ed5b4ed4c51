"""Dense ReLU networks: deterministic init, training, and differentiation.

Networks are immutable once constructed. Parameters live in a packed float64
vector (see :mod:`cfstab.kernels`); ``layers`` exposes read-only (W, b) views
with W of shape out x in. Binary classifiers use a single logit with sigmoid
readout, multi-class heads use argmax over logits.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import kernels
from .errors import DataError, NumericError
from .rng import stream

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths [input, hidden..., output]; hidden layers are ReLU."""

    layer_dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise ValueError("layer_dims needs at least input and output widths")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer widths must be >= 1, got {dims}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def hidden_count(self) -> int:
        return sum(self.layer_dims[1:-1])

    def dims_array(self) -> np.ndarray:
        return np.asarray(self.layer_dims, dtype=np.int64)


@dataclass(frozen=True)
class TrainConfig:
    """Adam hyperparameters; defaults match the keras optimizer defaults."""

    seed: int
    epochs: int
    batch_size: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-7
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class ActivationPattern:
    """One strict-threshold bit (pre-activation > 0) per hidden neuron."""

    bits: tuple

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=bool)


class Network:
    """Immutable parameter container tied to a NetworkSpec."""

    __slots__ = ("spec", "theta", "meta", "_dims")

    def __init__(self, spec: NetworkSpec, theta: np.ndarray, meta: dict | None = None):
        theta = np.asarray(theta, dtype=np.float64)
        expected = kernels.param_count(spec.layer_dims)
        if theta.shape != (expected,):
            raise ValueError(f"theta has {theta.shape}, spec needs ({expected},)")
        if not np.all(np.isfinite(theta)):
            raise NumericError("network parameters contain NaN/Inf")
        theta = theta.copy()
        theta.setflags(write=False)
        self.spec = spec
        self.theta = theta
        self.meta = dict(meta or {})
        self._dims = spec.dims_array()

    @property
    def layers(self):
        return kernels.unpack_params(self.theta, self._dims)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.spec.layer_dims, dtype=np.int64).tobytes())
        h.update(self.theta.tobytes())
        return h.hexdigest()


def init_network(spec: NetworkSpec, seed: int) -> Network:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.

    Weights are drawn layer by layer from a Philox stream keyed on ``seed``,
    so identical (spec, seed) gives byte-identical parameters.
    """
    rng = stream(seed)
    layers = []
    dims = spec.layer_dims
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return Network(spec, kernels.pack_params(layers), meta={"seed": int(seed)})


def _check_point(net: Network, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (net.spec.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.spec.input_dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains NaN/Inf")
    return x


def forward(net: Network, x) -> np.ndarray:
    """Logit vector f(x), shape (m,)."""
    return kernels.forward_one(net.theta, net._dims, _check_point(net, x))


def forward_batch(net: Network, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.spec.input_dim:
        raise ValueError(f"batch has shape {X.shape}, expected (n, {net.spec.input_dim})")
    return kernels.forward_batch(net.theta, net._dims, X)


def predict(net: Network, x) -> int:
    """Class decision: sigma(f) >= 0.5 for m=1 (ties to class 1), else argmax."""
    logits = forward(net, x)
    if net.spec.output_dim == 1:
        return 1 if logits[0] >= 0.0 else 0
    return int(np.argmax(logits))


def predict_batch(net: Network, X) -> np.ndarray:
    logits = forward_batch(net, X)
    if net.spec.output_dim == 1:
        return (logits[:, 0] >= 0.0).astype(np.int64)
    return np.argmax(logits, axis=1).astype(np.int64)


def grad_input(net: Network, x, logit_index: int = 0) -> np.ndarray:
    """Exact reverse-mode d f_logit_index / dx; ReLU subgradient at 0 is 0."""
    if not 0 <= logit_index < net.spec.output_dim:
        raise ValueError(f"logit_index {logit_index} out of range")
    seed_vec = np.zeros(net.spec.output_dim)
    seed_vec[logit_index] = 1.0
    return kernels.backward_one(net.theta, net._dims, _check_point(net, x), seed_vec)


def activation_pattern(net: Network, x) -> ActivationPattern:
    pre = kernels.hidden_preacts(net.theta, net._dims, _check_point(net, x))
    return ActivationPattern(bits=tuple(bool(v) for v in (pre > 0.0)))


def local_linear_map(net: Network, x):
    """(W_p, b_p) with f(z) = W_p z + b_p on x's activation region.

    W_p rows are the per-logit input gradients; shapes (m, d) and (m,).
    """
    x = _check_point(net, x)
    m, d = net.spec.output_dim, net.spec.input_dim
    w_p = np.empty((m, d))
    for i in range(m):
        w_p[i] = grad_input(net, x, i)
    b_p = forward(net, x) - w_p @ x
    return w_p, b_p


def train(net: Network, dataset, config: TrainConfig) -> Network:
    """Mini-batch Adam with cross-entropy; deterministic in (data, config).

    Batch order is an epoch-wise permutation drawn from a Philox stream keyed
    on (config.seed, epoch), so retraining variation comes only from the seed
    or the data. Returns a new Network; epochs=0 returns the input parameters
    unchanged. The per-epoch mean loss log lands in meta["loss_log"].
    """
    X = np.ascontiguousarray(dataset.features, dtype=np.float64)
    y = np.ascontiguousarray(dataset.labels, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot train on an empty dataset")
    if X.shape[1] != net.spec.input_dim:
        raise DataError(f"dataset dim {X.shape[1]} != network input dim {net.spec.input_dim}")
    m = net.spec.output_dim
    n_classes = m if m > 1 else 2
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError(f"labels must lie in [0, {n_classes - 1}]")

    if config.shuffle:
        perms = np.stack([stream(config.seed, ep + 1).permutation(n) for ep in range(config.epochs)]) \
            if config.epochs else np.zeros((0, n), dtype=np.int64)
    else:
        perms = np.tile(np.arange(n), (config.epochs, 1))
    perms = np.ascontiguousarray(perms, dtype=np.int64)

    theta, losses = kernels.train_adam(
        net.theta, net._dims, X, y, config.epochs, min(config.batch_size, n),
        config.learning_rate, config.beta1, config.beta2, config.eps_hat, perms)
    if not np.all(np.isfinite(losses)):
        bad = int(np.flatnonzero(~np.isfinite(losses))[0])
        raise NumericError(f"non-finite training loss at epoch {bad}")
    if not np.all(np.isfinite(theta)):
        raise NumericError("non-finite parameters after training")

    meta = {
        "seed": int(config.seed),
        "dataset_fingerprint": dataset.fingerprint,
        "train_config": asdict(config),
        "loss_log": [float(v) for v in losses],
    }
    return Network(net.spec, theta, meta=meta)


# ---------------------------------------------------------------------------
# model file IO (versioned JSON)
# ---------------------------------------------------------------------------

def model_to_json(net: Network) -> str:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": {"layer_dims": list(net.spec.layer_dims)},
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in net.layers],
        "meta": net.meta,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def model_from_json(text: str) -> Network:
    doc = json.loads(text)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(f"unsupported model format_version {doc.get('format_version')!r}")
    spec = NetworkSpec(tuple(doc["spec"]["layer_dims"]))
    layers = [(np.asarray(l["w"], dtype=np.float64), np.asarray(l["b"], dtype=np.float64))
              for l in doc["layers"]]
    dims = spec.layer_dims
    for i, (w, b) in enumerate(layers):
        if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
            raise DataError(f"layer {i} shape mismatch in model file")
    return Network(spec, kernels.pack_params(layers), meta=doc.get("meta", {}))


def save_model(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(net))


def load_model(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
