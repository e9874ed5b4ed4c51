"""Counterfactual search on trained networks.

Three generators produce counterfactual points for an origin whose prediction
differs from the target class:

* ``gen_elastic_net`` - (sub)gradient descent on a hinge classification term
  plus the elastic-net distance penalty beta*l1 + l2^2 (beta=1 for the l1
  flavor, beta=0 for l2), returning the lowest-penalty feasible iterate.
* ``gen_pgd_min_eps`` - projected gradient ascent on the target-class score
  inside l2 balls of increasing radius; the first radius that yields a class
  flip wins.
* ``gen_sns`` - stable neighbor search: projected ascent on the discretized
  path integral (1/G) sum_k sigma_target(t_k x'), t_k = k/G, inside an l2
  ball around a seed counterfactual, tracking the best feasible iterate.

All methods are pure functions of (network, input, config); the only internal
randomness is a one-shot dead-gradient jitter seeded from the model
fingerprint and the origin, so records are byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, nn
from .rng import stream

MIN_L1 = "MinL1"
MIN_L2 = "MinL2"
MIN_EPS_PGD = "MinEpsPGD"
SNS = "SNS"


@dataclass
class CounterfactualRecord:
    origin: np.ndarray
    counterfactual: np.ndarray
    method: str
    target_class: int
    success: bool
    cost_l1: float
    cost_l2: float
    iterations_used: int
    generating_model: str
    base_method: str | None = None
    radius: float | None = None          # PGD: chosen eps_c; SNS: delta
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "origin": [float(v) for v in self.origin],
            "counterfactual": [float(v) for v in self.counterfactual],
            "method": self.method,
            "base_method": self.base_method,
            "target_class": int(self.target_class),
            "success": bool(self.success),
            "cost_l1": self.cost_l1,
            "cost_l2": self.cost_l2,
            "iterations_used": int(self.iterations_used),
            "generating_model": self.generating_model,
            "radius": self.radius,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CounterfactualRecord":
        rec = cls(
            origin=np.asarray(doc["origin"], dtype=np.float64),
            counterfactual=np.asarray(doc["counterfactual"], dtype=np.float64),
            method=doc["method"],
            base_method=doc.get("base_method"),
            target_class=int(doc["target_class"]),
            success=bool(doc["success"]),
            cost_l1=float(doc["cost_l1"]),
            cost_l2=float(doc["cost_l2"]),
            iterations_used=int(doc["iterations_used"]),
            generating_model=doc["generating_model"],
            radius=doc.get("radius"),
            diagnostics=doc.get("diagnostics", {}),
        )
        d = rec.origin - rec.counterfactual
        if abs(float(np.abs(d).sum()) - rec.cost_l1) > 1e-12 or \
           abs(float(np.sqrt(d @ d)) - rec.cost_l2) > 1e-12:
            raise ValueError("stored costs do not match origin/counterfactual")
        return rec

    def validate_against(self, net: nn.Network) -> None:
        if self.success and nn.predict(net, self.counterfactual) != self.target_class:
            raise ValueError("success record does not flip to the target class")


def _record(net, origin, point, method, target, success, iters,
            base_method=None, radius=None, diagnostics=None) -> CounterfactualRecord:
    d = origin - point
    return CounterfactualRecord(
        origin=np.array(origin, dtype=np.float64),
        counterfactual=np.array(point, dtype=np.float64),
        method=method,
        base_method=base_method,
        target_class=int(target),
        success=bool(success),
        cost_l1=float(np.abs(d).sum()),
        cost_l2=float(np.sqrt(d @ d)),
        iterations_used=int(iters),
        generating_model=net.fingerprint(),
        radius=radius,
        diagnostics=dict(diagnostics or {}),
    )


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def read_records(path, net: nn.Network | None = None):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = CounterfactualRecord.from_dict(json.loads(line))
            if net is not None:
                rec.validate_against(net)
            out.append(rec)
    return out


@dataclass(frozen=True)
class SnsConfig:
    delta: float
    steps: int = 200
    grid_points: int = 10
    step_size: float = 0.01

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.steps < 1 or self.step_size <= 0:
            raise ValueError("steps must be >= 1 and step_size > 0")


def multiclass_score(net: nn.Network, x, target: int) -> float:
    """Probability-style score of the target class: sigmoid for m=1, softmax for m>1."""
    m = net.spec.output_dim
    if not 0 <= target < (2 if m == 1 else m):
        raise ValueError(f"target {target} out of range")
    s, _ = kernels.score_and_grad(net.theta, net._dims, nn._check_point(net, x), target)
    return float(s)


def _score_grad(net, x, target):
    return kernels.score_and_grad(net.theta, net._dims, x, target)


def _check_target(net, target):
    m = net.spec.output_dim
    n_classes = 2 if m == 1 else m
    if not 0 <= target < n_classes:
        raise ValueError(f"target {target} out of range for {n_classes} classes")


def _jitter_start(net, x, scale=1e-3):
    """Deterministic one-shot jitter used when a start point has dead gradients."""
    key = int.from_bytes(np.asarray(x, dtype=np.float64).tobytes()[:8], "little")
    rng = stream(int(net.fingerprint()[:15], 16), key)
    return x + scale * rng.standard_normal(x.shape[0])


def _margin_and_grad(net, x, target):
    """Classification margin f_target - max_other and its gradient."""
    m = net.spec.output_dim
    if m == 1:
        f = nn.forward(net, x)[0]
        g = nn.grad_input(net, x, 0)
        return (f, g) if target == 1 else (-f, -g)
    logits = nn.forward(net, x)
    others = [k for k in range(m) if k != target]
    j = others[int(np.argmax(logits[others]))]
    g = nn.grad_input(net, x, target) - nn.grad_input(net, x, j)
    return float(logits[target] - logits[j]), g


def gen_elastic_net(net: nn.Network, x, target: int, beta: float, confidence: float,
                    max_steps: int, step_size: float) -> CounterfactualRecord:
    """Min-cost counterfactual via elastic-net descent.

    Minimizes c*max(kappa - margin, 0) + beta*||x'-x||_1 + ||x'-x||_2^2 with
    kappa = logit(confidence). The hinge weight c starts at 1 and doubles
    (restarting from x) until some iterate flips the class, mirroring the
    usual constant search for this attack family; among feasible iterates the
    one with the lowest distance penalty is returned.
    """
    _check_target(net, target)
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0,1)")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    x = nn._check_point(net, x)
    if nn.predict(net, x) == target:
        raise ValueError("origin already predicts the target class")
    kappa = math.log(confidence / (1.0 - confidence))

    diagnostics = {}
    start = x
    m0, g0 = _margin_and_grad(net, start, target)
    if not np.any(g0):
        start = _jitter_start(net, x)
        diagnostics["jittered"] = True

    best = None
    best_pen = math.inf
    best_iter = 0
    total_steps = 0
    c = 1.0
    for _ in range(9):  # hinge-weight doublings
        xp = start.copy()
        found_this_round = False
        for it in range(1, max_steps + 1):
            margin, gm = _margin_and_grad(net, xp, target)
            d = xp - x
            grad = beta * np.sign(d) + 2.0 * d
            if margin < kappa:
                grad = grad - c * gm
            xp = xp - step_size * grad
            total_steps += 1
            if nn.predict(net, xp) == target:
                if not found_this_round and "first_feasible_step" not in diagnostics:
                    diagnostics["first_feasible_step"] = total_steps
                found_this_round = True
                pen = beta * float(np.abs(xp - x).sum()) + float((xp - x) @ (xp - x))
                if pen < best_pen:
                    best_pen = pen
                    best = xp.copy()
                    best_iter = it
        if found_this_round:
            break
        c *= 2.0
    diagnostics["total_steps"] = total_steps
    diagnostics["hinge_weight"] = c
    if best is None:
        return _record(net, x, xp, MIN_L1 if beta > 0 else MIN_L2, target,
                       False, total_steps, diagnostics=diagnostics)
    return _record(net, x, best, MIN_L1 if beta > 0 else MIN_L2, target,
                   True, best_iter, diagnostics=diagnostics)


def gen_pgd_min_eps(net: nn.Network, x, target: int, max_eps: float,
                    n_interp: int = 10, max_steps: int = 100) -> CounterfactualRecord:
    """Min-epsilon PGD: grid of radii eps_k = k*max_eps/n_interp, k=1..n_interp.

    For each radius, normalized gradient ascent on the target score with step
    2*eps_k/max_steps, l2-projected onto B(x, eps_k); the first radius whose
    iterate flips the class is recorded.
    """
    _check_target(net, target)
    if max_eps <= 0:
        raise ValueError("max_eps must be > 0")
    if max_steps < 1 or n_interp < 1:
        raise ValueError("max_steps and n_interp must be >= 1")
    x = nn._check_point(net, x)
    if nn.predict(net, x) == target:
        raise ValueError("origin already predicts the target class")

    diagnostics = {}
    start = x
    _, g0 = _score_grad(net, x, target)
    if not np.any(g0):
        start = _jitter_start(net, x)
        diagnostics["jittered"] = True

    total_steps = 0
    xp = start.copy()
    for k in range(1, n_interp + 1):
        eps_k = k * max_eps / n_interp
        step = 2.0 * eps_k / max_steps
        xp = start.copy()
        for _ in range(max_steps):
            _, g = _score_grad(net, xp, target)
            gn = float(np.sqrt(g @ g))
            total_steps += 1
            if gn == 0.0:
                break
            xp = xp + step * g / gn
            d = xp - x
            dn = float(np.sqrt(d @ d))
            if dn > eps_k:
                xp = x + (d / dn) * eps_k
            if nn.predict(net, xp) == target:
                diagnostics["total_steps"] = total_steps
                return _record(net, x, xp, MIN_EPS_PGD, target, True, total_steps,
                               radius=float(eps_k), diagnostics=diagnostics)
    diagnostics["total_steps"] = total_steps
    return _record(net, x, xp, MIN_EPS_PGD, target, False, total_steps,
                   diagnostics=diagnostics)


def sns_objective(net: nn.Network, xp, grid_points: int, target: int) -> float:
    """Discretized path integral (1/G) sum_k sigma_target(t_k xp), t_k = k/G."""
    tgrid = np.arange(1, grid_points + 1, dtype=np.float64) / grid_points
    J, _ = kernels.path_objective(net.theta, net._dims, nn._check_point(net, xp), tgrid, target)
    return float(J)


def gen_sns(net: nn.Network, start: CounterfactualRecord, config: SnsConfig) -> CounterfactualRecord:
    """Refine a counterfactual into a stable neighbor.

    Projected gradient ascent on the path-integral confidence objective inside
    B2(center, delta) where center is the seed counterfactual; the feasible
    iterate with the highest objective is returned (the center is feasible, so
    the result always is).
    """
    if not start.success:
        raise ValueError("SNS needs a successful starting counterfactual")
    center = np.array(start.counterfactual, dtype=np.float64)
    target = start.target_class
    tgrid = np.arange(1, config.grid_points + 1, dtype=np.float64) / config.grid_points

    best = center.copy()
    best_j, _ = kernels.path_objective(net.theta, net._dims, center, tgrid, target)
    best_iter = 0
    xp = center.copy()
    for it in range(1, config.steps + 1):
        _, g = kernels.path_objective(net.theta, net._dims, xp, tgrid, target)
        gn = float(np.sqrt(g @ g))
        if gn == 0.0:
            break
        xp = xp + config.step_size * g / gn
        d = xp - center
        dn = float(np.sqrt(d @ d))
        if dn > config.delta:
            xp = center + (d / dn) * config.delta
        j, _ = kernels.path_objective(net.theta, net._dims, xp, tgrid, target)
        if j > best_j and nn.predict(net, xp) == target:
            best_j = j
            best = xp.copy()
            best_iter = it
    return _record(net, start.origin, best, SNS, target, True, best_iter,
                   base_method=start.method, radius=float(config.delta),
                   diagnostics={"objective": float(best_j)})
