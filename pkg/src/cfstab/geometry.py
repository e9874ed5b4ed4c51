"""Decision-boundary geometry of binary ReLU nets and numerical verifiers.

Inside one activation region a single-logit net is affine, f(z) = n.z + c, so
each boundary piece extends to the hyperplane {z : n.z + c = 0}. Probes are
found by bisecting logit sign flips along rays; the local linear map at the
flip gives (n, c). Verifiers sweep sampled configurations for

* the near/far boundary-pair construction (projection onto one hyperplane
  never decreasing the distance to the other),
* the lower bound on the gradient norm via the radial directional derivative,
* the Lipschitz bound on the change of path-averaged sigmoid influence under
  top-layer weight perturbations,

and report {checked, passed, worst_margin, counterexamples}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import DegenerateBoundaryError
from .nn import ActivationPattern, Network, NetworkSpec
from .rng import stream

_PARALLEL_TOL = 1e-12


@dataclass
class BoundaryProbe:
    """One affine boundary piece: {z : normal.z + offset = 0}."""

    pattern: ActivationPattern
    normal: np.ndarray
    offset: float
    point: np.ndarray  # a point on the actual decision boundary in this region

    def __post_init__(self):
        if not float(self.normal @ self.normal) > 0.0:
            raise ValueError("boundary probe needs a nonzero normal")

    def signed(self, x) -> float:
        return float(self.normal @ x + self.offset)


def distance_to_hyperplane(x, probe: BoundaryProbe) -> float:
    """|n.x + offset| / ||n||_2."""
    nrm = float(np.sqrt(probe.normal @ probe.normal))
    if nrm == 0.0:
        raise ValueError("zero normal")
    return abs(probe.signed(x)) / nrm


def _oriented(probe: BoundaryProbe, x):
    """(normal, offset) flipped so the signed distance of x is positive."""
    if probe.signed(x) >= 0:
        return probe.normal, probe.offset
    return -probe.normal, -probe.offset


def find_boundary_probes(net: Network, x, n_rays: int = 24, seed: int = 0,
                         max_radius: float = 6.0, scan_points: int = 64,
                         bisect_iters: int = 80):
    """Probe boundary pieces around x by bisecting sign flips along random rays."""
    if net.spec.output_dim != 1:
        raise ValueError("boundary probing supports single-logit nets only")
    x = np.asarray(x, dtype=np.float64)
    f0 = float(nn.forward(net, x)[0])
    if f0 == 0.0:
        raise ValueError("probe origin sits exactly on the boundary")
    rng = stream(seed)
    probes = []
    seen = set()
    radii = np.linspace(0.0, max_radius, scan_points + 1)[1:]
    for _ in range(n_rays):
        u = rng.standard_normal(x.shape[0])
        u /= np.sqrt(u @ u)
        lo = 0.0
        hi = None
        for r in radii:
            if float(nn.forward(net, x + r * u)[0]) * f0 < 0.0:
                hi = r
                break
            lo = r
        if hi is None:
            continue
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            if float(nn.forward(net, x + mid * u)[0]) * f0 < 0.0:
                hi = mid
            else:
                lo = mid
        z = x + 0.5 * (lo + hi) * u
        pattern = nn.activation_pattern(net, z)
        if pattern.bits in seen:
            continue
        seen.add(pattern.bits)
        w_p, b_p = nn.local_linear_map(net, z)
        if not np.any(w_p[0]):
            continue
        probes.append(BoundaryProbe(pattern, w_p[0].copy(), float(b_p[0]), z))
    return probes


def lemma1_threshold(x, h1: BoundaryProbe, h2: BoundaryProbe) -> float:
    """||x||_2 / (1/cos(theta) - cos(theta)) for the angle between the normals.

    Normals are oriented toward x first. Returns +inf as cos(theta) -> 1 (the
    coincident-boundary regime) and 0 at theta = pi/2; negative for obtuse
    angles, where any positive offset works.
    """
    x = np.asarray(x, dtype=np.float64)
    n1, _ = _oriented(h1, x)
    n2, _ = _oriented(h2, x)
    c = float(n1 @ n2 / (np.sqrt(n1 @ n1) * np.sqrt(n2 @ n2)))
    c = max(-1.0, min(1.0, c))
    if c >= 1.0 - _PARALLEL_TOL:
        return math.inf
    if c == 0.0:
        return 0.0
    return float(np.sqrt(x @ x)) / (1.0 / c - c)


def construct_theorem1_point(x, h1: BoundaryProbe, h2: BoundaryProbe, eta: float) -> np.ndarray:
    """y = y' - |s2(y')| n2 / ||n2||^2 with y' = x + eta * n1/||n1||.

    Normals are oriented toward x. Lands exactly on H2's hyperplane provided
    n2 still points toward y'; raises DegenerateBoundaryError in the
    coincident regime (cos(theta) -> 1), where no eta satisfies the threshold.
    """
    x = np.asarray(x, dtype=np.float64)
    n1, o1 = _oriented(h1, x)
    n2, o2 = _oriented(h2, x)
    c = float(n1 @ n2 / (np.sqrt(n1 @ n1) * np.sqrt(n2 @ n2)))
    if c >= 1.0 - _PARALLEL_TOL:
        raise DegenerateBoundaryError("H1 = H2 (parallel aligned boundaries)")
    y_prime = x + eta * n1 / np.sqrt(n1 @ n1)
    s2 = float(n2 @ y_prime + o2)
    return y_prime - abs(s2) * n2 / float(n2 @ n2)


@dataclass
class VerifierReport:
    name: str
    checked: int = 0
    passed: int = 0
    worst_margin: float = math.inf
    counterexamples: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def record(self, margin: float, context: dict) -> None:
        self.checked += 1
        if margin < self.worst_margin:
            self.worst_margin = margin
        if margin >= 0.0:
            self.passed += 1
        else:
            self.counterexamples.append({"margin": margin, **context})

    @property
    def ok(self) -> bool:
        return self.checked == self.passed

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "checked": self.checked,
            "passed": self.passed,
            "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
            "counterexamples": self.counterexamples,
            "extra": self.extra,
        }


# ---------------------------------------------------------------------------
# Theorem 1: near/far boundary pairs
# ---------------------------------------------------------------------------

def check_theorem1_pair(net: Network, x, h1: BoundaryProbe, h2: BoundaryProbe,
                        tol: float = 1e-9, ortho_tol: float = 1e-6,
                        boundary_tol: float = 1e-7, distance_floor: float = 1e-4):
    """Check the constructed point for one boundary pair.

    Returns (accepted, margin, info). Acceptance needs: the foot of x's
    projection onto each hyperplane to lie on the net's actual boundary (the
    theorem's projection precondition), distances above a floor, and n2 still
    pointing at y'. Orthogonal pairs (|cos| <= ortho_tol) use a small eta;
    oblique pairs use eta just above the required threshold, which for affine
    pieces is d(x,H2)cos/(1-cos^2) and never below the stated ||x||-based one.
    """
    x = np.asarray(x, dtype=np.float64)
    n1, o1 = _oriented(h1, x)
    n2, o2 = _oriented(h2, x)
    nn1 = float(np.sqrt(n1 @ n1))
    nn2 = float(np.sqrt(n2 @ n2))
    c = float(n1 @ n2 / (nn1 * nn2))
    if c >= 1.0 - _PARALLEL_TOL:
        return False, 0.0, {"skip": "degenerate"}

    d1 = distance_to_hyperplane(x, h1)
    d2 = distance_to_hyperplane(x, h2)
    if d1 < distance_floor or d2 < distance_floor:
        return False, 0.0, {"skip": "distance floor"}
    scale = max(1.0, abs(float(nn.forward(net, x)[0])))
    foot1 = x - (n1 @ x + o1) * n1 / (nn1 * nn1)
    foot2 = x - (n2 @ x + o2) * n2 / (nn2 * nn2)
    if abs(float(nn.forward(net, foot1)[0])) > boundary_tol * scale:
        return False, 0.0, {"skip": "projection leaves H1's region"}
    if abs(float(nn.forward(net, foot2)[0])) > boundary_tol * scale:
        return False, 0.0, {"skip": "projection leaves H2's region"}

    if abs(c) <= ortho_tol:
        eta = 1e-3 * (1.0 + float(np.sqrt(x @ x)))
        regime = "orthogonal"
    else:
        lemma = lemma1_threshold(x, h1, h2)
        exact = d2 * c / (1.0 - c * c)
        eta = 1.01 * max(lemma, exact, 0.0) + 1e-3 * (1.0 + float(np.sqrt(x @ x)))
        regime = "oblique"
    y_prime = x + eta * n1 / nn1
    if float(n2 @ y_prime + o2) <= 0.0:
        return False, 0.0, {"skip": "n2 no longer points at y'"}
    y = construct_theorem1_point(x, h1, h2, eta)

    dy2 = distance_to_hyperplane(y, h2)
    dy1 = distance_to_hyperplane(y, h1)
    m1 = tol - dy2                 # (1) d(y,H2) = 0
    m2 = d2 - dy2                  # (2) strictly closer to H2
    m3 = dy1 + tol - d1            # (3) no closer to H1
    margin = min(m1, m2, m3)
    info = {"regime": regime, "eta": eta, "cos": c,
            "d_x_h1": d1, "d_x_h2": d2, "d_y_h1": dy1, "d_y_h2": dy2}
    return True, margin, info


def orthogonal_fixture_net(threshold: float = 0.7) -> Network:
    """relu(x1) + relu(x2) - threshold: two exactly orthogonal boundary pieces.

    The vertical piece {x1 = t, x2 <= 0} and horizontal piece {x2 = t, x1 <= 0}
    both receive perpendicular projections from third-quadrant points, so the
    orthogonal regime of the pair construction gets non-vacuous coverage.
    """
    spec = NetworkSpec((2, 2, 1))
    layers = [
        (np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros(2)),
        (np.array([[1.0, 1.0]]), np.array([-float(threshold)])),
    ]
    from . import kernels
    return Network(spec, kernels.pack_params(layers), meta={"fixture": "orthogonal"})


def sweep_theorem1(nets, anchors_per_net: int = 3, seed: int = 0, n_rays: int = 24,
                   offsets=(0.2, 0.5, 1.0, 2.0), tol: float = 1e-9) -> VerifierReport:
    """Check boundary pairs over points satisfying the projection precondition.

    Probes are discovered around random anchors; candidate x points are then
    placed perpendicular off one probe's own boundary point (which makes that
    probe's projection-foot condition hold by construction) and every ordered
    pair is screened through the precondition checks.
    """
    report = VerifierReport("theorem1")
    accepted_orth = 0
    accepted_obl = 0
    for ni, net in enumerate(nets):
        rng = stream(seed, ni)
        probes = []
        for pi in range(anchors_per_net):
            anchor = rng.uniform(-2.0, 2.0, net.spec.input_dim)
            if float(nn.forward(net, anchor)[0]) == 0.0:
                continue
            found = find_boundary_probes(net, anchor, n_rays=n_rays,
                                         seed=(seed * 1000 + ni) * 101 + pi)
            known = {p.pattern.bits for p in probes}
            probes.extend(p for p in found if p.pattern.bits not in known)
        for a in range(len(probes)):
            n1 = probes[a].normal / np.sqrt(probes[a].normal @ probes[a].normal)
            for s in offsets:
                for sgn in (1.0, -1.0):
                    x = probes[a].point + sgn * s * n1
                    if float(nn.forward(net, x)[0]) == 0.0:
                        continue
                    for b in range(len(probes)):
                        if b == a:
                            continue
                        accepted, margin, info = check_theorem1_pair(net, x, probes[a], probes[b], tol=tol)
                        if not accepted:
                            continue
                        if info["regime"] == "orthogonal":
                            accepted_orth += 1
                        else:
                            accepted_obl += 1
                        report.record(margin, {"net": ni, "probe_pair": [a, b], "offset": sgn * s, **info})
    report.extra = {"orthogonal_pairs": accepted_orth, "oblique_pairs": accepted_obl}
    return report


# ---------------------------------------------------------------------------
# distributional influence and Proposition 1
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InfluenceResult:
    influence: np.ndarray
    doi: str
    sample_count: int


def distributional_influence(net: Network, x, target_logit: int = 0,
                             samples: int = 100) -> InfluenceResult:
    """Mean input gradient over the straight path 0 -> x (midpoint grid)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    acc = np.zeros(net.spec.input_dim)
    for k in range(samples):
        t = (k + 0.5) / samples
        acc += nn.grad_input(net, t * x, target_logit)
    return InfluenceResult(acc / samples, "uniform-path-midpoint-0-to-x", samples)


def verify_prop1(net: Network, x, trials: int, slack: float = 1e-9,
                 report: VerifierReport | None = None) -> VerifierReport:
    """||grad f(x')|| >= ||x||^-1 |grad f(x') . x'| on the path x' = t x."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    xnorm = float(np.sqrt(x @ x))
    if report is None:
        report = VerifierReport("prop1")
    if xnorm == 0.0:
        return report
    for k in range(trials):
        t = (k + 0.5) / trials
        xp = t * x
        g = nn.grad_input(net, xp, 0)
        lhs = float(np.sqrt(g @ g))
        rhs = abs(float(g @ xp)) / xnorm
        report.record(lhs + slack - rhs, {"t": t, "lhs": lhs, "rhs": rhs})
    return report


def sweep_prop1(n_samples: int = 1000, seed: int = 0, dims=(4, 12, 6, 1),
                slack: float = 1e-9) -> VerifierReport:
    """Random (net, x, t) samples; one (net, x) pair contributes one t point."""
    report = VerifierReport("prop1")
    rng = stream(seed, 7)
    spec = NetworkSpec(tuple(dims))
    nets = [nn.init_network(spec, seed * 131 + i) for i in range(max(1, n_samples // 50))]
    for k in range(n_samples):
        net = nets[k % len(nets)]
        x = rng.uniform(-3.0, 3.0, spec.input_dim)
        xnorm = float(np.sqrt(x @ x))
        if xnorm == 0.0:
            continue
        t = rng.uniform(0.0, 1.0)
        xp = t * x
        g = nn.grad_input(net, xp, 0)
        lhs = float(np.sqrt(g @ g))
        rhs = abs(float(g @ xp)) / xnorm
        report.record(lhs + slack - rhs, {"sample": k, "t": t, "lhs": lhs, "rhs": rhs})
    return report


# ---------------------------------------------------------------------------
# Theorem 2: influence shift under top-layer perturbation
# ---------------------------------------------------------------------------

def _hidden_masks(net: Network, z):
    """Per-hidden-layer strict activation masks at z."""
    pre = np.asarray(nn.activation_pattern(net, z).bits, dtype=np.float64)
    masks = []
    at = 0
    for width in net.spec.layer_dims[1:-1]:
        masks.append(pre[at:at + width])
        at += width
    return masks


def penult_output(net: Network, z) -> np.ndarray:
    """h(z): activations feeding the top layer."""
    layers = net.layers
    cur = np.asarray(z, dtype=np.float64)
    for w, b in layers[:-1]:
        cur = np.maximum(w @ cur + b, 0.0)
    return cur


def penult_jacobian(net: Network, z) -> np.ndarray:
    """dh/dz as the masked weight product along the hidden stack."""
    layers = net.layers
    masks = _hidden_masks(net, z)
    jac = None
    for (w, _), msk in zip(layers[:-1], masks):
        step = w * msk[:, None]
        jac = step if jac is None else step @ jac
    return jac


def _dsigma(v: float) -> float:
    s = 1.0 / (1.0 + math.exp(-v)) if v >= 0 else math.exp(v) / (1.0 + math.exp(v))
    return s * (1.0 - s)


def sigmoid_influence(net: Network, x, w_top, samples: int) -> np.ndarray:
    """Path-averaged gradient of sigma(w_top . h(z) + b) wrt z, z = t x midpoints."""
    x = np.asarray(x, dtype=np.float64)
    b_top = float(net.layers[-1][1][0])
    acc = np.zeros(net.spec.input_dim)
    for k in range(samples):
        t = (k + 0.5) / samples
        z = t * x
        h = penult_output(net, z)
        jac = penult_jacobian(net, z)
        f = float(w_top @ h + b_top)
        acc += _dsigma(f) * (jac.T @ w_top)
    return acc / samples


def estimate_path_lipschitz(net: Network, x, grid: int = 1000, extra_ts=None,
                            safety: float = 1.01) -> float:
    """Max operator norm of dh/dz over a dense grid of the path 0 -> x, x safety."""
    x = np.asarray(x, dtype=np.float64)
    ts = list(np.linspace(0.0, 1.0, grid))
    if extra_ts is not None:
        ts.extend(float(t) for t in extra_ts)
    best = 0.0
    for t in ts:
        jac = penult_jacobian(net, t * x)
        op = float(np.linalg.norm(jac, 2))
        if op > best:
            best = op
    return best * safety


def verify_theorem2_bound(net: Network, x, delta_cap: float, trials: int,
                          doi_samples: int = 100, seed: int = 0,
                          k_grid: int = 1000, slack: float = 1e-6,
                          report: VerifierReport | None = None) -> VerifierReport:
    """Influence-shift bound for random top-layer perturbations ||w'-w|| <= delta_cap.

    K comes from dense path sampling of the penultimate Jacobian norm (the
    midpoint grid of the influence estimator is included in the sampling) with
    a 1.01 safety factor. lambda follows the proof, dsigma(x,w')/dsigma(x,w);
    the margin under the inverted variant is recorded in extra.
    """
    if net.spec.output_dim != 1:
        raise ValueError("theorem-2 verification needs a single-logit head")
    if delta_cap < 0 or trials < 1:
        raise ValueError("delta_cap must be >= 0 and trials >= 1")
    x = np.asarray(x, dtype=np.float64)
    w = net.layers[-1][0][0].copy()
    b_top = float(net.layers[-1][1][0])
    wnorm = float(np.sqrt(w @ w))
    mids = [(k + 0.5) / doi_samples for k in range(doi_samples)]
    K = estimate_path_lipschitz(net, x, grid=k_grid, extra_ts=mids)
    C = 0.5 * (wnorm + 0.5 * delta_cap)
    chi_w = sigmoid_influence(net, x, w, doi_samples)
    h_x = penult_output(net, x)
    ds_w = _dsigma(float(w @ h_x + b_top))

    if report is None:
        report = VerifierReport("theorem2")
    report.extra.setdefault("lambda_inverted_margins", [])
    rng = stream(seed, 11)
    for i in range(trials):
        u = rng.standard_normal(w.shape[0])
        unorm = float(np.sqrt(u @ u))
        radius = delta_cap * rng.uniform(0.0, 1.0) ** (1.0 / w.shape[0])
        w_p = w + (u / unorm) * radius if unorm > 0 else w.copy()
        chi_wp = sigmoid_influence(net, x, w_p, doi_samples)
        lhs = float(np.sqrt((chi_w - chi_wp) @ (chi_w - chi_wp)))
        ds_wp = _dsigma(float(w_p @ h_x + b_top))
        lam = ds_wp / ds_w
        rhs = K * (ds_w * float(np.sqrt((w - lam * w_p) @ (w - lam * w_p))) + C)
        report.record(rhs + slack - lhs, {"trial": i, "lhs": lhs, "rhs": rhs, "K": K})
        lam_inv = ds_w / ds_wp
        rhs_inv = K * (ds_w * float(np.sqrt((w - lam_inv * w_p) @ (w - lam_inv * w_p))) + C)
        report.extra["lambda_inverted_margins"].append(rhs_inv + slack - lhs)
    return report


def sweep_theorem2(n_nets: int = 20, trials_per_net: int = 5, dims=(5, 16, 1),
                   delta_scale: float = 0.5, doi_samples: int = 100,
                   seed: int = 0, k_grid: int = 1000) -> VerifierReport:
    report = VerifierReport("theorem2")
    spec = NetworkSpec(tuple(dims))
    rng = stream(seed, 13)
    for i in range(n_nets):
        net = nn.init_network(spec, seed * 977 + i)
        x = rng.uniform(-2.0, 2.0, spec.input_dim)
        w = net.layers[-1][0][0]
        delta = delta_scale * float(np.sqrt(w @ w))
        verify_theorem2_bound(net, x, delta, trials_per_net, doi_samples=doi_samples,
                              seed=seed * 31 + i, k_grid=k_grid, report=report)
    return report


# ---------------------------------------------------------------------------
# gradient-vs-finite-difference sweep (negative-control sensitive)
# ---------------------------------------------------------------------------

def sweep_gradcheck(n_samples: int = 200, seed: int = 0, max_dims=(10, 64, 32, 1),
                    h: float = 1e-5, rel_tol: float = 1e-5, constraint_tol: float = 1e-6,
                    grad_fn=None) -> VerifierReport:
    """Analytic input gradients vs central finite differences on random nets.

    Points whose activation pattern changes inside the FD stencil, or that sit
    within constraint_tol of an activation constraint, are excluded (the
    subgradient convention makes FD meaningless there).
    """
    report = VerifierReport("gradcheck")
    if grad_fn is None:
        grad_fn = nn.grad_input
    rng = stream(seed, 3)
    excluded = 0
    for k in range(n_samples):
        depth = int(rng.integers(1, 3))
        dims = [int(rng.integers(2, max_dims[0] + 1))]
        for level in range(depth):
            cap = max_dims[1] if level == 0 else max_dims[2]
            dims.append(int(rng.integers(2, cap + 1)))
        dims.append(1)
        net = nn.init_network(NetworkSpec(tuple(dims)), int(rng.integers(0, 2 ** 31)))
        x = rng.uniform(-2.0, 2.0, dims[0])
        pre = np.asarray([abs(v) for v in _all_preacts(net, x)])
        if pre.size and pre.min() < constraint_tol:
            excluded += 1
            continue
        base_bits = nn.activation_pattern(net, x).bits
        stencil_ok = True
        for j in range(dims[0]):
            for sgn in (1.0, -1.0):
                xp = x.copy()
                xp[j] += sgn * h
                if nn.activation_pattern(net, xp).bits != base_bits:
                    stencil_ok = False
                    break
            if not stencil_ok:
                break
        if not stencil_ok:
            excluded += 1
            continue
        g = grad_fn(net, x, 0)
        fd = np.empty(dims[0])
        for j in range(dims[0]):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            fd[j] = (float(nn.forward(net, xp)[0]) - float(nn.forward(net, xm)[0])) / (2.0 * h)
        denom = max(float(np.sqrt(fd @ fd)), 1e-12)
        rel = float(np.sqrt((g - fd) @ (g - fd))) / denom
        report.record(rel_tol - rel, {"sample": k, "dims": dims, "rel_err": rel})
    report.extra = {"excluded": excluded}
    return report


def _all_preacts(net: Network, x):
    from . import kernels
    return kernels.hidden_preacts(net.theta, net._dims, np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# 2-D rasters
# ---------------------------------------------------------------------------

def raster_2d(nets, bbox, resolution: int) -> np.ndarray:
    """Class grid over bbox; for a net pair: 0/1 = agreement class, 2 = disagree.

    Row i corresponds to the i-th y value (ascending), column j to the j-th x.
    """
    single = isinstance(nets, Network)
    pair = None if single else tuple(nets)
    if not single and len(pair) != 2:
        raise ValueError("raster_2d takes one network or a pair")
    ref = nets if single else pair[0]
    if ref.spec.input_dim != 2:
        raise ValueError("raster_2d needs 2-D inputs")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    (x0, x1), (y0, y1) = bbox
    xs = np.linspace(x0, x1, resolution) if resolution > 1 else np.array([(x0 + x1) / 2.0])
    ys = np.linspace(y0, y1, resolution) if resolution > 1 else np.array([(y0 + y1) / 2.0])
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if single:
        return nn.predict_batch(nets, pts).reshape(resolution, resolution)
    a = nn.predict_batch(pair[0], pts)
    b = nn.predict_batch(pair[1], pts)
    out = np.where(a == b, a, 2)
    return out.reshape(resolution, resolution)


def write_pgm(path, grid: np.ndarray, maxval: int) -> None:
    """Plain (P2) PGM, one raster row per line."""
    lines = ["P2", f"{grid.shape[1]} {grid.shape[0]}", str(maxval)]
    for row in grid:
        lines.append(" ".join(str(int(v)) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
