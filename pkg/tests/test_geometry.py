"""Boundary geometry, influence, and the theorem verifiers."""

import math

import numpy as np
import pytest

from cfstab import geometry as geo, nn
from cfstab.errors import DegenerateBoundaryError
from conftest import linear_net


def probe(normal, offset=0.0, point=None):
    normal = np.asarray(normal, dtype=np.float64)
    return geo.BoundaryProbe(nn.ActivationPattern(bits=()), normal, float(offset),
                             point if point is not None else np.zeros(normal.shape[0]))


class TestDistance:
    def test_on_boundary_is_zero(self):
        h = probe([2.0, 1.0], offset=-3.0)
        x = np.array([1.0, 1.0])  # 2 + 1 - 3 = 0
        assert geo.distance_to_hyperplane(x, h) == 0.0

    def test_hand_projection(self):
        h = probe([3.0, 4.0])
        assert geo.distance_to_hyperplane(np.array([1.0, 0.0]), h) == 3.0 / 5.0

    def test_zero_normal_rejected(self):
        with pytest.raises(ValueError):
            probe([0.0, 0.0])

    def test_matches_grid_search_on_linear_model(self):
        w = np.array([1.2, -0.7])
        b = 0.3
        net = linear_net([w], [b])
        h = probe(w, b)
        x = np.array([0.9, 0.4])
        want = geo.distance_to_hyperplane(x, h)
        # fine-grid search for the nearest sign flip
        pitch = 1e-3
        deltas = np.arange(-2, 2, pitch)
        gx, gy = np.meshgrid(deltas, deltas)
        pts = np.column_stack([gx.ravel() + x[0], gy.ravel() + x[1]])
        f0 = nn.forward(net, x)[0]
        flipped = f0 * (pts @ w + b) <= 0
        dist = np.hypot(gx.ravel()[flipped], gy.ravel()[flipped])
        assert abs(float(dist.min()) - want) <= 2 * pitch


class TestTheorem1Construction:
    def test_orthogonal_axes_hand_case(self):
        h1 = probe([1.0, 0.0])
        h2 = probe([0.0, 1.0])
        x = np.array([2.0, 3.0])
        for eta in (0.01, 0.1, 1.0):
            y = geo.construct_theorem1_point(x, h1, h2, eta)
            np.testing.assert_allclose(y, [2.0 + eta, 0.0], atol=1e-15)
            assert geo.distance_to_hyperplane(y, h2) == 0.0
            assert geo.distance_to_hyperplane(y, h1) >= 2.0

    def test_identical_normals_degenerate(self):
        h1 = probe([1.0, 0.0])
        h2 = probe([1.0, 0.0])
        with pytest.raises(DegenerateBoundaryError):
            geo.construct_theorem1_point(np.array([1.0, 1.0]), h1, h2, 0.1)

    def test_lemma1_threshold_values(self):
        x = np.array([1.0, 0.0])
        assert geo.lemma1_threshold(x, probe([1.0, 0.0]), probe([0.0, 1.0])) == 0.0
        assert geo.lemma1_threshold(x, probe([1.0, 0.0]), probe([2.0, 0.0])) == math.inf
        got = geo.lemma1_threshold(x, probe([1.0, 0.0]), probe([1.0, 1.0]))
        assert abs(got - math.sqrt(2.0)) <= 1e-12

    def test_sweep_on_trained_and_fixture_nets(self, trained_net):
        nets = [trained_net, geo.orthogonal_fixture_net(0.7)]
        report = geo.sweep_theorem1(nets, anchors_per_net=2, seed=3)
        assert report.checked > 0
        assert report.ok, report.counterexamples[:2]
        assert report.extra["orthogonal_pairs"] > 0
        assert report.extra["oblique_pairs"] > 0


class TestRegionNormal:
    def test_matches_masked_weight_product(self, trained_net):
        # one-hidden-layer normal w1^T Lambda W0 vs the input gradient
        rng = np.random.default_rng(7)
        (w0, b0), (w1, b1) = trained_net.layers
        for _ in range(20):
            x = rng.uniform(-2, 2, 2)
            lam = np.diag((w0 @ x + b0 > 0).astype(float))
            normal = (w1 @ lam @ w0)[0]
            np.testing.assert_allclose(nn.grad_input(trained_net, x), normal, atol=1e-12)


class TestInfluence:
    def test_linear_model_gives_w(self):
        net = linear_net([[0.4, -1.1]], [2.0])
        for samples in (1, 7, 100):
            res = geo.distributional_influence(net, np.array([3.0, -2.0]), samples=samples)
            np.testing.assert_allclose(res.influence, [0.4, -1.1], atol=1e-14)

    def test_single_sample_is_midpoint_gradient(self, trained_net):
        x = np.array([1.2, -0.8])
        res = geo.distributional_influence(trained_net, x, samples=1)
        np.testing.assert_array_equal(res.influence, nn.grad_input(trained_net, 0.5 * x))

    def test_self_convergence(self, trained_net):
        x = np.array([1.5, 1.1])
        a = geo.distributional_influence(trained_net, x, samples=1000).influence
        b = geo.distributional_influence(trained_net, x, samples=10000).influence
        assert np.linalg.norm(a - b) <= 1e-3 * np.linalg.norm(b)


class TestProp1:
    def test_linear_model_cauchy_schwarz(self):
        net = linear_net([[1.0, 2.0, -0.5]])
        report = geo.verify_prop1(net, np.array([0.5, -1.0, 2.0]), trials=50)
        assert report.ok

    def test_orthogonal_direction_zero_rhs(self):
        net = linear_net([[1.0, 0.0]])
        x = np.array([0.0, 3.0])  # path points orthogonal to grad (1,0)
        report = geo.verify_prop1(net, x, trials=10)
        assert report.ok
        # rhs is exactly 0 along the orthogonal path, lhs = ||w|| = 1
        assert abs(report.worst_margin - (1.0 + 1e-9)) <= 1e-15

    def test_sweep_no_violations(self):
        report = geo.sweep_prop1(300, seed=1)
        assert report.checked == 300
        assert report.ok

    def test_directional_derivative_fd_cross_check(self, trained_net):
        # independent finite-difference route for |d f(r x')/dr| at r=1,
        # skipping samples whose pattern changes inside the stencil
        rng = np.random.default_rng(11)
        h = 1e-6
        checked = 0
        for _ in range(200):
            x = rng.uniform(-2, 2, 2)
            t = rng.uniform(0.05, 1.0)
            xp = t * x
            bits = nn.activation_pattern(trained_net, xp).bits
            if nn.activation_pattern(trained_net, (1 + h) * xp).bits != bits:
                continue
            if nn.activation_pattern(trained_net, (1 - h) * xp).bits != bits:
                continue
            g = nn.grad_input(trained_net, xp)
            analytic = float(g @ xp)
            fd = (nn.forward(trained_net, (1 + h) * xp)[0]
                  - nn.forward(trained_net, (1 - h) * xp)[0]) / (2 * h)
            assert abs(analytic - fd) <= 1e-6 * max(1.0, abs(fd))
            checked += 1
        assert checked >= 100


class TestTheorem2:
    def test_identical_weights_zero_lhs(self, trained_net):
        x = np.array([0.7, -0.3])
        report = geo.verify_theorem2_bound(trained_net, x, delta_cap=0.0, trials=3,
                                           doi_samples=40, k_grid=100)
        assert report.ok
        assert report.worst_margin > 0  # LHS = 0 when w' = w, RHS = K*C > 0

    def test_mini_sweep_no_violations(self):
        report = geo.sweep_theorem2(n_nets=4, trials_per_net=4, doi_samples=50,
                                    k_grid=200, seed=2)
        assert report.checked == 16
        assert report.ok
        assert len(report.extra["lambda_inverted_margins"]) == 16

    def test_multilogit_rejected(self):
        net = linear_net(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            geo.verify_theorem2_bound(net, np.array([1.0, 0.0]), 0.1, 1)

    def test_k_estimate_dominates_path_jacobians(self, trained_net):
        x = np.array([1.4, 0.9])
        K = geo.estimate_path_lipschitz(trained_net, x, grid=500)
        for t in np.linspace(0, 1, 137):
            op = np.linalg.norm(geo.penult_jacobian(trained_net, t * x), 2)
            assert op <= K + 1e-12


class TestGradcheckSweep:
    def test_clean_run_passes(self):
        report = geo.sweep_gradcheck(60, seed=4)
        assert report.ok
        assert report.checked >= 40

    def test_sign_bug_detected(self):
        def bad_grad(net, x, idx):
            return -nn.grad_input(net, x, idx)
        report = geo.sweep_gradcheck(40, seed=4, grad_fn=bad_grad)
        assert not report.ok


class TestRaster:
    def test_identical_pair_agrees_everywhere(self, trained_net):
        grid = geo.raster_2d((trained_net, trained_net), ((-2, 2), (-2, 2)), 32)
        assert not np.any(grid == 2)

    def test_constant_classifiers_always_disagree(self):
        always1 = linear_net([[0.0, 0.0]], [1.0])
        always0 = linear_net([[0.0, 0.0]], [-1.0])
        grid = geo.raster_2d((always1, always0), ((-1, 1), (-1, 1)), 16)
        assert np.all(grid == 2)

    def test_seed_pair_disagreement_band(self, blobs_split):
        train_ds, _ = blobs_split
        spec = nn.NetworkSpec((2, 8, 1))
        nets = [nn.train(nn.init_network(spec, s), train_ds,
                         nn.TrainConfig(seed=s, epochs=40, batch_size=32))
                for s in (31, 32)]
        grid = geo.raster_2d((nets[0], nets[1]), ((-3, 3), (-3, 3)), 64)
        frac = float((grid == 2).mean())
        assert 0.0 < frac < 0.5

    def test_single_cell(self, trained_net):
        grid = geo.raster_2d(trained_net, ((-1, 1), (-1, 1)), 1)
        assert grid.shape == (1, 1)

    def test_non_2d_rejected(self):
        net = linear_net([[1.0, 2.0, 3.0]])
        with pytest.raises(ValueError):
            geo.raster_2d(net, ((-1, 1), (-1, 1)), 8)

    def test_pgm_format(self, trained_net, tmp_path):
        grid = geo.raster_2d(trained_net, ((-2, 2), (-2, 2)), 8)
        path = tmp_path / "grid.pgm"
        geo.write_pgm(path, grid, 1)
        lines = path.read_text().splitlines()
        assert lines[0] == "P2"
        assert lines[1] == "8 8"
        assert lines[2] == "1"
        assert len(lines) == 3 + 8
