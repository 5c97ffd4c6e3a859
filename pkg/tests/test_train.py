import numpy as np
import pytest

from tndpc.encoding import encode_point, encode_rows, fidelity_to_mps
from tndpc.exceptions import ContractError, ParameterError
from tndpc.mps import MPS, canonicalize, inner_product, random_mps
from tndpc.train import MPSDensityModel, TrainConfig, nll_loss, site_gradient, train_mps


def _fd_gradient(phi, states, k, h=1e-5):
    grad = np.zeros_like(phi.sites[k])
    for idx in np.ndindex(grad.shape):
        plus, minus = phi.copy(), phi.copy()
        plus.sites[k][idx] += h
        minus.sites[k][idx] -= h
        grad[idx] = (nll_loss(plus, states) - nll_loss(minus, states)) / (2 * h)
    return grad


def _richardson_gradient(phi, states, k, h=2e-5):
    # central differences at h and h/2 combined to cancel the O(h^2) term; needed
    # when a data point sits close to a node of phi and the loss is sharply curved
    return (4 * _fd_gradient(phi, states, k, h / 2) - _fd_gradient(phi, states, k, h)) / 3


class TestLoss:
    def test_single_point_optimum(self):
        p = encode_point([0.3, 0.7, 0.1])
        assert nll_loss(p.to_mps(), [p]) == pytest.approx(0.0, abs=1e-14)

    def test_scale_invariant(self, rng):
        phi = random_mps(4, 2, seed=0)
        states = encode_rows(rng.uniform(size=(6, 4)))
        scaled = phi.copy()
        scaled.sites[2] *= 3.7
        assert nll_loss(scaled, states) == pytest.approx(nll_loss(phi, states), abs=1e-12)

    def test_zero_overlap_is_infinite(self):
        a, b = encode_point([0, 0]), encode_point([1, 1])
        assert nll_loss(a.to_mps(), [a, b]) == np.inf

    def test_nonnegative_for_unit_norm(self, rng):
        phi = random_mps(5, 3, seed=1)
        assert nll_loss(phi, encode_rows(rng.uniform(size=(10, 5)))) >= 0.0

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            nll_loss(random_mps(3, 2, seed=0), encode_rows(np.zeros((2, 4))))


class TestGradient:
    def test_finite_differences_50_instances(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for trial in range(50):
            m = int(rng.integers(2, 7))
            cap = int(rng.integers(1, 4))
            n = int(rng.integers(1, 11))
            k = int(rng.integers(0, m))
            phi = canonicalize(random_mps(m, cap, seed=trial), k)
            states = encode_rows(rng.uniform(size=(n, m)))
            analytic = site_gradient(phi, states, k)
            numeric = _richardson_gradient(phi, states, k)
            worst = max(worst, np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12))
        assert worst <= 1e-5

    def test_spec_instance(self):
        rng = np.random.default_rng(0)
        phi = canonicalize(random_mps(5, 2, seed=3), 2)
        states = encode_rows(rng.uniform(size=(8, 5)))
        numeric = _fd_gradient(phi, states, 2)
        rel = np.linalg.norm(site_gradient(phi, states, 2) - numeric) / np.linalg.norm(numeric)
        assert rel <= 1e-5

    def test_norm_term_gradient(self):
        # d/dY ln<phi|phi> at a canonical center equals 2Y when <phi|phi> = 1
        phi = canonicalize(random_mps(4, 2, seed=5), 1)
        h = 1e-6
        numeric = np.zeros_like(phi.sites[1])
        for idx in np.ndindex(numeric.shape):
            plus, minus = phi.copy(), phi.copy()
            plus.sites[1][idx] += h
            minus.sites[1][idx] -= h
            numeric[idx] = (inner_product(plus, plus).logabs - inner_product(minus, minus).logabs) / (2 * h)
        np.testing.assert_allclose(numeric, 2 * phi.sites[1], atol=1e-8)

    def test_zero_at_global_minimum(self):
        p = encode_point([0.2, 0.9])
        phi = p.to_mps()
        phi.canonical_center = 0
        grad = site_gradient(phi, [p], 0)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)
        stepped = phi.copy()
        stepped.sites[0] = stepped.sites[0] - 0.1 * grad
        assert abs(nll_loss(stepped, [p])) <= 1e-10

    def test_requires_center(self):
        phi = random_mps(3, 2, seed=0)
        with pytest.raises(ContractError):
            site_gradient(phi, encode_rows(np.zeros((1, 3))), 1)
        with pytest.raises(ParameterError):
            site_gradient(phi, encode_rows(np.zeros((1, 3))), 5)


class TestTraining:
    def test_fits_repeated_point(self):
        p = encode_point([0.15, 0.6, 0.35, 0.8])
        phi, log = train_mps([p] * 50, TrainConfig(bond_cap=2, max_sweeps=10, seed=0))
        assert fidelity_to_mps(p, phi) >= 0.999
        assert log.loss_per_sweep[-1] < 1e-3

    def test_monotone_with_backtracking(self, rng):
        states = encode_rows(rng.uniform(size=(30, 6)))
        _, log = train_mps(states, TrainConfig(bond_cap=3, max_sweeps=15, learning_rate=0.5,
                                               convergence_tol=0, seed=2))
        assert np.all(np.diff(log.loss_per_sweep) <= 1e-8)

    def test_deterministic(self, rng):
        states = encode_rows(rng.uniform(size=(20, 5)))
        cfg = TrainConfig(bond_cap=3, max_sweeps=5, seed=11)
        a, log_a = train_mps(states, cfg)
        b, log_b = train_mps(states, cfg)
        assert log_a == log_b
        assert all(np.array_equal(x, y) for x, y in zip(a.sites, b.sites))

    def test_result_normalized_and_canonical(self, rng):
        states = encode_rows(rng.uniform(size=(25, 7)))
        phi, log = train_mps(states, TrainConfig(bond_cap=4, max_sweeps=4, seed=0))
        assert abs(inner_product(phi, phi).magnitude - 1.0) < 1e-10
        assert phi.canonical_center == 0
        assert max(phi.bond_dims) <= 4
        assert 0.0 <= log.final_entropy_mid_bond <= np.log(4) + 1e-10

    def test_bond_one_has_zero_entropy(self, rng):
        _, log = train_mps(encode_rows(rng.uniform(size=(10, 4))), TrainConfig(bond_cap=1, max_sweeps=3))
        assert log.final_entropy_mid_bond == 0.0

    def test_single_site(self):
        phi, log = train_mps(encode_rows(np.array([[0.2], [0.3]])), TrainConfig(bond_cap=4, max_sweeps=3))
        assert phi.length == 1 and log.sweeps_run >= 1

    def test_convergence_stops_early(self):
        p = encode_point([0.5, 0.5, 0.5])
        _, log = train_mps([p] * 5, TrainConfig(bond_cap=2, max_sweeps=200, convergence_tol=1e-3))
        assert log.converged and log.sweeps_run < 200

    def test_zero_overlap_points_excluded_from_gradient(self):
        # phi = |00>; the point (1, 1) is orthogonal to it and drops out of the sum
        a, b = encode_point([0.0, 0.0]), encode_point([1.0, 1.0])
        phi = a.to_mps()
        phi.canonical_center = 0
        both = site_gradient(phi, [a, b], 0)
        only_a = site_gradient(phi, [a], 0)
        norm_term = 2 * phi.sites[0]
        # the data term keeps the 1/n weight of the full batch
        np.testing.assert_allclose(both - norm_term, 0.5 * (only_a - norm_term), atol=1e-14)

    @pytest.mark.parametrize("kwargs", [dict(bond_cap=0), dict(max_sweeps=0),
                                        dict(learning_rate=0.0), dict(convergence_tol=-1.0)])
    def test_config_validation(self, kwargs):
        with pytest.raises(ParameterError):
            TrainConfig(**kwargs)

    def test_empty_data(self):
        with pytest.raises(ParameterError):
            train_mps([])


class TestDensityModel:
    def test_estimator_round_trip(self, rng):
        X = np.vstack([rng.normal(0, 0.1, (30, 3)), rng.normal(1, 0.1, (30, 3))])
        model = MPSDensityModel(bond_dim=2, max_sweeps=5).fit(X)
        f = model.fidelity(X)
        assert f.shape == (60,) and np.all((f >= 0) & (f <= 1 + 1e-10))
        np.testing.assert_allclose(model.score_samples(X), np.log(f ** 2), atol=1e-10)
        assert model.score(X) == pytest.approx(np.mean(model.score_samples(X)))
        assert model.get_params()["bond_dim"] == 2

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            MPSDensityModel().fidelity(np.zeros((1, 2)))


def test_mps_validates_bond_one_product():
    assert isinstance(encode_point([0.4]).to_mps(), MPS)
