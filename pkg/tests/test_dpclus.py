from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from tndpc.dpclus import (DensityProfile, DpcParams, TensorNetworkDPC, assign_local_clusters,
                          build_connectivity, classify_core_border, cluster, compute_delta,
                          compute_f_c, compute_rho, density_order, merge_clusters, run_pipeline,
                          select_local_centers)
from tndpc.encoding import encode_rows
from tndpc.exceptions import DataError, NumericalError, ParameterError, StageError
from tndpc.metrics import ari
from tndpc.train import TrainConfig
from tndpc.unionfind import UnionFind


def _fid_from(pairs, n):
    f = np.eye(n)
    for (i, j), v in pairs.items():
        f[i, j] = f[j, i] = v
    return f


def _random_fid(rng, n):
    a = rng.uniform(size=(n, n))
    f = (a + a.T) / 2
    np.fill_diagonal(f, 1.0)
    return f


def _bfs_components(adj):
    n = adj.shape[0]
    comp = -np.ones(n, dtype=int)
    label = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = label
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                if comp[v] < 0:
                    comp[v] = label
                    queue.append(v)
        label += 1
    return comp


class TestCutoff:
    def test_interpolated_quantile(self):
        f = _fid_from({(0, 1): 0.1, (0, 2): 0.2, (1, 2): 0.3, (0, 3): 0.4,
                       (1, 3): 0.4, (2, 3): 0.4}, 4)
        # sorted: 0.1 0.2 0.3 0.4 0.4 0.4; the 75th percentile sits at position 3.75
        assert compute_f_c(f, 0.25) == pytest.approx(0.4, abs=1e-15)

    def test_spec_four_values(self):
        # pair fidelities {0.1, 0.2, 0.3, 0.4}: a 3-point matrix cannot hold four pairs,
        # so check the quantile rule on the raw list the same way the function does
        values = np.sort([0.1, 0.2, 0.3, 0.4])
        pos = 0.75 * (values.size - 1)
        lo = int(np.floor(pos))
        oracle = values[lo] + (pos - lo) * (values[lo + 1] - values[lo])
        assert oracle == pytest.approx(0.325)
        assert float(np.quantile(values, 0.75)) == pytest.approx(oracle, abs=1e-15)

    def test_constant(self):
        f = np.full((5, 5), 0.37)
        np.fill_diagonal(f, 1.0)
        for dc in (0.001, 0.3, 0.9):
            assert compute_f_c(f, dc) == pytest.approx(0.37, abs=1e-15)

    def test_small_dc_gives_max(self, rng):
        f = _random_fid(rng, 30)
        top = f[np.triu_indices(30, 1)].max()
        assert compute_f_c(f, 1e-9) == pytest.approx(top, abs=1e-6)

    def test_errors(self):
        with pytest.raises(ParameterError):
            compute_f_c(np.ones((1, 1)), 0.1)
        with pytest.raises(ParameterError):
            compute_f_c(np.eye(3), 0.0)


class TestRho:
    def test_values(self):
        assert compute_rho([0.0], 0.2)[0] == 0.0
        assert compute_rho([2.0], 0.2)[0] == pytest.approx(np.tanh(1.0), abs=1e-15)
        assert np.tanh(1.0) == pytest.approx(0.761594, abs=1e-6)

    def test_monotone(self, rng):
        f = np.sort(rng.uniform(size=50))
        assert np.all(np.diff(compute_rho(f, 0.3)) > 0)

    def test_degenerate_cutoff(self):
        with pytest.raises(NumericalError):
            compute_rho([0.5], 0.0)

    def test_negative_fidelity(self):
        with pytest.raises(ParameterError):
            compute_rho([-0.1], 0.5)


class TestDelta:
    def test_single_point(self):
        delta, nhd = compute_delta([0.3], np.eye(1))
        assert delta.tolist() == [1.0] and nhd.tolist() == [-1]

    def test_two_points(self):
        delta, nhd = compute_delta([0.1, 0.2], _fid_from({(0, 1): 0.9}, 2))
        assert delta[0] == pytest.approx(0.1) and nhd[0] == 1
        assert delta[1] == 1.0 and nhd[1] == -1

    def test_ties_rank_smaller_index_higher(self):
        assert density_order([0.5, 0.7, 0.5, 0.7]).tolist() == [1, 3, 0, 2]
        _, nhd = compute_delta([0.5, 0.5], _fid_from({(0, 1): 0.4}, 2))
        assert nhd.tolist() == [-1, 0]

    @pytest.mark.parametrize("mode", ["dpc-consistent", "literal"])
    def test_exhaustive_oracle(self, mode):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(2, 9))
            rho = rng.integers(0, 4, size=n).astype(float)  # plenty of ties
            fid = _random_fid(rng, n)
            delta, nhd = compute_delta(rho, fid, mode)
            top = min(range(n), key=lambda i: (-rho[i], i))
            for i in range(n):
                higher = [j for j in range(n) if rho[j] > rho[i] or (rho[j] == rho[i] and j < i)]
                if i == top:
                    assert not higher and delta[i] == 1.0 and nhd[i] == -1
                    continue
                pick = max if mode == "dpc-consistent" else min
                best = pick(fid[i, j] for j in higher)
                assert nhd[i] == min(j for j in higher if fid[i, j] == best)
                assert delta[i] == pytest.approx(1 - best if mode == "dpc-consistent" else best)

    def test_bad_mode(self):
        with pytest.raises(ParameterError):
            compute_delta([0.1], np.eye(1), "sideways")


def _profile(rho, fid, f_c, mode="dpc-consistent"):
    rho = np.asarray(rho, dtype=float)
    delta, nhd = compute_delta(rho, fid, mode)
    return DensityProfile(rho, delta, nhd, rho, f_c)


class TestCenters:
    def test_two_duplicate_pairs(self):
        fid = _fid_from({(0, 1): 1.0, (2, 3): 1.0}, 4)
        prof = _profile([0.5, 0.5, 0.5, 0.5], fid, f_c=1.0)
        assert sorted(select_local_centers(prof).tolist()) == [0, 2]

    def test_identical_points_promote_maximum(self):
        fid = np.ones((4, 4))
        centers = select_local_centers(_profile([0.4] * 4, fid, f_c=1.0))
        assert centers.tolist() == [0]

    def test_single_point(self):
        assert select_local_centers(_profile([0.2], np.eye(1), f_c=0.5)).tolist() == [0]

    def test_density_maximum_always_center(self, rng):
        fid = _random_fid(rng, 12)
        rho = rng.uniform(size=12)
        for f_c in (0.01, 0.5, 0.99):
            assert int(np.argmax(rho)) in select_local_centers(_profile(rho, fid, f_c))

    def test_rule(self, rng):
        fid = _random_fid(rng, 20)
        rho = rng.uniform(size=20)
        prof = _profile(rho, fid, 0.3)
        expected = {i for i in range(20) if prof.delta[i] > 0.7 and rho[i] > rho.mean()}
        expected.add(int(np.argmax(rho)))
        assert set(select_local_centers(prof).tolist()) == expected
        literal = _profile(rho, fid, 0.3, "literal")
        expected = {i for i in range(20) if literal.delta[i] > 0.3 and rho[i] > rho.mean()}
        expected.add(int(np.argmax(rho)))
        assert set(select_local_centers(literal, "literal").tolist()) == expected


class TestAssign:
    def test_single_center(self):
        labels = assign_local_clusters([2], np.array([2, 2, -1, 1]), [0.2, 0.5, 0.9, 0.1])
        assert labels.tolist() == [0, 0, 0, 0]

    def test_chain(self):
        # a -> b -> c with c the center
        labels = assign_local_clusters([2], np.array([1, 2, -1]), [0.1, 0.2, 0.3])
        assert labels.tolist() == [0, 0, 0]

    def test_path_following_oracle(self):
        rho = np.array([0.9, 0.2, 0.8, 0.5, 0.3, 0.6])
        nhd = np.array([-1, 3, 0, 2, 5, 0])
        centers = [0, 2]
        labels = assign_local_clusters(centers, nhd, rho)
        for i in range(6):
            j = i
            while j not in centers:
                j = nhd[j]
            assert labels[i] == centers.index(j)  # centers labeled by decreasing rho

    def test_unreachable_center(self):
        with pytest.raises(NumericalError):
            assign_local_clusters([1], np.array([-1, -1]), [0.1, 0.5])


class TestCoreBorder:
    cfg = TrainConfig(bond_cap=2, max_sweeps=10, seed=0)

    def test_singleton_is_core(self):
        states = encode_rows(np.array([[0.1, 0.2], [0.9, 0.8]]))
        is_core, _ = classify_core_border(states, np.array([0, 1]), self.cfg)
        assert is_core.all()

    def test_identical_points_all_core(self):
        states = encode_rows(np.tile([0.3, 0.6, 0.2], (6, 1)))
        is_core, fid = classify_core_border(states, np.zeros(6, dtype=int), self.cfg)
        assert is_core.all()
        assert np.ptp(fid) <= 1e-12

    def test_outlier_is_border(self):
        rng = np.random.default_rng(0)
        blob = np.clip(rng.normal(0.3, 0.03, size=(20, 2)), 0, 1)
        rows = np.vstack([blob, [[0.95, 0.9]]])
        is_core, fid = classify_core_border(encode_rows(rows), np.zeros(21, dtype=int), self.cfg)
        assert not is_core[20]
        assert fid[20] < fid.mean()

    def test_core_rule_and_schedule_independence(self):
        rng = np.random.default_rng(1)
        states = encode_rows(rng.uniform(size=(30, 3)))
        labels = rng.integers(0, 4, size=30)
        serial = classify_core_border(states, labels, self.cfg, n_jobs=1)
        parallel = classify_core_border(states, labels, self.cfg, n_jobs=2)
        np.testing.assert_array_equal(serial[0], parallel[0])
        np.testing.assert_array_equal(serial[1], parallel[1])
        for k in range(4):
            idx = labels == k
            f = serial[1][idx]
            if idx.sum() > 1 and np.ptp(f) > 1e-12:
                np.testing.assert_array_equal(serial[0][idx], f > f.mean())


class TestConnectivity:
    def test_near_duplicates_connect(self):
        fid = _fid_from({(0, 1): 0.999}, 2)
        adj = build_connectivity([True, True], np.array([0, 1]), fid, 0.99)
        assert adj[0, 1] and adj[1, 0]

    def test_orthogonal_clusters(self):
        fid = np.eye(4)
        fid[0, 1] = fid[1, 0] = fid[2, 3] = fid[3, 2] = 1.0
        adj = build_connectivity([True] * 4, np.array([0, 0, 1, 1]), fid, 1e-6)
        assert not adj.any()

    def test_three_cluster_chain(self):
        labels = np.array([0, 1, 2])
        fid = _fid_from({(0, 1): 0.98, (1, 2): 0.97, (0, 2): 0.5}, 3)
        adj = build_connectivity([True] * 3, labels, fid, 0.95)
        assert {(int(a), int(b)) for a, b in zip(*np.nonzero(np.triu(adj)))} == {(0, 1), (1, 2)}

    def test_border_points_ignored(self):
        fid = _fid_from({(0, 1): 1.0}, 2)
        assert not build_connectivity([True, False], np.array([0, 1]), fid, 0.5).any()

    @pytest.mark.parametrize("mode", ["dpc-consistent", "literal"])
    def test_max_core_fidelity_oracle(self, mode):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(2, 15))
            fid = _random_fid(rng, n)
            labels = rng.integers(0, 4, size=n)
            labels = np.unique(labels, return_inverse=True)[1]
            core = rng.uniform(size=n) < 0.7
            f_d = rng.uniform(0.2, 0.9)
            adj = build_connectivity(core, labels, fid, f_d, mode)
            L = labels.max() + 1
            for k in range(L):
                for l in range(L):
                    pairs = [(i, j) for i in range(n) for j in range(n)
                             if core[i] and core[j] and labels[i] == k and labels[j] == l]
                    hit = any((fid[i, j] >= f_d) if mode == "dpc-consistent" else (fid[i, j] < f_d)
                              for i, j in pairs)
                    assert adj[k, l] == (hit and k != l)
            assert np.array_equal(adj, adj.T)


class TestMerge:
    def test_no_edges(self):
        comp, final = merge_clusters(np.zeros((3, 3), bool), np.array([2, 0, 1, 1]))
        assert comp.tolist() == [0, 1, 2] and final.tolist() == [2, 0, 1, 1]

    def test_chain(self):
        adj = np.zeros((3, 3), bool)
        adj[0, 1] = adj[1, 0] = adj[1, 2] = adj[2, 1] = True
        assert merge_clusters(adj)[0].tolist() == [0, 0, 0]

    def test_numbered_by_smallest_member(self):
        adj = np.zeros((5, 5), bool)
        for a, b in [(1, 4), (0, 3)]:
            adj[a, b] = adj[b, a] = True
        assert merge_clusters(adj)[0].tolist() == [0, 1, 2, 0, 1]

    def test_two_chains_bfs(self):
        adj = np.zeros((5, 5), bool)
        for a, b in [(0, 2), (2, 4), (1, 3)]:
            adj[a, b] = adj[b, a] = True
        comp, _ = merge_clusters(adj)
        np.testing.assert_array_equal(comp, _bfs_components(adj))
        assert len(set(comp)) == 2

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 12).flatmap(
        lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                                 max_size=20))))
    def test_bfs_oracle(self, case):
        n, edges = case
        adj = np.zeros((n, n), bool)
        for a, b in edges:
            if a != b:
                adj[a, b] = adj[b, a] = True
        comp, _ = merge_clusters(adj)
        np.testing.assert_array_equal(comp, _bfs_components(adj))


class TestUnionFind:
    def test_groups(self):
        uf = UnionFind(6)
        uf.union(0, 5)
        uf.union(5, 2)
        uf.union(3, 4)
        assert sorted(sorted(g) for g in uf.groups()) == [[0, 2, 5], [1], [3, 4]]
        assert uf.find(2) == uf.find(0)
        assert uf.union(0, 2) == uf.find(0)


class TestPipeline:
    def test_duplicate_groups(self):
        X = np.array([[0.0, 0.0]] * 10 + [[1.0, 1.0]] * 10)
        truth = np.repeat([0, 1], 10)
        # symmetric groups only get equal density once the global MPS is tightly converged
        cfg = TrainConfig(convergence_tol=1e-10, max_sweeps=100, seed=0)
        result, _, _ = cluster(X, DpcParams(0.001, 0.99, train_cfg=cfg))
        assert result.num_final == 2
        assert ari(result.final_labels, truth) == 1.0

    def test_two_points(self):
        result, profile, _ = cluster(np.array([[0.1, 0.2], [0.8, 0.9]]))
        assert result.num_final in (1, 2)
        assert set(result.final_labels.tolist()) == set(range(result.num_final))
        assert profile.f_c == 1.0  # the two points are orthogonal; fallback cutoff

    def test_invariants(self):
        rng = np.random.default_rng(4)
        X = np.vstack([rng.normal(0, 0.2, (25, 3)), rng.normal(2, 0.2, (25, 3))])
        params = DpcParams(0.01, 0.95, train_cfg=TrainConfig(bond_cap=3, max_sweeps=8))
        out = run_pipeline(X, params)
        r = out.result
        assert np.array_equal(r.final_labels, r.component_of_local[r.local_labels])
        assert set(r.final_labels.tolist()) == set(range(r.num_final))
        # one center per local cluster, labeled in order of decreasing density
        assert r.local_labels[r.centers].tolist() == list(range(r.num_local))
        assert np.all(np.diff(out.profile.rho[r.centers]) <= 0)
        # a threshold above 1 disables every merge
        adj = build_connectivity(r.is_core, r.local_labels, out.fidelities, 1 + 1e-9)
        _, final = merge_clusters(adj, r.local_labels)
        np.testing.assert_array_equal(final, r.local_labels)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(size=(40, 2))
        a = cluster(X, DpcParams(0.01, 0.95))[0]
        b = cluster(X, DpcParams(0.01, 0.95))[0]
        np.testing.assert_array_equal(a.final_labels, b.final_labels)
        np.testing.assert_array_equal(a.is_core, b.is_core)

    def test_stage_tagging(self):
        X = np.array([[0.0, 1.0], [np.nan, 2.0], [1.0, 0.0]])
        with pytest.raises(StageError) as info:
            cluster(X)
        assert info.value.stage == "normalize"
        assert isinstance(info.value.cause, DataError)
        assert str(info.value).startswith("[normalize]")

    def test_rejects_single_point(self):
        with pytest.raises(StageError):
            cluster(np.zeros((1, 2)))

    @pytest.mark.parametrize("kwargs", [dict(dc_percent=0), dict(f_d=1.0), dict(orientation_mode="x")])
    def test_param_validation(self, kwargs):
        with pytest.raises(ParameterError):
            DpcParams(**kwargs)


class TestEstimator:
    def test_fit_predict(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(0, 0.05, (20, 2)), rng.normal(1, 0.05, (20, 2))])
        model = TensorNetworkDPC(dc_percent=0.01, f_d=0.95, bond_dim=2, max_sweeps=10)
        labels = model.fit_predict(X)
        assert labels.shape == (40,)
        assert model.labels_ is labels or np.array_equal(model.labels_, labels)
        assert model.core_sample_mask_.dtype == bool
        assert model.n_features_in_ == 2
        assert ari(labels, np.repeat([0, 1], 20)) == 1.0

    def test_params_and_clone(self):
        model = TensorNetworkDPC(f_d=0.97, bond_dim=4)
        params = clone(model).get_params()
        assert params["f_d"] == 0.97 and params["bond_dim"] == 4
        assert model.set_params(dc_percent=0.002).dc_percent == 0.002

    def test_input_validation(self):
        with pytest.raises(ValueError):
            TensorNetworkDPC().fit(np.array([[1.0, np.inf], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            TensorNetworkDPC().fit(np.zeros((1, 2)))
