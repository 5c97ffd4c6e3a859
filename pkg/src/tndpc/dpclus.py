"""Density-peak clustering driven by MPS fidelities.

Pipeline: min-max normalize, encode, train a global MPS, compute the density
``rho`` from each point's fidelity to it and the isolation ``delta`` from
pairwise fidelities, pick local centers, grow local clusters along
nearest-higher-density links, split each local cluster into core and border
points with a per-cluster MPS, then merge local clusters whose core points
are similar enough.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .encoding import encode_rows, fidelities_to_mps, fidelity_matrix, minmax_normalize
from .exceptions import NumericalError, ParameterError, StageError, TNDPCError
from .train import TrainConfig, TrainLog, train_mps
from .unionfind import UnionFind

logger = logging.getLogger(__name__)

MODES = ("dpc-consistent", "literal")
# rho values within this relative distance of the mean count as above it
RHO_MEAN_RTOL = 1e-6
CORE_EQUAL_TOL = 1e-12


@dataclass(frozen=True)
class DpcParams:
    dc_percent: float = 0.001
    f_d: float = 0.99
    orientation_mode: str = "dpc-consistent"
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not 0 < self.dc_percent < 1:
            raise ParameterError(f"dc_percent must be in (0, 1), got {self.dc_percent!r}")
        if not 0 < self.f_d < 1:
            raise ParameterError(f"f_d must be in (0, 1), got {self.f_d!r}")
        if self.orientation_mode not in MODES:
            raise ParameterError(f"orientation_mode must be one of {MODES}, got {self.orientation_mode!r}")

    @property
    def seed(self):
        return self.train_cfg.seed


@dataclass
class DensityProfile:
    rho: np.ndarray
    delta: np.ndarray
    nhd: np.ndarray  # -1 where absent
    f_global: np.ndarray
    f_c: float


@dataclass
class ClusteringResult:
    local_labels: np.ndarray
    is_core: np.ndarray
    component_of_local: np.ndarray
    final_labels: np.ndarray
    centers: np.ndarray
    core_fidelity: np.ndarray = field(repr=False, default=None)

    @property
    def num_local(self) -> int:
        return int(self.component_of_local.size)

    @property
    def num_final(self) -> int:
        return int(self.final_labels.max()) + 1 if self.final_labels.size else 0


def _upper_triangle(fid):
    n = fid.shape[0]
    return np.concatenate([fid[i, i + 1:] for i in range(n - 1)])


def compute_f_c(fid_matrix, dc_percent: float) -> float:
    """Cutoff fidelity: the ``1 - dc_percent`` quantile of off-diagonal fidelities.

    So a fraction ``dc_percent`` of all point pairs are more similar than ``f_c``.
    Linear interpolation between order statistics.
    """
    fid = np.asarray(fid_matrix, dtype=float)
    if fid.ndim != 2 or fid.shape[0] != fid.shape[1]:
        raise ParameterError(f"fidelity matrix must be square, got {fid.shape}")
    if fid.shape[0] < 2:
        raise ParameterError("need at least two points to derive a cutoff")
    if not 0 < dc_percent < 1:
        raise ParameterError(f"dc_percent must be in (0, 1), got {dc_percent!r}")
    return float(np.quantile(_upper_triangle(fid), 1.0 - dc_percent))


def _usable_cutoff(f_c, fid):
    # f_c = 0 means almost every pair is orthogonal; fall back to the dc -> 0 limit
    # (largest pairwise fidelity), or to 1 when all points are mutually orthogonal,
    # where only the ordering of rho matters
    if f_c > 0:
        return f_c
    top = float(_upper_triangle(fid).max())
    logger.warning("cutoff fidelity is 0; using %s instead", top if top > 0 else 1.0)
    return top if top > 0 else 1.0


def compute_rho(f_global, f_c: float) -> np.ndarray:
    """``rho_i = tanh(f_i / (10 f_c))``."""
    if not f_c > 0:
        raise NumericalError(f"degenerate cutoff f_c = {f_c!r}; all pairwise fidelities vanish")
    f_global = np.asarray(f_global, dtype=float)
    if np.any(f_global < 0):
        raise ParameterError("fidelities must be non-negative")
    return np.tanh(f_global / (10.0 * f_c))


def density_order(rho) -> np.ndarray:
    """Indices by decreasing ``rho``; equal densities rank the smaller index higher."""
    rho = np.asarray(rho)
    return np.lexsort((np.arange(rho.size), -rho))


def compute_delta(rho, fid_matrix, mode: str = "dpc-consistent"):
    """Isolation ``delta`` and nearest-higher-density index ``nhd``.

    In ``"dpc-consistent"`` mode ``nhd[i]`` is the most similar higher-density
    point and ``delta_i = 1 - f(i, nhd[i])``. In ``"literal"`` mode ``nhd[i]``
    is the least similar higher-density point and ``delta_i = f(i, nhd[i])``.
    The density maximum gets ``nhd = -1`` and ``delta = 1`` in both modes.

    Returns
    -------
    delta : ndarray of float
    nhd : ndarray of int
    """
    if mode not in MODES:
        raise ParameterError(f"unknown orientation mode {mode!r}")
    rho = np.asarray(rho, dtype=float)
    fid = np.asarray(fid_matrix, dtype=float)
    n = rho.size
    if fid.shape != (n, n):
        raise ParameterError(f"fidelity matrix {fid.shape} does not match {n} densities")
    order = density_order(rho)
    delta = np.ones(n)
    nhd = np.full(n, -1, dtype=np.int64)
    for p in range(1, n):
        i = order[p]
        higher = order[:p]
        vals = fid[i, higher]
        best = vals.max() if mode == "dpc-consistent" else vals.min()
        j = int(higher[vals == best].min())
        nhd[i] = j
        delta[i] = 1.0 - best if mode == "dpc-consistent" else best
    return delta, nhd


def select_local_centers(profile: DensityProfile, mode: str = "dpc-consistent") -> np.ndarray:
    """Points with isolation above the cutoff and density above the mean.

    The density maximum is always included: it roots every ``nhd`` chain.
    Returned in decreasing-density order.
    """
    rho, delta = profile.rho, profile.delta
    theta = 1.0 - profile.f_c if mode == "dpc-consistent" else profile.f_c
    mean = rho.mean()
    dense = rho > mean - RHO_MEAN_RTOL * abs(mean)
    chosen = (delta > theta) & dense
    order = density_order(rho)
    chosen[order[0]] = True
    return np.array([i for i in order if chosen[i]], dtype=np.int64)


def assign_local_clusters(centers, nhd, rho) -> np.ndarray:
    """Label centers ``0..L-1`` by decreasing density; others inherit along ``nhd``."""
    nhd = np.asarray(nhd)
    n = nhd.size
    labels = np.full(n, -1, dtype=np.int64)
    center_set = set(int(c) for c in centers)
    order = density_order(rho)
    next_label = 0
    for i in order:
        if i in center_set:
            labels[i] = next_label
            next_label += 1
    for i in order:
        if labels[i] >= 0:
            continue
        j = nhd[i]
        if j < 0 or labels[j] < 0:
            raise NumericalError(f"point {i} does not reach a center along nearest-higher-density links")
        labels[i] = labels[j]
    return labels


def _cluster_core(states, cfg):
    if states.shape[0] == 1:
        return np.array([True]), np.ones(1)
    phi, _ = train_mps(states, cfg)
    fid = fidelities_to_mps(states, phi)
    mean = fid.mean()
    if np.all(np.abs(fid - mean) <= CORE_EQUAL_TOL):
        return np.ones(fid.size, dtype=bool), fid
    return fid > mean, fid


def classify_core_border(states, local_labels, train_cfg: TrainConfig | None = None, n_jobs=None):
    """Core flags from per-cluster MPS fidelities.

    A point is core when its fidelity to its own cluster's trained MPS exceeds
    the cluster mean. Singleton clusters and clusters whose fidelities are all
    equal are entirely core. Cluster ``k`` trains with seed ``seed + 1 + k``.

    Returns
    -------
    is_core : ndarray of bool
    fidelity : ndarray of float
        Each point's fidelity to its cluster MPS.
    """
    train_cfg = train_cfg or TrainConfig()
    states = np.asarray(states, dtype=float)
    local_labels = np.asarray(local_labels)
    num_local = int(local_labels.max()) + 1
    members = [np.flatnonzero(local_labels == k) for k in range(num_local)]
    jobs = (delayed(_cluster_core)(states[idx], replace(train_cfg, seed=train_cfg.seed + 1 + k))
            for k, idx in enumerate(members))
    results = Parallel(n_jobs=n_jobs)(jobs)
    is_core = np.zeros(local_labels.size, dtype=bool)
    fidelity = np.zeros(local_labels.size)
    for idx, (core, fid) in zip(members, results):
        is_core[idx] = core
        fidelity[idx] = fid
    return is_core, fidelity


def build_connectivity(is_core, local_labels, fid_matrix, f_d: float,
                       mode: str = "dpc-consistent") -> np.ndarray:
    """Symmetric boolean adjacency between local clusters.

    Clusters ``k != l`` are linked when some core point of ``k`` and some core
    point of ``l`` have fidelity ``>= f_d`` (``< f_d`` in literal mode).
    """
    local_labels = np.asarray(local_labels)
    num_local = int(local_labels.max()) + 1
    core = np.flatnonzero(is_core)
    sub = np.asarray(fid_matrix)[np.ix_(core, core)]
    linked = sub >= f_d if mode == "dpc-consistent" else sub < f_d
    onehot = np.zeros((core.size, num_local))
    onehot[np.arange(core.size), local_labels[core]] = 1.0
    adj = (onehot.T @ linked.astype(float) @ onehot) > 0
    np.fill_diagonal(adj, False)
    return adj


def merge_clusters(adjacency, local_labels=None):
    """Connected components of the cluster graph.

    Components are numbered in order of their smallest member. Returns
    ``component_of_local`` and, if ``local_labels`` is given, the final point
    labels (otherwise ``None``).
    """
    adj = np.asarray(adjacency, dtype=bool)
    num_local = adj.shape[0]
    uf = UnionFind(num_local)
    for k, l in zip(*np.nonzero(np.triu(adj, 1))):
        uf.union(int(k), int(l))
    component = np.empty(num_local, dtype=np.int64)
    ids = {}
    for k in range(num_local):
        component[k] = ids.setdefault(uf.find(k), len(ids))
    final = None if local_labels is None else component[np.asarray(local_labels)]
    return component, final


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (TNDPCError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class PipelineOutput:
    result: ClusteringResult
    profile: DensityProfile
    log: TrainLog
    mps: object
    fidelities: np.ndarray = field(repr=False)


def run_pipeline(raw_data, params: DpcParams, n_jobs=None) -> PipelineOutput:
    """Full clustering pipeline, keeping every intermediate."""
    raw = np.asarray(raw_data, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise StageError("input", ParameterError(f"need an (n >= 2, m) matrix, got shape {raw.shape}"))
    mode = params.orientation_mode
    norm = _stage("normalize", minmax_normalize, raw)
    states = _stage("encode", encode_rows, norm.rows)
    phi, log = _stage("train", train_mps, states, params.train_cfg)
    f_global = _stage("density", fidelities_to_mps, states, phi)
    fid = _stage("fidelity", fidelity_matrix, norm)
    f_c = _usable_cutoff(_stage("cutoff", compute_f_c, fid, params.dc_percent), fid)
    rho = _stage("density", compute_rho, f_global, f_c)
    delta, nhd = _stage("delta", compute_delta, rho, fid, mode)
    profile = DensityProfile(rho, delta, nhd, f_global, f_c)
    centers = _stage("centers", select_local_centers, profile, mode)
    local = _stage("assign", assign_local_clusters, centers, nhd, rho)
    is_core, core_fid = _stage("core-border", classify_core_border, states, local,
                               params.train_cfg, n_jobs)
    adj = _stage("connectivity", build_connectivity, is_core, local, fid, params.f_d, mode)
    component, final = _stage("merge", merge_clusters, adj, local)
    result = ClusteringResult(local, is_core, component, final, centers, core_fid)
    logger.info("%d points -> %d local clusters -> %d clusters", raw.shape[0],
                result.num_local, result.num_final)
    return PipelineOutput(result, profile, log, phi, fid)


def cluster(raw_data, params: DpcParams | None = None, n_jobs=None):
    """Cluster raw feature vectors.

    Returns
    -------
    result : ClusteringResult
    profile : DensityProfile
    log : TrainLog
        Training log of the global MPS.
    """
    out = run_pipeline(raw_data, params or DpcParams(), n_jobs=n_jobs)
    return out.result, out.profile, out.log


class TensorNetworkDPC(ClusterMixin, BaseEstimator):
    """Density-peak clustering with matrix-product-state fidelities.

    Does not need the number of clusters.

    Parameters
    ----------
    dc_percent : float, default=0.001
        Fraction of point pairs considered "close"; sets the cutoff fidelity.
    f_d : float, default=0.99
        Fidelity above which core points of two local clusters link them.
    bond_dim : int, default=8
    orientation_mode : {"dpc-consistent", "literal"}
    max_sweeps : int, default=30
    learning_rate : float, default=0.1
    tol : float, default=1e-6
    random_state : int, default=0
    n_jobs : int, optional
        Workers for the per-cluster MPS trainings.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    local_labels_ : ndarray of shape (n_samples,)
    core_sample_mask_ : ndarray of bool
    centers_ : ndarray of int
        Indices of the local cluster centers.
    density_profile_ : DensityProfile
    mps_ : MPS
        Global MPS trained on all samples.
    train_log_ : TrainLog
    """

    def __init__(self, dc_percent=0.001, f_d=0.99, bond_dim=8, orientation_mode="dpc-consistent",
                 max_sweeps=30, learning_rate=0.1, tol=1e-6, random_state=0, n_jobs=None):
        self.dc_percent = dc_percent
        self.f_d = f_d
        self.bond_dim = bond_dim
        self.orientation_mode = orientation_mode
        self.max_sweeps = max_sweeps
        self.learning_rate = learning_rate
        self.tol = tol
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _params(self):
        cfg = TrainConfig(self.bond_dim, self.max_sweeps, self.learning_rate, self.tol,
                          int(self.random_state), True)
        return DpcParams(self.dc_percent, self.f_d, self.orientation_mode, cfg)

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        out = run_pipeline(X, self._params(), n_jobs=self.n_jobs)
        self.result_ = out.result
        self.labels_ = out.result.final_labels
        self.local_labels_ = out.result.local_labels
        self.core_sample_mask_ = out.result.is_core
        self.centers_ = out.result.centers
        self.density_profile_ = out.profile
        self.mps_ = out.mps
        self.train_log_ = out.log
        return self
