"""Classical density-peak clustering on Euclidean distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .dpclus import density_order
from .exceptions import ParameterError

KERNELS = ("cutoff", "gaussian")


@dataclass(frozen=True)
class DpcBaselineParams:
    dc_percent: float = 0.02
    kernel: str = "gaussian"
    k: int = 2

    def __post_init__(self):
        if not 0 < self.dc_percent < 1:
            raise ParameterError(f"dc_percent must be in (0, 1), got {self.dc_percent!r}")
        if self.kernel not in KERNELS:
            raise ParameterError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k!r}")


def dpc_rho(dist_matrix, d_c: float, kernel: str = "gaussian") -> np.ndarray:
    """Local density: neighbour count within ``d_c`` or a Gaussian kernel sum."""
    if not d_c > 0:
        raise ParameterError(f"cutoff distance must be positive, got {d_c!r}")
    if kernel not in KERNELS:
        raise ParameterError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    d = np.asarray(dist_matrix, dtype=float)
    off = ~np.eye(d.shape[0], dtype=bool)
    if kernel == "cutoff":
        return ((d < d_c) & off).sum(axis=1).astype(float)
    with np.errstate(over="ignore"):  # far pairs underflow to a zero kernel weight
        weights = np.exp(-(d / d_c) ** 2)
    return np.where(off, weights, 0.0).sum(axis=1)


def dpc_delta(rho, dist_matrix):
    """Distance to the nearest higher-density point; the maximum gets its farthest distance."""
    rho = np.asarray(rho, dtype=float)
    d = np.asarray(dist_matrix, dtype=float)
    n = rho.size
    if d.shape != (n, n):
        raise ParameterError(f"distance matrix {d.shape} does not match {n} densities")
    order = density_order(rho)
    delta = np.empty(n)
    nhd = np.full(n, -1, dtype=np.int64)
    delta[order[0]] = d[order[0]].max()
    for p in range(1, n):
        i = order[p]
        higher = order[:p]
        vals = d[i, higher]
        best = vals.min()
        nhd[i] = int(higher[vals == best].min())
        delta[i] = best
    return delta, nhd


def dpc_cluster(raw_data, params: DpcBaselineParams | None = None):
    """Density-peak clustering with the ``k`` largest ``rho * delta`` as centers.

    ``d_c`` is the ``dc_percent`` quantile of all pairwise distances.

    Returns
    -------
    labels : ndarray of int
    centers : ndarray of int
    """
    params = params or DpcBaselineParams()
    x = np.asarray(raw_data, dtype=float)
    n = x.shape[0]
    if params.k > n:
        raise ParameterError(f"k = {params.k} exceeds the number of points {n}")
    if n == 1:
        return np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64)
    condensed = pdist(x)
    d_c = float(np.quantile(condensed, params.dc_percent))
    if d_c <= 0:
        positive = condensed[condensed > 0]
        if positive.size == 0:
            return np.zeros(n, dtype=np.int64), np.array([0])
        d_c = float(positive.min())
    dist = squareform(condensed)
    rho = dpc_rho(dist, d_c, params.kernel)
    delta, nhd = dpc_delta(rho, dist)
    gamma = rho * delta
    centers = np.lexsort((np.arange(n), -gamma))[: params.k]
    top = density_order(rho)[0]
    if top not in centers:
        # the density maximum has no higher neighbour to inherit from
        centers[-1] = top
    labels = np.full(n, -1, dtype=np.int64)
    labels[centers] = np.arange(centers.size)
    for i in density_order(rho):
        if labels[i] < 0:
            labels[i] = labels[nhd[i]]
    return labels, centers


class DensityPeakClustering(ClusterMixin, BaseEstimator):
    """Classical density-peak clustering with top-``k`` decision-graph centers.

    Parameters
    ----------
    n_clusters : int, default=2
    dc_percent : float, default=0.02
    kernel : {"gaussian", "cutoff"}, default="gaussian"
    """

    def __init__(self, n_clusters=2, dc_percent=0.02, kernel="gaussian"):
        self.n_clusters = n_clusters
        self.dc_percent = dc_percent
        self.kernel = kernel

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        params = DpcBaselineParams(self.dc_percent, self.kernel, self.n_clusters)
        self.labels_, self.centers_ = dpc_cluster(X, params)
        return self
