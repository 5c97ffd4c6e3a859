"""Feature maps from normalized vectors to product states, and fidelities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataError, ParameterError
from .mps import MPS, batch_overlaps, inner_product

CLAMP_TOL = 1e-12
_BLOCK_ROWS = 512


@dataclass(frozen=True)
class ProductState:
    """Rank-1 encoding of a single data point.

    ``site_amplitudes[l] = (cos(pi/2 x_l), sin(pi/2 x_l))``.
    """

    site_amplitudes: np.ndarray
    source_index: int | None = None

    def __post_init__(self):
        amps = np.asarray(self.site_amplitudes, dtype=float)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] < 1:
            raise ParameterError(f"site amplitudes must be (m >= 1, 2), got {amps.shape}")
        if not np.allclose(np.hypot(amps[:, 0], amps[:, 1]), 1.0, atol=1e-12, rtol=0):
            raise ParameterError("site amplitudes must have unit norm")
        object.__setattr__(self, "site_amplitudes", amps)

    @property
    def length(self) -> int:
        return self.site_amplitudes.shape[0]

    def to_mps(self) -> MPS:
        """The bond-dimension-1 MPS holding this state."""
        return MPS([a.reshape(1, 2, 1) for a in self.site_amplitudes], bond_cap=1)


@dataclass(frozen=True)
class NormalizedDataset:
    rows: np.ndarray
    feature_mins: np.ndarray = field(repr=False)
    feature_maxs: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def m(self) -> int:
        return self.rows.shape[1]


def _check_finite(raw):
    bad = np.argwhere(~np.isfinite(raw))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"non-finite value {raw[r, c]!r} at row {r}, column {c}")


def minmax_normalize(raw) -> NormalizedDataset:
    """Column-wise min-max scaling into ``[0, 1]``.

    Constant columns map to 0.5 so that the corresponding site sits halfway
    between ``|0>`` and ``|1>``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if raw.ndim != 2 or raw.shape[0] < 1 or raw.shape[1] < 1:
        raise ParameterError(f"expected a non-empty (n, m) matrix, got shape {raw.shape}")
    _check_finite(raw)
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    const = span == 0
    rows = (raw - lo) / np.where(const, 1.0, span)
    rows[:, const] = 0.5
    np.clip(rows, 0.0, 1.0, out=rows)
    return NormalizedDataset(rows, lo, hi)


def _checked_unit_interval(x, tol=CLAMP_TOL):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("features must be finite")
    if np.any(x < -tol) or np.any(x > 1 + tol):
        raise ParameterError("features must lie in [0, 1]")
    return np.clip(x, 0.0, 1.0)


def _amplitudes(x):
    # cos(pi/2 x) written as sin(pi/2 (1 - x)) so that x = 1 gives an exact zero
    half = 0.5 * np.pi
    return np.stack([np.sin(half * (1.0 - x)), np.sin(half * x)], axis=-1)


def encode_point(x, source_index=None) -> ProductState:
    """Encode a vector with entries in ``[0, 1]`` as a product state."""
    x = _checked_unit_interval(np.atleast_1d(x))
    if x.ndim != 1:
        raise ParameterError("encode_point expects a single vector")
    return ProductState(_amplitudes(x), source_index)


def encode_rows(rows) -> np.ndarray:
    """Vectorized :func:`encode_point` over an ``(n, m)`` matrix; returns ``(n, m, 2)``."""
    return _amplitudes(_checked_unit_interval(np.atleast_2d(rows)))


def pairwise_fidelity(a: ProductState, b: ProductState) -> float:
    """Closed-form ``|<a|b>| = prod_l |cos(pi/2 (x_al - x_bl))|``.

    The per-site overlap ``cos*cos + sin*sin`` is evaluated directly from the
    amplitudes, accumulated in log space.
    """
    pa, pb = a.site_amplitudes, b.site_amplitudes
    if pa.shape != pb.shape:
        raise ParameterError(f"length mismatch: {pa.shape[0]} vs {pb.shape[0]}")
    per_site = np.abs(np.sum(pa * pb, axis=1))
    if np.any(per_site == 0):
        return 0.0
    return float(np.exp(np.sum(np.log(per_site))))


def fidelity_matrix(dataset) -> np.ndarray:
    """Symmetric ``(n, n)`` matrix of pairwise fidelities with unit diagonal.

    Accepts a :class:`NormalizedDataset` or an ``(n, m)`` array in ``[0, 1]``.
    Computed in row blocks to bound peak memory.
    """
    rows = _checked_unit_interval(getattr(dataset, "rows", dataset))
    rows = np.atleast_2d(rows)
    n, m = rows.shape
    half = 0.5 * np.pi
    out = np.empty((n, n))
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(n, start + _BLOCK_ROWS)
        block = out[start:stop]
        block[...] = 1.0
        for l in range(m):
            gap = np.abs(rows[start:stop, l, None] - rows[None, :, l])
            # cos(pi/2 gap) = sin(pi/2 (1 - gap)), exactly zero for opposite corners
            block *= np.sin(half * (1.0 - gap))
    # |a - b| == |b - a| exactly in IEEE arithmetic, so out is symmetric
    np.fill_diagonal(out, 1.0)
    return out


def fidelity_to_mps(p: ProductState, phi: MPS) -> float:
    """``|<p|phi>|`` for a single product state."""
    return inner_product(phi, p).magnitude


def fidelities_to_mps(states, phi: MPS) -> np.ndarray:
    """Batch form of :func:`fidelity_to_mps` for ``(n, m, 2)`` amplitudes."""
    sign, logabs = batch_overlaps(phi, states)
    return np.where(sign == 0, 0.0, np.exp(logabs))


class QuantumFeatureMap(TransformerMixin, BaseEstimator):
    """Min-max scale features and map each row to per-site qubit amplitudes.

    ``transform`` returns an ``(n, m, 2)`` array of ``(cos, sin)`` pairs. Values
    outside the fitted range are clipped into ``[0, 1]``.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        norm = minmax_normalize(X)
        self.data_min_ = norm.feature_mins
        self.data_max_ = norm.feature_maxs
        self.n_features_in_ = X.shape[1]
        return self

    def normalize(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        span = self.data_max_ - self.data_min_
        const = span == 0
        out = (X - self.data_min_) / np.where(const, 1.0, span)
        out[:, const] = 0.5
        return np.clip(out, 0.0, 1.0)

    def transform(self, X):
        return encode_rows(self.normalize(X))
