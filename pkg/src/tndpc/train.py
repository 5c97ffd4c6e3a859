"""Negative-log-likelihood training of an MPS by single-site gradient sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .encoding import QuantumFeatureMap, fidelities_to_mps
from .exceptions import ContractError, ParameterError
from .mps import (
    MPS,
    absorb_left,
    absorb_right,
    batch_overlaps,
    entanglement_entropy,
    inner_product,
    move_center,
    random_mps,
    schmidt_spectrum,
)

logger = logging.getLogger(__name__)

MAX_HALVINGS = 10


@dataclass(frozen=True)
class TrainConfig:
    bond_cap: int = 8
    max_sweeps: int = 30
    learning_rate: float = 0.1
    convergence_tol: float = 1e-6
    seed: int = 0
    backtrack: bool = True

    def __post_init__(self):
        if int(self.bond_cap) != self.bond_cap or self.bond_cap < 1:
            raise ParameterError(f"bond_cap must be a positive integer, got {self.bond_cap!r}")
        if int(self.max_sweeps) != self.max_sweeps or self.max_sweeps < 1:
            raise ParameterError(f"max_sweeps must be >= 1, got {self.max_sweeps!r}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if not self.convergence_tol >= 0:
            raise ParameterError(f"convergence_tol must be >= 0, got {self.convergence_tol!r}")


@dataclass
class TrainLog:
    loss_per_sweep: list = field(default_factory=list)
    sweeps_run: int = 0
    converged: bool = False
    final_entropy_mid_bond: float = 0.0
    excluded_points: int = 0
    rejected_steps: int = 0


def as_states(data) -> np.ndarray:
    """Stack product states (or pass through an array) as ``(n, m, 2)`` amplitudes."""
    if isinstance(data, np.ndarray):
        states = np.asarray(data, dtype=float)
    else:
        data = list(data)
        if not data:
            raise ParameterError("training data is empty")
        lengths = {np.shape(getattr(p, "site_amplitudes", p))[0] for p in data}
        if len(lengths) != 1:
            raise ParameterError(f"inconsistent product-state lengths {sorted(lengths)}")
        states = np.stack([np.asarray(getattr(p, "site_amplitudes", p), dtype=float) for p in data])
    if states.ndim != 3 or states.shape[2] != 2:
        raise ParameterError(f"expected (n, m, 2) amplitudes, got shape {states.shape}")
    if states.shape[0] == 0:
        raise ParameterError("training data is empty")
    return states


def nll_loss(phi: MPS, data) -> float:
    """``ln|<phi|phi>| - mean_i ln|<phi|psi_i>|**2``.

    Returns ``inf`` when any overlap vanishes exactly.
    """
    states = as_states(data)
    if states.shape[1] != phi.length:
        raise ParameterError(f"length mismatch: MPS {phi.length} vs data {states.shape[1]}")
    norm = inner_product(phi, phi)
    sign, logabs = batch_overlaps(phi, states)
    if np.any(sign == 0):
        return float("inf")
    return float(norm.logabs - 2.0 * np.mean(logabs))


def _normalize_rows(env):
    scale = np.max(np.abs(env), axis=1, keepdims=True)
    return env / np.where(scale > 0, scale, 1.0)


class _Environments:
    """Per-point left/right partial contractions around the canonical center.

    Rows are rescaled to unit max-norm; ratios ``E_i / <phi|psi_i>`` are scale
    free so the rescaling never needs to be undone.
    """

    def __init__(self, phi: MPS, states: np.ndarray):
        self.states = states
        n, m, _ = states.shape
        self.left = [None] * m
        self.right = [None] * m
        self.left[0] = np.ones((n, 1))
        self.right[m - 1] = np.ones((n, 1))
        c = phi.canonical_center
        for k in range(c):
            self.left[k + 1] = _normalize_rows(absorb_left(self.left[k], phi.sites[k], states[:, k]))
        for k in range(m - 1, c, -1):
            self.right[k - 1] = _normalize_rows(absorb_right(self.right[k], phi.sites[k], states[:, k]))

    def projections(self, k):
        """``(L, v, R)`` for site ``k``; ``E_i = L_i (x) v_i (x) R_i``."""
        return self.left[k], self.states[:, k], self.right[k]

    def site_overlaps(self, k, tensor):
        left, amps, right = self.projections(k)
        return np.einsum("nb,nb->n", absorb_left(left, tensor, amps), right)

    def push_left_of(self, phi, k):
        self.left[k + 1] = _normalize_rows(absorb_left(self.left[k], phi.sites[k], self.states[:, k]))

    def push_right_of(self, phi, k):
        self.right[k - 1] = _normalize_rows(absorb_right(self.right[k], phi.sites[k], self.states[:, k]))


def _gradient(tensor, env, k):
    left, amps, right = env.projections(k)
    n = left.shape[0]
    psi = env.site_overlaps(k, tensor)
    nonzero = psi != 0
    excluded = int(n - np.count_nonzero(nonzero))
    w = np.zeros(n)
    w[nonzero] = 1.0 / psi[nonzero]
    a, s, b = tensor.shape
    outer = (amps[:, :, None] * right[:, None, :]).reshape(n, s * b)
    data_term = ((left * w[:, None]).T @ outer).reshape(a, s, b)
    grad = 2.0 * tensor / np.sum(tensor * tensor) - (2.0 / n) * data_term
    return grad, psi, excluded


def _site_loss(tensor, psi):
    """Site-local loss up to an additive constant fixed by the environments."""
    if np.any(psi == 0):
        return np.inf
    return np.log(np.sum(tensor * tensor)) - 2.0 * np.mean(np.log(np.abs(psi)))


def site_gradient(phi: MPS, data, k: int) -> np.ndarray:
    """Gradient of :func:`nll_loss` with respect to the tensor at site ``k``.

    ``phi`` must be canonical at ``k``; ``2 Y / <phi|phi> - (2/n) sum_i E_i / <phi|psi_i>``.
    Points with an exactly vanishing overlap are left out of the sum.
    """
    states = as_states(data)
    if not 0 <= k < phi.length:
        raise ParameterError(f"site {k} outside [0, {phi.length})")
    if phi.canonical_center != k:
        raise ContractError(f"MPS must be canonical at site {k}, center is {phi.canonical_center}")
    if states.shape[1] != phi.length:
        raise ParameterError(f"length mismatch: MPS {phi.length} vs data {states.shape[1]}")
    env = _Environments(phi, states)
    grad, _, excluded = _gradient(phi.sites[k], env, k)
    if excluded:
        logger.warning("%d data points with zero overlap excluded from the gradient", excluded)
    return grad


def _update_site(phi, env, k, cfg, log):
    tensor = phi.sites[k]
    grad, psi, excluded = _gradient(tensor, env, k)
    log.excluded_points += excluded
    old = _site_loss(tensor, psi)
    eta = cfg.learning_rate
    for _ in range(MAX_HALVINGS + 1 if cfg.backtrack else 1):
        cand = tensor - eta * grad
        cand /= np.linalg.norm(cand)
        new = _site_loss(cand, env.site_overlaps(k, cand))
        if not cfg.backtrack or new <= old:
            phi.sites[k] = cand
            return
        eta *= 0.5
    log.rejected_steps += 1
    phi.sites[k] = tensor / np.linalg.norm(tensor)


def sweep(phi: MPS, env: _Environments, cfg: TrainConfig, log: TrainLog) -> None:
    """One left-to-right and right-to-left pass of site updates, in place.

    Expects and leaves the center at site 0.
    """
    m = phi.length
    if m == 1:
        _update_site(phi, env, 0, cfg, log)
        return
    for k in range(m - 1):
        _update_site(phi, env, k, cfg, log)
        move_center(phi, k, k + 1)
        env.push_left_of(phi, k)
    for k in range(m - 1, 0, -1):
        _update_site(phi, env, k, cfg, log)
        move_center(phi, k, k - 1)
        env.push_right_of(phi, k)


def train_mps(data, cfg: TrainConfig | None = None) -> tuple[MPS, TrainLog]:
    """Fit a normalized MPS to product-state data by NLL gradient sweeps.

    Parameters
    ----------
    data : sequence of ProductState or ndarray of shape (n, m, 2)
    cfg : TrainConfig, optional

    Returns
    -------
    phi : MPS
        Unit-norm, canonical at site 0.
    log : TrainLog
    """
    cfg = cfg or TrainConfig()
    states = as_states(data)
    m = states.shape[1]
    phi = random_mps(m, cfg.bond_cap, cfg.seed)
    env = _Environments(phi, states)
    log = TrainLog()
    prev = None
    for _ in range(cfg.max_sweeps):
        sweep(phi, env, cfg, log)
        phi.sites[0] /= np.linalg.norm(phi.sites[0])
        loss = nll_loss(phi, states)
        log.loss_per_sweep.append(loss)
        log.sweeps_run += 1
        if prev is not None and np.isfinite(loss) and np.isfinite(prev):
            change = abs(prev - loss)
            if change == 0 or change < cfg.convergence_tol * abs(prev):
                log.converged = True
                break
        prev = loss
    if m >= 2:
        log.final_entropy_mid_bond = entanglement_entropy(schmidt_spectrum(phi))
    logger.debug("trained MPS: %d sweeps, loss %.6g", log.sweeps_run, log.loss_per_sweep[-1])
    return phi, log


class MPSDensityModel(BaseEstimator):
    """Born-machine density model over min-max scaled features.

    Parameters
    ----------
    bond_dim : int
    max_sweeps : int
    learning_rate : float
    tol : float
    backtrack : bool
    random_state : int

    Attributes
    ----------
    feature_map_ : QuantumFeatureMap
    mps_ : MPS
    train_log_ : TrainLog
    """

    def __init__(self, bond_dim=8, max_sweeps=30, learning_rate=0.1, tol=1e-6,
                 backtrack=True, random_state=0):
        self.bond_dim = bond_dim
        self.max_sweeps = max_sweeps
        self.learning_rate = learning_rate
        self.tol = tol
        self.backtrack = backtrack
        self.random_state = random_state

    def _config(self):
        return TrainConfig(self.bond_dim, self.max_sweeps, self.learning_rate, self.tol,
                           self.random_state, self.backtrack)

    def fit(self, X, y=None):
        self.feature_map_ = QuantumFeatureMap().fit(X)
        self.n_features_in_ = self.feature_map_.n_features_in_
        self.mps_, self.train_log_ = train_mps(self.feature_map_.transform(X), self._config())
        return self

    def fidelity(self, X):
        """``|<psi(x)|phi>|`` for each row."""
        check_is_fitted(self)
        return fidelities_to_mps(self.feature_map_.transform(X), self.mps_)

    def score_samples(self, X):
        """Log Born probability ``ln |<psi(x)|phi>|**2`` for each row."""
        check_is_fitted(self)
        _, logabs = batch_overlaps(self.mps_, self.feature_map_.transform(X))
        return 2.0 * logabs

    def score(self, X, y=None):
        """Negative training loss (mean log-likelihood) on ``X``."""
        check_is_fitted(self)
        return -nll_loss(self.mps_, self.feature_map_.transform(X))
