"""Real-valued matrix product states.

Site tensors are stored as ``(left_bond, 2, right_bond)`` arrays. Overlaps are
carried around as ``(sign, logabs)`` pairs, in the same spirit as
:func:`numpy.linalg.slogdet`, so that contractions over many sites never
underflow. A zero overlap is reported as ``sign == 0`` and ``logabs == -inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import ContractError, ParameterError

PHYS_DIM = 2
ISOMETRY_TOL = 1e-10
SVD_RTOL = 1e-14
NORM_TOL = 1e-8


class Overlap(NamedTuple):
    """Signed log-magnitude of a scalar overlap."""

    sign: float
    logabs: float

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return float(self.sign * np.exp(self.logabs))

    @property
    def magnitude(self) -> float:
        return 0.0 if self.sign == 0 else float(np.exp(self.logabs))


def max_bond_dims(length: int, bond_cap: int) -> list[int]:
    """Bond dimensions ``min(D, 2**i, 2**(m-i))`` for bonds ``0..m``."""
    dims = []
    for i in range(length + 1):
        # exponents beyond 62 would overflow Python-int comparisons with numpy
        left = 1 << min(i, 62)
        right = 1 << min(length - i, 62)
        dims.append(int(min(bond_cap, left, right)))
    return dims


class MPS:
    """A finite, open-boundary matrix product state.

    Parameters
    ----------
    sites : sequence of ndarray
        Rank-3 tensors shaped ``(left, 2, right)``.
    bond_cap : int, optional
        The bond-dimension cap ``D``. Defaults to the largest bond present.
    canonical_center : int or None
        Site index of the orthogonality center, if the caller guarantees one.
    """

    def __init__(self, sites: Sequence[np.ndarray], bond_cap: int | None = None,
                 canonical_center: int | None = None):
        sites = [np.asarray(s, dtype=float) for s in sites]
        if not sites:
            raise ParameterError("an MPS needs at least one site")
        for i, s in enumerate(sites):
            if s.ndim != 3 or s.shape[1] != PHYS_DIM:
                raise ParameterError(f"site {i} has shape {s.shape}, expected (l, 2, r)")
        if sites[0].shape[0] != 1 or sites[-1].shape[2] != 1:
            raise ParameterError("boundary bonds must have dimension 1")
        for i in range(len(sites) - 1):
            if sites[i].shape[2] != sites[i + 1].shape[0]:
                raise ParameterError(f"bond mismatch between sites {i} and {i + 1}")
        dims = [s.shape[2] for s in sites[:-1]]
        if bond_cap is None:
            bond_cap = max(dims, default=1)
        if bond_cap < 1 or any(d > bond_cap for d in dims):
            raise ParameterError(f"bond dimensions {dims} exceed cap {bond_cap}")
        if canonical_center is not None and not 0 <= canonical_center < len(sites):
            raise ParameterError(f"canonical center {canonical_center} out of range")
        self.sites = sites
        self.bond_cap = int(bond_cap)
        self.canonical_center = canonical_center

    @property
    def length(self) -> int:
        return len(self.sites)

    def __len__(self):
        return len(self.sites)

    @property
    def bond_dims(self) -> list[int]:
        """All bond dimensions including the two boundary bonds."""
        return [self.sites[0].shape[0]] + [s.shape[2] for s in self.sites]

    def copy(self) -> "MPS":
        return MPS([s.copy() for s in self.sites], self.bond_cap, self.canonical_center)

    def norm(self) -> float:
        return inner_product(self, self).magnitude ** 0.5

    def __repr__(self):
        return (f"MPS(length={self.length}, bond_dims={self.bond_dims[1:-1]}, "
                f"bond_cap={self.bond_cap}, canonical_center={self.canonical_center})")


def random_mps(length: int, bond_cap: int, seed=None) -> MPS:
    """Random normalized MPS in right-canonical form (center at site 0).

    Entries are i.i.d. standard normal before canonicalization.
    """
    if int(length) != length or length < 1:
        raise ParameterError(f"length must be a positive integer, got {length!r}")
    if int(bond_cap) != bond_cap or bond_cap < 1:
        raise ParameterError(f"bond_cap must be a positive integer, got {bond_cap!r}")
    rng = np.random.default_rng(seed)
    dims = max_bond_dims(int(length), int(bond_cap))
    sites = [rng.standard_normal((dims[i], PHYS_DIM, dims[i + 1])) for i in range(length)]
    mps = canonicalize(MPS(sites, int(bond_cap)), 0)
    mps.sites[0] /= np.linalg.norm(mps.sites[0])
    return mps


def _left_qr(tensor):
    left, phys, right = tensor.shape
    q, r = np.linalg.qr(tensor.reshape(left * phys, right))
    return q.reshape(left, phys, q.shape[1]), r


def _right_qr(tensor):
    left, phys, right = tensor.shape
    q, r = np.linalg.qr(tensor.reshape(left, phys * right).T)
    return q.T.reshape(q.shape[1], phys, right), r.T


def move_center(mps: MPS, site: int, center: int) -> None:
    """Shift the orthogonality center one step in place, from ``site`` to ``center``.

    ``center`` must be ``site + 1`` or ``site - 1``.
    """
    if center == site + 1:
        q, r = _left_qr(mps.sites[site])
        mps.sites[site] = q
        mps.sites[center] = np.tensordot(r, mps.sites[center], axes=(1, 0))
    elif center == site - 1:
        q, r = _right_qr(mps.sites[site])
        mps.sites[site] = q
        mps.sites[center] = np.tensordot(mps.sites[center], r, axes=(2, 0))
    else:
        raise ParameterError("the center can only move to a neighbouring site")
    mps.canonical_center = center


def canonicalize(mps: MPS, center: int) -> MPS:
    """Return an equivalent MPS in mixed-canonical form around ``center``.

    Sites left of the center become left isometries and sites to the right
    become right isometries. The represented state (including its norm) is
    unchanged; bond dimensions can only shrink.
    """
    if not 0 <= center < mps.length:
        raise ParameterError(f"center {center} outside [0, {mps.length})")
    out = mps.copy()
    for i in range(center):
        move_center(out, i, i + 1)
    for i in range(out.length - 1, center, -1):
        move_center(out, i, i - 1)
    out.canonical_center = center
    return out


def normalize(mps: MPS) -> MPS:
    """Return a unit-norm copy, canonical around its current center (or site 0)."""
    center = 0 if mps.canonical_center is None else mps.canonical_center
    out = canonicalize(mps, center)
    nrm = np.linalg.norm(out.sites[center])
    if nrm == 0:
        raise ContractError("cannot normalize the zero state")
    out.sites[center] /= nrm
    return out


def check_isometries(mps: MPS, atol: float = ISOMETRY_TOL) -> bool:
    """True if every site obeys the isometry condition for its side of the center."""
    c = mps.canonical_center
    if c is None:
        return False
    for i, s in enumerate(mps.sites):
        if i < c:
            gram = np.einsum("asb,asc->bc", s, s)
        elif i > c:
            gram = np.einsum("asb,csb->ac", s, s)
        else:
            continue
        if not np.allclose(gram, np.eye(gram.shape[0]), atol=atol, rtol=0):
            return False
    return True


def site_array(state) -> np.ndarray:
    """Coerce a product state (or array of per-site amplitudes) to shape ``(m, 2)``."""
    amps = getattr(state, "site_amplitudes", state)
    amps = np.asarray(amps, dtype=float)
    if amps.ndim != 2 or amps.shape[1] != PHYS_DIM:
        raise ParameterError(f"product state amplitudes must be (m, 2), got {amps.shape}")
    return amps


def inner_product(a: MPS, b) -> Overlap:
    """Exact overlap ``<a|b>`` of an MPS with another MPS or a product state."""
    if isinstance(b, MPS):
        if a.length != b.length:
            raise ParameterError(f"length mismatch: {a.length} vs {b.length}")
        env = np.ones((1, 1))
        logabs = 0.0
        for sa, sb in zip(a.sites, b.sites):
            env = np.einsum("ab,asc,bsd->cd", env, sa, sb, optimize=True)
            scale = np.max(np.abs(env))
            if scale == 0:
                return Overlap(0.0, -np.inf)
            env /= scale
            logabs += np.log(scale)
        val = env[0, 0]
    else:
        amps = site_array(b)
        if amps.shape[0] != a.length:
            raise ParameterError(f"length mismatch: {a.length} vs {amps.shape[0]}")
        sign, logabs = batch_overlaps(a, amps[None])
        return Overlap(float(sign[0]), float(logabs[0]))
    if val == 0:
        return Overlap(0.0, -np.inf)
    return Overlap(float(np.sign(val)), float(logabs + np.log(abs(val))))


def absorb_left(env: np.ndarray, site: np.ndarray, amps: np.ndarray) -> np.ndarray:
    """Extend per-point left environments ``(n, l)`` through one site to ``(n, r)``."""
    left, phys, right = site.shape
    t = (env @ site.reshape(left, phys * right)).reshape(-1, phys, right)
    return np.einsum("nsb,ns->nb", t, amps)


def absorb_right(env: np.ndarray, site: np.ndarray, amps: np.ndarray) -> np.ndarray:
    """Extend per-point right environments ``(n, r)`` through one site to ``(n, l)``."""
    left, phys, right = site.shape
    t = (env @ site.transpose(2, 1, 0).reshape(right, phys * left)).reshape(-1, phys, left)
    return np.einsum("nsa,ns->na", t, amps)


def batch_overlaps(mps: MPS, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Overlaps of one MPS with ``n`` product states stacked as ``(n, m, 2)``.

    Returns
    -------
    sign, logabs : ndarray of shape (n,)
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 3 or states.shape[2] != PHYS_DIM:
        raise ParameterError(f"expected (n, m, 2) amplitudes, got {states.shape}")
    if states.shape[1] != mps.length:
        raise ParameterError(f"length mismatch: {mps.length} vs {states.shape[1]}")
    n = states.shape[0]
    env = np.ones((n, 1))
    logabs = np.zeros(n)
    for k, site in enumerate(mps.sites):
        env = absorb_left(env, site, states[:, k, :])
        scale = np.max(np.abs(env), axis=1)
        safe = np.where(scale > 0, scale, 1.0)
        env /= safe[:, None]
        with np.errstate(divide="ignore"):
            logabs += np.log(scale)
    val = env[:, 0]
    sign = np.sign(val)
    with np.errstate(divide="ignore"):
        logabs = np.where(sign == 0, -np.inf, logabs + np.log(np.abs(val)))
    return sign, logabs


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Schmidt coefficients across one bond, sorted non-increasing."""

    coefficients: np.ndarray
    bond_position: int

    @property
    def rank(self) -> int:
        return int(self.coefficients.size)


def schmidt_spectrum(mps: MPS, bond: int | None = None) -> SchmidtSpectrum:
    """Schmidt decomposition across ``bond`` (default: the middle bond ``m // 2``).

    Bond ``b`` separates sites ``0..b-1`` from sites ``b..m-1``. The input must be
    normalized; singular values below ``1e-14`` of the largest are discarded.
    """
    m = mps.length
    if bond is None:
        bond = m // 2
    if not 1 <= bond <= m - 1:
        raise ParameterError(f"bond {bond} outside [1, {m - 1}]")
    norm2 = inner_product(mps, mps).magnitude
    if abs(norm2 - 1.0) > NORM_TOL:
        raise ContractError(f"schmidt_spectrum needs a normalized state, <phi|phi> = {norm2:.6g}")
    canon = canonicalize(mps, bond - 1)
    center = canon.sites[bond - 1]
    left, phys, right = center.shape
    s = np.linalg.svd(center.reshape(left * phys, right), compute_uv=False)
    s = np.sort(s)[::-1]
    s = s[s > SVD_RTOL * s[0]] if s[0] > 0 else s[:1]
    s = s / np.linalg.norm(s)
    return SchmidtSpectrum(s, int(bond))


def entanglement_entropy(spectrum) -> float:
    """Von Neumann entropy ``-sum(l**2 * ln(l**2))`` in nats."""
    lam = np.asarray(getattr(spectrum, "coefficients", spectrum), dtype=float)
    p = lam[lam > 0] ** 2
    return float(max(0.0, -np.sum(p * np.log(p))))
