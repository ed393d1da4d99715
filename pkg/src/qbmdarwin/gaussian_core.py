"""Symplectic linear algebra and measures on Gaussian states.

Conventions: hbar = 1, unit masses, quadratures interleaved as
``(x_1, p_1, x_2, p_2, ...)`` and covariances normalised so that the vacuum
has symplectic eigenvalue 1/2. Entropies are in nats.
"""

from __future__ import annotations

from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.special import xlogy

from qbmdarwin.errors import (
    ArityError,
    InvalidCovarianceError,
    InvalidSubsetError,
    NumericalDegeneracyError,
    UnphysicalStateError,
)

#: symplectic eigenvalues within this distance below 1/2 are clamped to 1/2
CLAMP_TOL = 1e-9
SYMMETRY_RTOL = 1e-12


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with one ``[[0, 1], [-1, 0]]`` block per mode."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _right_omega(mat: np.ndarray) -> np.ndarray:
    # mat @ symplectic_form(m) without forming the form
    out = np.empty_like(mat)
    out[..., 0::2] = -mat[..., 1::2]
    out[..., 1::2] = mat[..., 0::2]
    return out


def quadrature_indices(modes: Sequence[int]) -> np.ndarray:
    modes = np.asarray(modes, dtype=np.intp)
    return np.stack([2 * modes, 2 * modes + 1], axis=-1).reshape(-1)


class ModeSet:
    """Ordered collection of distinct mode labels (0 is the system).

    Parameters
    ----------
    indices : iterable of int
        Mode labels, order preserved.
    n_modes : int, optional
        Total mode count; when given the labels are range-checked.
    """

    __slots__ = ("indices",)

    def __init__(self, indices: Iterable[int], n_modes: int | None = None):
        idx = tuple(int(i) for i in indices)
        if len(set(idx)) != len(idx):
            raise InvalidSubsetError(f"duplicate mode labels in {idx}")
        if any(i < 0 for i in idx):
            raise InvalidSubsetError(f"negative mode label in {idx}")
        if n_modes is not None and any(i >= n_modes for i in idx):
            raise InvalidSubsetError(
                f"mode label out of range for {n_modes} modes: {max(idx)}"
            )
        self.indices = idx

    def validate(self, n_modes: int) -> "ModeSet":
        return ModeSet(self.indices, n_modes)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __eq__(self, other) -> bool:
        if isinstance(other, ModeSet):
            return self.indices == other.indices
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.indices)

    def __repr__(self) -> str:
        return f"ModeSet({list(self.indices)})"


class GaussianState:
    """Gaussian state given by its mean vector and covariance matrix.

    The covariance may instead be supplied through a factor ``F`` with
    ``cov = F @ F.T``. States produced by unitary evolution of a pure
    state carry such a factor; spectra are then computed from the factor,
    which keeps strongly squeezed states (variances ~ e^{2r}) accurate.
    """

    def __init__(self, mean, cov=None, *, factor=None):
        mean = np.asarray(mean, dtype=float)
        if mean.ndim != 1 or mean.size % 2:
            raise ArityError(f"mean must be a vector of even length, got {mean.shape}")
        if cov is None and factor is None:
            raise InvalidCovarianceError("either cov or factor is required")
        if factor is not None:
            factor = np.asarray(factor, dtype=float)
            if factor.ndim != 2 or factor.shape[0] != mean.size:
                raise ArityError(f"factor shape {factor.shape} does not match mean")
        if cov is not None:
            cov = np.asarray(cov, dtype=float)
            if cov.shape != (mean.size, mean.size):
                raise ArityError(f"cov shape {cov.shape} does not match mean")
            _require_symmetric(cov)
            self.__dict__["cov"] = cov
        self.mean = mean
        self.factor = factor

    @cached_property
    def cov(self) -> np.ndarray:
        return self.factor @ self.factor.T

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def __repr__(self) -> str:
        kind = "factored" if self.factor is not None else "dense"
        return f"GaussianState(n_modes={self.n_modes}, {kind})"


def reduce_to_modes(state: GaussianState, subset) -> GaussianState:
    """Marginal state on ``subset`` (row/column sub-selection, order preserved)."""
    if not isinstance(subset, ModeSet):
        subset = ModeSet(subset)
    subset = subset.validate(state.n_modes)
    q = quadrature_indices(subset.indices)
    factor = state.factor[q] if state.factor is not None else None
    if "cov" in state.__dict__ or factor is None:
        return GaussianState(state.mean[q], state.cov[np.ix_(q, q)], factor=factor)
    return GaussianState(state.mean[q], factor=factor)


def _require_symmetric(cov: np.ndarray) -> None:
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise InvalidCovarianceError(f"covariance must be square of even size, got {cov.shape}")
    scale = max(np.max(np.abs(cov)), np.finfo(float).tiny)
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
        raise InvalidCovarianceError("covariance matrix is not symmetric")


def _paired_singular_values(antisym: np.ndarray) -> np.ndarray:
    # singular values of a real antisymmetric matrix come in equal pairs
    sv = np.sort(sla.svdvals(antisym, check_finite=False))
    return 0.5 * (sv[0::2] + sv[1::2])


def _raw_nu_dense(cov: np.ndarray) -> np.ndarray:
    try:
        chol = sla.cholesky(cov, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovarianceError("covariance matrix is not positive definite") from exc
    # eig(i Omega C C^T) == eig(i C^T Omega C)
    return _paired_singular_values(_right_omega(chol.T) @ chol)


def _raw_nu_factor(factor: np.ndarray) -> np.ndarray:
    rows, cols = factor.shape
    if cols < rows:
        raise InvalidCovarianceError("factor has fewer columns than rows; covariance is singular")
    if cols == rows:
        # F^T Omega F never mixes columns, so a few huge columns (strong
        # squeezing) do not pollute the near-1/2 eigenvalues
        gram = _right_omega(factor.T) @ factor
        return _paired_singular_values(0.5 * (gram - gram.T))
    r = sla.qr(factor.T, mode="r", check_finite=False)[0][:rows]
    return _paired_singular_values(_right_omega(r) @ r.T)


def _clamp(nu: np.ndarray) -> np.ndarray:
    low = nu < 0.5 - CLAMP_TOL
    if np.any(low):
        raise UnphysicalStateError(
            f"symplectic eigenvalue {nu[low].min():.12g} below 1/2"
        )
    return np.maximum(nu, 0.5)


def symplectic_eigenvalues(cov) -> np.ndarray:
    """Sorted symplectic eigenvalues of a covariance matrix.

    Accepts a covariance array or a :class:`GaussianState` (whose factor is
    used when present). Values in ``[1/2 - 1e-9, 1/2)`` are clamped to 1/2.

    Raises
    ------
    InvalidCovarianceError
        Non-symmetric or non positive definite input.
    UnphysicalStateError
        An eigenvalue lies below ``1/2 - 1e-9``.
    """
    if isinstance(cov, GaussianState):
        if cov.factor is not None:
            return _clamp(_raw_nu_factor(cov.factor))
        cov = cov.cov
    cov = np.asarray(cov, dtype=float)
    _require_symmetric(cov)
    return _clamp(_raw_nu_dense(cov))


def entropy_from_symplectic(nu) -> float:
    """Sum of ``(v+1/2) ln(v+1/2) - (v-1/2) ln(v-1/2)`` over the eigenvalues."""
    excess = np.asarray(nu, dtype=float) - 0.5
    return float(np.sum((1.0 + excess) * np.log1p(excess) - xlogy(excess, excess)))


def von_neumann_entropy(cov) -> float:
    """Von Neumann entropy in nats of a Gaussian covariance or state."""
    return entropy_from_symplectic(symplectic_eigenvalues(cov))


def check_physical(cov) -> bool:
    """True iff the smallest symplectic eigenvalue is at least ``1/2 - 1e-9``."""
    if isinstance(cov, GaussianState):
        if cov.factor is not None:
            try:
                return bool(_raw_nu_factor(cov.factor).min() >= 0.5 - CLAMP_TOL)
            except InvalidCovarianceError:
                return False
        cov = cov.cov
    cov = np.asarray(cov, dtype=float)
    _require_symmetric(cov)
    try:
        nu = _raw_nu_dense(cov)
    except InvalidCovarianceError:
        return False
    return bool(nu.min() >= 0.5 - CLAMP_TOL)


def fidelity_single_mode(s1: GaussianState, s2: GaussianState) -> float:
    """Uhlmann fidelity (squared convention) between two single-mode Gaussian states.

    Uses the closed form
    ``exp(-du^T (A+B)^{-1} du / 2) / (sqrt(det(A+B) + L) - sqrt(L))`` with
    ``L = (4 det A - 1)(4 det B - 1) / 4``.
    """
    if s1.n_modes != 1 or s2.n_modes != 1:
        raise ArityError(
            f"fidelity_single_mode needs single-mode states, got {s1.n_modes} and {s2.n_modes}"
        )
    a, b = s1.cov, s2.cov
    total = a + b
    det_sum = total[0, 0] * total[1, 1] - total[0, 1] * total[1, 0]
    if not det_sum > 0.0:
        raise NumericalDegeneracyError("A + B is singular")
    du = s1.mean - s2.mean
    lam = max((4.0 * np.linalg.det(a) - 1.0) * (4.0 * np.linalg.det(b) - 1.0) / 4.0, 0.0)
    expo = -0.5 * du @ np.linalg.solve(total, du)
    # 1/(sqrt(D+L) - sqrt(L)) rewritten without cancellation
    return float(np.exp(expo) * (np.sqrt(det_sum + lam) + np.sqrt(lam)) / det_sum)


def vacuum_cov(n_modes: int) -> np.ndarray:
    return 0.5 * np.eye(2 * n_modes)


def thermal_cov(nu) -> np.ndarray:
    """Product of thermal states with the given symplectic eigenvalues."""
    return np.diag(np.repeat(np.atleast_1d(np.asarray(nu, dtype=float)), 2))


def oscillator_ground_cov(omega: float, squeezing: float = 0.0) -> np.ndarray:
    """Ground state of a unit-mass oscillator, optionally momentum-squeezed by ``r``."""
    e2r = np.exp(2.0 * squeezing)
    return np.diag([e2r / (2.0 * omega), omega / (2.0 * e2r)])


def random_symplectic(n_modes: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random symplectic matrix ``expm(Omega H)`` with ``H`` random symmetric."""
    h = rng.normal(scale=scale, size=(2 * n_modes, 2 * n_modes))
    h = 0.5 * (h + h.T)
    return sla.expm(symplectic_form(n_modes) @ h)


def random_physical_cov(n_modes: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random physical covariance: thermal spectrum dressed by a random symplectic map."""
    nu = 0.5 + rng.exponential(0.5, size=n_modes)
    s = random_symplectic(n_modes, rng, scale)
    cov = s @ thermal_cov(nu) @ s.T
    return 0.5 * (cov + cov.T)
