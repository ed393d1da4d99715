"""Covariance propagation, the exact reduced channel and branch decoherence factors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from qbmdarwin.errors import (
    ArityError,
    ConsistencyError,
    InvalidSubsetError,
    NumericalDegeneracyError,
)
from qbmdarwin.gaussian_core import GaussianState, ModeSet, quadrature_indices

OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
CP_TOL = 1e-9


def evolve_covariance(prop: np.ndarray, initial: GaussianState) -> GaussianState:
    """Apply ``S``: ``cov -> S cov S^T``, ``mean -> S mean``."""
    prop = np.asarray(prop, dtype=float)
    if prop.shape != (initial.mean.size, initial.mean.size):
        raise ArityError(
            f"propagator shape {prop.shape} does not match a {initial.n_modes}-mode state"
        )
    mean = prop @ initial.mean
    if initial.factor is not None:
        return GaussianState(mean, factor=prop @ initial.factor)
    cov = prop @ initial.cov @ prop.T
    return GaussianState(mean, 0.5 * (cov + cov.T))


@dataclass(frozen=True)
class ReducedChannel:
    """Gaussian map ``(u, A) -> (X u, X A X^T + Y)`` on the system mode."""

    x_matrix: np.ndarray
    y_matrix: np.ndarray

    def apply(self, state: GaussianState) -> GaussianState:
        if state.n_modes != 1:
            raise ArityError("reduced channel acts on single-mode states")
        x = self.x_matrix
        cov = x @ state.cov @ x.T + self.y_matrix
        return GaussianState(x @ state.mean, 0.5 * (cov + cov.T))

    def cp_margin(self) -> float:
        """Smallest eigenvalue of ``Y + i Omega/2 - i X Omega X^T / 2`` (>= 0 for CP maps)."""
        x = self.x_matrix
        herm = self.y_matrix + 0.5j * (OMEGA_1 - x @ OMEGA_1 @ x.T)
        return float(np.linalg.eigvalsh(herm)[0])


def reduced_channel(prop: np.ndarray, bath_cov0) -> ReducedChannel:
    """Exact channel on the system induced by ``S(t)`` and the initial bath covariance.

    ``prop`` may be the full propagator or only its two system rows.
    ``bath_cov0`` is a bath covariance matrix or the diagonal of one.

    Raises
    ------
    ConsistencyError
        If complete positivity is violated by more than 1e-9.
    """
    rows = np.asarray(prop, dtype=float)[:2]
    x = rows[:, :2]
    b = rows[:, 2:]
    bath_cov0 = np.asarray(bath_cov0, dtype=float)
    if bath_cov0.ndim == 1:
        y = (b * bath_cov0) @ b.T
    else:
        y = b @ bath_cov0 @ b.T
    channel = ReducedChannel(x, 0.5 * (y + y.T))
    margin = channel.cp_margin()
    if margin < -CP_TOL:
        raise ConsistencyError(f"reduced channel violates complete positivity by {-margin:.3g}")
    return channel


@dataclass(frozen=True)
class DecoherenceRecord:
    time: float
    fragment: ModeSet
    d_value: float


def decoherence_factor(prop: np.ndarray, state_t: GaussianState, fragment, t: float) -> DecoherenceRecord:
    """Decoherence factor ``d`` of a bath fragment at time ``t``.

    ``w`` is the fragment part of the ``S(t)`` column multiplying the initial
    ``x_S`` and ``sigma_f`` the fragment covariance at ``t``;
    ``d = w^T sigma_f^{-1} w / 4``, so that two equal-covariance branches
    with system positions ``x, x'`` have normalised overlap
    ``exp(-d (x - x')^2)``.
    """
    if not isinstance(fragment, ModeSet):
        fragment = ModeSet(fragment)
    fragment = fragment.validate(state_t.n_modes)
    if 0 in fragment.indices:
        raise InvalidSubsetError("fragment must not contain the system mode")
    if len(fragment) == 0:
        return DecoherenceRecord(t, fragment, 0.0)
    q = quadrature_indices(fragment.indices)
    w = np.asarray(prop, dtype=float)[q, 0]
    if state_t.factor is not None:
        # sigma_f = F F^T = R^T R with R from QR(F^T)
        r = sla.qr(state_t.factor[q].T, mode="r", check_finite=False)[0][: q.size]
        diag = np.abs(np.diag(r))
        if diag.min() <= np.finfo(float).eps * diag.max() * q.size:
            raise NumericalDegeneracyError("fragment covariance is singular")
        z = sla.solve_triangular(r, w, trans="T", check_finite=False)
        d = 0.25 * float(z @ z)
    else:
        try:
            chol = sla.cho_factor(state_t.cov[np.ix_(q, q)], check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError("fragment covariance is singular") from exc
        d = 0.25 * float(w @ sla.cho_solve(chol, w, check_finite=False))
    return DecoherenceRecord(t, fragment, max(d, 0.0))


def channel_series(model, times) -> tuple[np.ndarray, np.ndarray]:
    """Reduced channels at many times from the system rows of ``S(t)``.

    Returns stacked ``X`` and ``Y`` matrices of shape ``(len(times), 2, 2)``.
    Equivalent to calling ``model.channel(t)`` for each time, in O(T N^2).
    """
    times = np.asarray(times, dtype=float)
    nu = model.basis.eigenfreqs
    o = model.basis.orthogonal
    lead = o[0]
    phase = np.outer(times, nu)
    c, s = np.cos(phase), np.sin(phase)
    ot = o.T
    xx = (c * lead) @ ot
    xp = (s * (lead / nu)) @ ot
    px = (s * (-lead * nu)) @ ot
    pp = xx
    rows = np.empty((times.size, 2, 2 * o.shape[0]))
    rows[:, 0, 0::2], rows[:, 0, 1::2] = xx, xp
    rows[:, 1, 0::2], rows[:, 1, 1::2] = px, pp
    x = rows[:, :, :2].copy()
    b = rows[:, :, 2:]
    var = model.initial.cov.diagonal()[2:]
    y = np.einsum("tik,k,tjk->tij", b, var, b)
    y = 0.5 * (y + np.swapaxes(y, 1, 2))
    herm = y + 0.5j * (OMEGA_1 - x @ OMEGA_1 @ np.swapaxes(x, 1, 2))
    margin = np.linalg.eigvalsh(herm)[:, 0].min() if times.size else 0.0
    if margin < -CP_TOL:
        raise ConsistencyError(f"reduced channel violates complete positivity by {-margin:.3g}")
    return x, y
