"""Microscopic model: Rubin spectral density, discretised bath and exact propagator.

The Hamiltonian is ``H = sum_j p_j^2 / 2 + x^T V x / 2`` over the system
(mode 0) and ``N`` bath oscillators with a star coupling ``-g_k x_S x_k``.
Evolution goes through a single normal-mode diagonalisation of ``V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from qbmdarwin.errors import ConfigurationError, InstabilityError
from qbmdarwin.gaussian_core import GaussianState, oscillator_ground_cov

#: default coupling scale used by the shipped configurations
DEFAULT_KAPPA = 0.05


@dataclass(frozen=True)
class SpectralDensityParams:
    """Parameters of ``J(w) = kappa sqrt(w^2 - omega0^2) sqrt(omegaR^2 - w^2)``."""

    kappa: float = DEFAULT_KAPPA
    omega0: float = 0.3
    omegaR: float = 0.7

    def __post_init__(self):
        if not 0.0 <= self.omega0 < self.omegaR:
            raise ConfigurationError(
                f"need 0 <= omega0 < omegaR, got omega0={self.omega0}, omegaR={self.omegaR}",
                field="omega0",
            )
        if not self.kappa >= 0.0:
            raise ConfigurationError(f"kappa must be non-negative, got {self.kappa}", field="kappa")

    @property
    def chain_coupling(self) -> float:
        """Nearest-neighbour coupling ``g`` of the underlying chain, ``(omegaR^2 - omega0^2)/4``."""
        return (self.omegaR**2 - self.omega0**2) / 4.0

    @property
    def peak_frequency(self) -> float:
        return float(np.sqrt((self.omega0**2 + self.omegaR**2) / 2.0))


@dataclass(frozen=True)
class BathDiscretization:
    n_osc: int
    delta: float
    omegas: np.ndarray = field(repr=False)
    couplings: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ModelParams:
    omegaS: float
    squeezing_r: float
    bath: BathDiscretization
    spectral: SpectralDensityParams

    def __post_init__(self):
        if not self.omegaS > 0.0:
            raise ConfigurationError(f"omegaS must be positive, got {self.omegaS}", field="omega_s")

    @classmethod
    def build(
        cls,
        omegaS: float,
        squeezing_r: float = 0.0,
        n_osc: int = 300,
        kappa: float = DEFAULT_KAPPA,
        omega0: float = 0.3,
        omegaR: float = 0.7,
    ) -> "ModelParams":
        spectral = SpectralDensityParams(kappa, omega0, omegaR)
        return cls(omegaS, squeezing_r, discretize(spectral, n_osc), spectral)

    @property
    def n_modes(self) -> int:
        return self.bath.n_osc + 1


@dataclass(frozen=True)
class NormalModeBasis:
    orthogonal: np.ndarray = field(repr=False)
    eigenfreqs: np.ndarray = field(repr=False)


def rubin_spectral_density(omega, p: SpectralDensityParams):
    """Rubin-model spectral density; zero outside ``[omega0, omegaR]``."""
    w = np.asarray(omega, dtype=float)
    lower = np.clip(w * w - p.omega0**2, 0.0, None)
    upper = np.clip(p.omegaR**2 - w * w, 0.0, None)
    j = p.kappa * np.sqrt(lower) * np.sqrt(upper)
    return float(j) if j.ndim == 0 else j


def discretize(p: SpectralDensityParams, n: int) -> BathDiscretization:
    """Equally spaced bath ``w_k = omega0 + k * delta`` for ``k = 1..n``.

    Couplings satisfy ``g_k^2 = J(w_k) w_k delta`` so that
    ``sum_k g_k^2 / w_k`` is a Riemann sum of ``J``.
    """
    if n < 1:
        raise ConfigurationError("bath must contain at least one oscillator (empty bath)", field="n_osc")
    delta = (p.omegaR - p.omega0) / n
    omegas = p.omega0 + delta * np.arange(1, n + 1)
    # the last frequency is omegaR up to rounding; J vanishes there
    omegas[-1] = p.omegaR
    couplings = np.sqrt(rubin_spectral_density(omegas, p) * omegas * delta)
    return BathDiscretization(n, delta, omegas, couplings)


def potential_matrix(m: ModelParams) -> np.ndarray:
    n = m.bath.n_osc
    v = np.zeros((n + 1, n + 1))
    v[0, 0] = m.omegaS**2
    v[np.arange(1, n + 1), np.arange(1, n + 1)] = m.bath.omegas**2
    v[0, 1:] = -m.bath.couplings
    v[1:, 0] = -m.bath.couplings
    return v


def stability_check(v: np.ndarray) -> float:
    """Smallest eigenvalue of the potential matrix; ``<= 0`` means unbounded below."""
    return float(np.linalg.eigvalsh(v)[0])


def normal_mode_decomposition(v: np.ndarray) -> NormalModeBasis:
    lam, o = np.linalg.eigh(v)
    if lam[0] <= 0.0:
        raise InstabilityError(
            f"potential matrix is not positive definite (min eigenvalue {lam[0]:.6g})", lam[0]
        )
    return NormalModeBasis(o, np.sqrt(lam))


def _interleave(xx, xp, px, pp) -> np.ndarray:
    rows, cols = xx.shape
    s = np.empty((2 * rows, 2 * cols))
    s[0::2, 0::2] = xx
    s[0::2, 1::2] = xp
    s[1::2, 0::2] = px
    s[1::2, 1::2] = pp
    return s


def propagator_blocks(basis: NormalModeBasis, t: float, rows=slice(None)):
    """The ``xx``, ``xp``, ``px``, ``pp`` blocks of ``S(t)`` as contiguous arrays."""
    nu = basis.eigenfreqs
    o = basis.orthogonal
    c, s = np.cos(nu * t), np.sin(nu * t)
    ot = o.T
    left = o[rows]
    xx = (left * c) @ ot
    return xx, (left * (s / nu)) @ ot, (left * (-nu * s)) @ ot, xx


def _propagator_rows(basis: NormalModeBasis, t: float, rows) -> np.ndarray:
    return _interleave(*propagator_blocks(basis, t, rows))


def propagator(basis: NormalModeBasis, t: float) -> np.ndarray:
    """Symplectic map ``S(t)`` acting on interleaved quadratures.

    Each normal mode rotates as ``x -> x cos(v t) + p sin(v t)/v``,
    ``p -> -x v sin(v t) + p cos(v t)``; the result is conjugated back
    with the orthogonal normal-mode matrix.
    """
    return _propagator_rows(basis, t, slice(None))


def initial_variances(m: ModelParams) -> np.ndarray:
    """Diagonal of the initial covariance (interleaved)."""
    var = np.empty(2 * m.n_modes)
    var[0:2] = np.diag(oscillator_ground_cov(m.omegaS, m.squeezing_r))
    var[2::2] = 1.0 / (2.0 * m.bath.omegas)
    var[3::2] = m.bath.omegas / 2.0
    return var


def initial_state(m: ModelParams) -> GaussianState:
    """Momentum-squeezed system ground state times the bath vacuum (pure, zero mean)."""
    var = initial_variances(m)
    return GaussianState(np.zeros(var.size), np.diag(var), factor=np.diag(np.sqrt(var)))


def hamiltonian_matrix(v: np.ndarray) -> np.ndarray:
    """Quadratic form ``M`` with ``H = xi^T M xi / 2`` in interleaved order."""
    n = v.shape[0]
    return _interleave(v, np.zeros((n, n)), np.zeros((n, n)), np.eye(n))


def energy(state: GaussianState, v: np.ndarray) -> float:
    m = hamiltonian_matrix(v)
    return 0.5 * float(np.sum(m * state.cov) + state.mean @ m @ state.mean)


class Model:
    """A configured model with its normal-mode basis computed once.

    Instances are immutable after construction and safe to share.

    Raises
    ------
    InstabilityError
        If the potential matrix is not positive definite.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.potential = potential_matrix(params)
        self.basis = normal_mode_decomposition(self.potential)

    @classmethod
    def build(cls, omegaS: float, squeezing_r: float = 0.0, **kwargs) -> "Model":
        return cls(ModelParams.build(omegaS, squeezing_r, **kwargs))

    @property
    def n_modes(self) -> int:
        return self.params.n_modes

    @property
    def n_bath(self) -> int:
        return self.params.bath.n_osc

    @cached_property
    def initial(self) -> GaussianState:
        return initial_state(self.params)

    @cached_property
    def _init_sd(self) -> np.ndarray:
        return np.sqrt(initial_variances(self.params))

    def propagator(self, t: float) -> np.ndarray:
        return propagator(self.basis, t)

    def system_rows(self, t: float) -> np.ndarray:
        """The two system rows of ``S(t)``, shape ``(2, 2(N+1))``; O(N^2)."""
        return _propagator_rows(self.basis, t, slice(0, 1))

    def state_at(self, t: float, prop: np.ndarray | None = None) -> GaussianState:
        """Global state at ``t`` carrying the symplectic factor ``S(t) L``."""
        s = self.propagator(t) if prop is None else prop
        return GaussianState(s @ self.initial.mean, factor=s * self._init_sd)

    def channel(self, t: float):
        """Reduced channel on the system at ``t`` built from the system rows only."""
        from qbmdarwin.evolution import reduced_channel

        return reduced_channel(self.system_rows(t), initial_variances(self.params)[2:])

    def system_state_at(self, t: float) -> GaussianState:
        rows = self.system_rows(t)
        return GaussianState(rows @ self.initial.mean, factor=rows * self._init_sd)
