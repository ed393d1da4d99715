"""System-fragment mutual information, redundancy and record non-monotonicity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qbmdarwin.errors import ConfigurationError, InvalidSubsetError
from qbmdarwin.gaussian_core import (
    GaussianState,
    ModeSet,
    _clamp,
    _raw_nu_factor,
    entropy_from_symplectic,
    quadrature_indices,
    reduce_to_modes,
    von_neumann_entropy,
)

#: below this system entropy (nats) no record exists and f_delta is reported as 1
DEGENERATE_ENTROPY = 1e-6
DEFAULT_SAMPLES = 25
DEFAULT_GRID = np.round(np.arange(1, 51) * 0.02, 12)


@dataclass(frozen=True)
class FragmentSample:
    fragment: ModeSet
    fraction: float
    seed_path: tuple


@dataclass(frozen=True)
class MutualInfoCurve:
    time: float
    fractions: np.ndarray
    mi_mean: np.ndarray
    mi_stderr: np.ndarray
    n_samples: int
    h_system: float


@dataclass(frozen=True)
class RedundancyTrace:
    delta: float
    times: np.ndarray
    f_delta: np.ndarray
    r_delta: np.ndarray
    h_system: np.ndarray | None = None

    @classmethod
    def from_values(cls, delta, times, f_values, h_system=None) -> "RedundancyTrace":
        f_values = np.asarray(f_values, dtype=float)
        return cls(delta, np.asarray(times, dtype=float), f_values, 1.0 / f_values, h_system)


def fragment_size(n_bath: int, fraction: float) -> int:
    """``max(1, round(fraction * n_bath))`` with halves rounded up, capped at ``n_bath``."""
    return int(min(n_bath, max(1, np.floor(fraction * n_bath + 0.5 + 1e-9))))


def _sample_order(n_bath: int, master_seed: int, index: int) -> np.ndarray:
    # one permutation per sample index; every fraction takes a prefix of it,
    # so draws with the same index are nested across fractions
    return np.random.default_rng([int(master_seed), int(index)]).permutation(n_bath) + 1


def sample_fragments(n_bath: int, fraction: float, n_samples: int, master_seed: int = 0) -> list[FragmentSample]:
    """Uniform random bath fragments of size ``round(fraction * n_bath)``.

    Sample ``i`` is the prefix of a permutation seeded by ``(master_seed, i)``,
    so results are reproducible and samples with equal index are nested
    across fractions.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError(f"fraction must lie in (0, 1], got {fraction}", field="fraction")
    if n_samples < 1:
        raise ConfigurationError("n_samples must be at least 1", field="n_samples")
    size = fragment_size(n_bath, fraction)
    if size == n_bath:
        return [FragmentSample(ModeSet(range(1, n_bath + 1)), fraction, (master_seed, 0))]
    return [
        FragmentSample(
            ModeSet(_sample_order(n_bath, master_seed, i)[:size]), fraction, (master_seed, i)
        )
        for i in range(n_samples)
    ]


def _factor_entropy(factor: np.ndarray, modes) -> float:
    if len(modes) == 0:
        return 0.0
    return entropy_from_symplectic(_clamp(_raw_nu_factor(factor[quadrature_indices(modes)])))


def mutual_information(global_state: GaussianState, fragment, *, pure: bool = False) -> float:
    """``I(S:f) = H_S + H_f - H_{S,f}`` in nats.

    With ``pure=True`` the entropies of the smaller side of each bipartition
    are used (``H_A = H_{complement of A}`` for pure global states).
    """
    if not isinstance(fragment, ModeSet):
        fragment = ModeSet(fragment)
    fragment = fragment.validate(global_state.n_modes)
    if 0 in fragment.indices:
        raise InvalidSubsetError("fragment must not contain the system mode")
    frag = list(fragment.indices)
    if global_state.factor is None:
        h_s = von_neumann_entropy(reduce_to_modes(global_state, [0]))
        if not frag:
            return 0.0
        h_f = von_neumann_entropy(reduce_to_modes(global_state, frag))
        h_sf = von_neumann_entropy(reduce_to_modes(global_state, [0] + frag))
        return h_s + h_f - h_sf
    factor = global_state.factor
    h_s = _factor_entropy(factor, [0])
    return _mi_from_factor(factor, h_s, frag, global_state.n_modes, pure)


def _mi_from_factor(factor, h_s, frag, n_modes, pure) -> float:
    if len(frag) == 0:
        return 0.0
    if pure and 2 * len(frag) > n_modes - 1:
        keep = np.ones(n_modes, dtype=bool)
        keep[0] = False
        keep[np.asarray(frag)] = False
        comp = np.flatnonzero(keep)
        h_f = _factor_entropy(factor, np.r_[0, comp])
        h_sf = _factor_entropy(factor, comp)
    else:
        h_f = _factor_entropy(factor, frag)
        h_sf = _factor_entropy(factor, np.r_[0, frag])
    return h_s + h_f - h_sf


class _FragmentBank:
    """Mutual information of nested random fragments of one pure global state."""

    def __init__(self, state: GaussianState, n_samples: int, master_seed: int):
        self.factor = state.factor
        self.n_modes = state.n_modes
        self.n_bath = state.n_modes - 1
        self.n_samples = n_samples
        self.master_seed = master_seed
        self.h_system = _factor_entropy(self.factor, [0])
        self._orders: dict[int, np.ndarray] = {}
        self._stats: dict[int, tuple[float, float, int]] = {}

    def _order(self, i: int) -> np.ndarray:
        if i not in self._orders:
            self._orders[i] = _sample_order(self.n_bath, self.master_seed, i)
        return self._orders[i]

    def stats(self, fraction: float) -> tuple[float, float, int]:
        size = fragment_size(self.n_bath, fraction)
        if size not in self._stats:
            if size == self.n_bath:
                full = list(range(1, self.n_modes))
                values = [_mi_from_factor(self.factor, self.h_system, full, self.n_modes, True)]
            else:
                values = [
                    _mi_from_factor(
                        self.factor, self.h_system, self._order(i)[:size], self.n_modes, True
                    )
                    for i in range(self.n_samples)
                ]
            values = np.asarray(values)
            err = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else 0.0
            self._stats[size] = (float(values.mean()), float(err), values.size)
        return self._stats[size]


def _validate_grid(grid, name: str) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigurationError(f"{name} must be a non-empty list of fractions", field=name)
    if np.any(grid <= 0.0) or np.any(grid > 1.0):
        raise ConfigurationError(f"{name} values must lie in (0, 1]", field=name)
    if np.any(np.diff(grid) <= 0.0):
        raise ConfigurationError(f"{name} must be strictly increasing", field=name)
    return grid


def mutual_info_curve(
    model,
    t: float,
    fraction_grid: Sequence[float] = DEFAULT_GRID,
    n_samples: int = DEFAULT_SAMPLES,
    master_seed: int = 0,
) -> MutualInfoCurve:
    """Averaged partial-information curve ``I(S:f)`` at time ``t``."""
    grid = _validate_grid(fraction_grid, "fraction_grid")
    bank = _FragmentBank(model.state_at(t), n_samples, master_seed)
    stats = [bank.stats(f) for f in grid]
    return MutualInfoCurve(
        time=float(t),
        fractions=grid,
        mi_mean=np.array([s[0] for s in stats]),
        mi_stderr=np.array([s[1] for s in stats]),
        n_samples=n_samples,
        h_system=bank.h_system,
    )


def _first_crossing(bank: _FragmentBank, grid: np.ndarray, threshold: float, hint: int) -> int | None:
    # The averaged curve over nested draws is non-decreasing in the fraction,
    # so the first grid point at or above threshold is found by galloping
    # from the hint and then bisecting. None: no grid point reaches it.
    def ok(i):
        return bank.stats(grid[i])[0] >= threshold

    last = grid.size - 1
    hint = min(max(hint, 0), last)
    if ok(hint):
        lo, hi, step = hint - 1, hint, 1
        while lo >= 0 and ok(lo):
            hi = lo
            lo = hi - step
            step *= 2
        lo = max(lo, -1)
    else:
        lo, step = hint, 1
        while True:
            hi = lo + step
            if hi >= last:
                hi = last
                if not ok(last):
                    return None
                break
            if ok(hi):
                break
            lo = hi
            step *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _f_delta_bank(bank, grid, delta, hint):
    if bank.h_system < DEGENERATE_ENTROPY:
        return 1.0, hint
    idx = _first_crossing(bank, grid, (1.0 - delta) * bank.h_system, hint)
    if idx is None:
        return 1.0, grid.size - 1
    return float(grid[idx]), idx


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}", field="delta")


def f_delta(
    model,
    t: float,
    delta: float = 0.05,
    search_grid: Sequence[float] = DEFAULT_GRID,
    n_samples: int = DEFAULT_SAMPLES,
    master_seed: int = 0,
) -> float:
    """Smallest grid fraction whose averaged ``I(S:f)`` reaches ``(1 - delta) H_S``.

    Returns 1 when only the whole environment suffices, and also when
    ``H_S < 1e-6`` nats (no record to acquire yet). No interpolation is
    done between grid points.
    """
    _check_delta(delta)
    grid = _validate_grid(search_grid, "search_grid")
    bank = _FragmentBank(model.state_at(t), n_samples, master_seed)
    return _f_delta_bank(bank, grid, delta, grid.size // 2)[0]


def redundancy_trace(
    model,
    times: Sequence[float],
    delta: float = 0.05,
    search_grid: Sequence[float] = DEFAULT_GRID,
    n_samples: int = DEFAULT_SAMPLES,
    master_seed: int = 0,
) -> RedundancyTrace:
    """``f_delta`` along a time grid (same fragment draws at every time)."""
    _check_delta(delta)
    grid = _validate_grid(search_grid, "search_grid")
    times = np.asarray(times, dtype=float)
    f_values, h_values = [], []
    hint = grid.size // 2
    for t in times:
        bank = _FragmentBank(model.state_at(t), n_samples, master_seed)
        f, hint = _f_delta_bank(bank, grid, delta, hint)
        f_values.append(f)
        h_values.append(bank.h_system)
    return RedundancyTrace.from_values(delta, times, f_values, np.asarray(h_values))


def non_monotonicity_Nf(trace) -> float:
    """Sum of the positive increments of ``f_delta`` along the time grid."""
    values = trace.f_delta if isinstance(trace, RedundancyTrace) else np.asarray(trace, dtype=float)
    if values.size < 2:
        raise ConfigurationError("trace needs at least two time points", field="times")
    return float(np.sum(np.clip(np.diff(values), 0.0, None)))
