"""Fidelity-based non-Markovianity of the reduced system dynamics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qbmdarwin.errors import ConfigurationError, InvalidCovarianceError
from qbmdarwin.evolution import channel_series
from qbmdarwin.gaussian_core import GaussianState, check_physical, oscillator_ground_cov

PAIR_FAMILIES = ("coherent_x", "coherent_p", "squeezed")
COHERENT_SEPARATIONS = (1.0, 2.0, 4.0)
SQUEEZINGS = (0.5, 1.0)


@dataclass(frozen=True)
class ProbePair:
    state_a: GaussianState
    state_b: GaussianState
    label: str = ""

    def __post_init__(self):
        for s in (self.state_a, self.state_b):
            if s.n_modes != 1:
                raise ConfigurationError("probe states must be single-mode", field="pairs")
            if not check_physical(s.cov):
                raise InvalidCovarianceError(f"probe state of pair {self.label!r} is unphysical")
        if np.array_equal(self.state_a.mean, self.state_b.mean) and np.array_equal(
            self.state_a.cov, self.state_b.cov
        ):
            raise ConfigurationError(f"probe pair {self.label!r} has identical states", field="pairs")


@dataclass(frozen=True)
class NMResult:
    omegaS: float
    per_pair: list
    n_measure: float


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def default_probe_pairs(omegaS: float, families: Sequence[str] = PAIR_FAMILIES) -> list[ProbePair]:
    """The fixed probe ensemble standing in for the optimisation over state pairs.

    ``coherent_x`` / ``coherent_p``: ground states of the system oscillator
    displaced by ``+-sep/2`` along x (resp. p), ``sep`` in {1, 2, 4}.
    ``squeezed``: ground states squeezed by ``r`` in {0.5, 1} along
    orthogonal axes, once along x/p and once along the diagonals.
    """
    unknown = set(families) - set(PAIR_FAMILIES)
    if unknown:
        raise ConfigurationError(f"unknown probe-pair families {sorted(unknown)}", field="pairs")
    ground = oscillator_ground_cov(omegaS)
    pairs = []
    for axis, family in enumerate(("coherent_x", "coherent_p")):
        if family not in families:
            continue
        for sep in COHERENT_SEPARATIONS:
            shift = np.zeros(2)
            shift[axis] = sep / 2.0
            pairs.append(
                ProbePair(
                    GaussianState(shift, ground),
                    GaussianState(-shift, ground),
                    f"{family}_{sep:g}",
                )
            )
    if "squeezed" in families:
        for r in SQUEEZINGS:
            for angle, tag in ((0.0, "xp"), (np.pi / 4, "diag")):
                rot = _rotation(angle)
                sq = np.diag([np.exp(r), np.exp(-r)])
                a = rot @ sq @ ground @ sq @ rot.T
                b = rot @ np.linalg.inv(sq) @ ground @ np.linalg.inv(sq) @ rot.T
                pairs.append(
                    ProbePair(
                        GaussianState(np.zeros(2), 0.5 * (a + a.T)),
                        GaussianState(np.zeros(2), 0.5 * (b + b.T)),
                        f"squeezed_{tag}_{r:g}",
                    )
                )
    return pairs


def _check_time_grid(time_grid) -> np.ndarray:
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times.size < 1 or times[0] != 0.0:
        raise ConfigurationError("time grid must start at 0", field="dt")
    if np.any(np.diff(times) <= 0.0):
        raise ConfigurationError("time grid must be strictly increasing", field="dt")
    return times


def _fidelity_series(x, y, pair) -> np.ndarray:
    # vectorised single-mode fidelity of the pair pushed through each channel
    xt = np.swapaxes(x, 1, 2)
    a = x @ pair.state_a.cov @ xt + y
    b = x @ pair.state_b.cov @ xt + y
    du = x @ (pair.state_a.mean - pair.state_b.mean)
    total = a + b
    det_sum = total[:, 0, 0] * total[:, 1, 1] - total[:, 0, 1] * total[:, 1, 0]
    det_a = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    det_b = b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
    lam = np.clip((4.0 * det_a - 1.0) * (4.0 * det_b - 1.0) / 4.0, 0.0, None)
    quad = np.einsum("ti,ti->t", du, np.linalg.solve(total, du[:, :, None])[:, :, 0])
    return np.exp(-0.5 * quad) * (np.sqrt(det_sum + lam) + np.sqrt(lam)) / det_sum


def fidelity_trajectory(model, pair, time_grid) -> np.ndarray:
    """Fidelity of ``pair`` evolved through the reduced channel at each grid time."""
    times = _check_time_grid(time_grid)
    x, y = channel_series(model, times)
    return _fidelity_series(x, y, pair)


def negative_variation(values) -> float:
    """Accumulated decrease ``sum max(0, F_i - F_{i+1})``."""
    values = np.asarray(values, dtype=float)
    return float(np.sum(np.clip(values[:-1] - values[1:], 0.0, None)))


def nm_measure(model, pairs, time_grid) -> NMResult:
    """Non-Markovianity: largest accumulated fidelity drop over the probe ensemble."""
    pairs = list(pairs)
    if not pairs:
        raise ConfigurationError("probe-pair ensemble is empty", field="pairs")
    times = _check_time_grid(time_grid)
    x, y = channel_series(model, times)
    per_pair = [(p.label, negative_variation(_fidelity_series(x, y, p))) for p in pairs]
    return NMResult(model.params.omegaS, per_pair, max(v for _, v in per_pair))


def resolution_change(model, pairs, time_grid) -> float:
    """Relative change of the reported measure when the time step is halved."""
    times = _check_time_grid(time_grid)
    fine = np.empty(2 * times.size - 1)
    fine[0::2] = times
    fine[1::2] = 0.5 * (times[:-1] + times[1:])
    coarse = nm_measure(model, pairs, times).n_measure
    refined = nm_measure(model, pairs, fine).n_measure
    return abs(refined - coarse) / max(abs(refined), 1e-9)
