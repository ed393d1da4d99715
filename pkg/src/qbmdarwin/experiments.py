"""Experiment configuration, orchestration and CSV output."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from qbmdarwin.bath_model import (
    DEFAULT_KAPPA,
    Model,
    ModelParams,
    hamiltonian_matrix,
    potential_matrix,
    propagator_blocks,
    rubin_spectral_density,
    stability_check,
)
from qbmdarwin.darwinism import (
    DEGENERATE_ENTROPY,
    mutual_info_curve,
    non_monotonicity_Nf,
    redundancy_trace,
)
from qbmdarwin.errors import ConfigurationError, ConsistencyError, OracleInconclusiveError
from qbmdarwin.gaussian_core import _raw_nu_factor
from qbmdarwin.memory import PAIR_FAMILIES, default_probe_pairs, nm_measure, resolution_change

log = logging.getLogger(__name__)

CSV_DIGITS = 12
#: largest tolerated relative change of a measure when the fidelity time step is halved
RESOLUTION_TOL = 0.05
ORACLE_TOL = 1e-6


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _pairs(text: str) -> tuple[str, ...]:
    return tuple(v for v in text.replace(",", " ").split())


_PARSERS = {
    "n_osc": int,
    "omega0": float,
    "omegaR": float,
    "kappa": float,
    "omega_s": _floats,
    "omega_s_min": float,
    "omega_s_max": float,
    "omega_s_points": int,
    "squeezing_r": float,
    "t_max": float,
    "dt": float,
    "redundancy_dt": float,
    "t_eval": float,
    "delta": float,
    "fraction_step": float,
    "n_samples": int,
    "master_seed": int,
    "pairs": _pairs,
    "out_dir": str,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; keys mirror the config-file keys."""

    n_osc: int = 300
    omega0: float = 0.3
    omegaR: float = 0.7
    kappa: float = DEFAULT_KAPPA
    omega_s: tuple = ()
    omega_s_min: float = 0.1
    omega_s_max: float = 1.0
    omega_s_points: int = 60
    squeezing_r: float = 10.0
    t_max: float = 150.0
    dt: float = 0.1
    redundancy_dt: float = 5.0
    t_eval: float = 40.0
    delta: float = 0.05
    fraction_step: float = 0.02
    n_samples: int = 25
    master_seed: int = 0
    pairs: tuple = PAIR_FAMILIES
    out_dir: str = "results"
    source: str = field(default="", compare=False)

    @classmethod
    def from_mapping(cls, values: dict, source: str = "") -> "ExperimentConfig":
        parsed = {}
        for key, raw in values.items():
            if key not in _PARSERS:
                raise ConfigurationError(f"unknown configuration key {key!r}", field=key)
            if isinstance(raw, str):
                try:
                    parsed[key] = _PARSERS[key](raw.strip())
                except ValueError as exc:
                    raise ConfigurationError(f"cannot parse {key} = {raw!r}", field=key) from exc
            else:
                parsed[key] = tuple(raw) if key in ("omega_s", "pairs") else raw
        return cls(source=source, **parsed)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = resolve_config_path(path)
        return cls.from_mapping(parse_config_text(path.read_text()), source=str(path))

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        current = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "source"}
        merged = dict(current)
        parsed = ExperimentConfig.from_mapping(overrides)
        for key in overrides:
            merged[key] = getattr(parsed, key)
        return ExperimentConfig(source=self.source, **merged)

    # derived grids -------------------------------------------------------

    @property
    def omega_grid(self) -> np.ndarray:
        if self.omega_s:
            return np.asarray(self.omega_s, dtype=float)
        return np.linspace(self.omega_s_min, self.omega_s_max, self.omega_s_points)

    @property
    def time_grid(self) -> np.ndarray:
        return _uniform_grid(self.t_max, self.dt)

    @property
    def redundancy_times(self) -> np.ndarray:
        return _uniform_grid(self.t_max, self.redundancy_dt)

    @property
    def fraction_grid(self) -> np.ndarray:
        n = int(np.floor(1.0 / self.fraction_step + 1e-9))
        grid = np.round(self.fraction_step * np.arange(1, n + 1), 12)
        return grid if grid[-1] == 1.0 else np.append(grid, 1.0)

    def model(self, omega_s: float, squeezing_r: float | None = None) -> Model:
        r = self.squeezing_r if squeezing_r is None else squeezing_r
        return Model(
            ModelParams.build(omega_s, r, self.n_osc, self.kappa, self.omega0, self.omegaR)
        )

    def validate(self) -> "ExperimentConfig":
        """Check every field before any computation; raises ConfigurationError naming the field."""
        if self.n_osc < 1:
            raise ConfigurationError("n_osc must be at least 1", field="n_osc")
        if not 0.0 <= self.omega0 < self.omegaR:
            raise ConfigurationError(
                f"omega0 must satisfy 0 <= omega0 < omegaR (omega0={self.omega0}, omegaR={self.omegaR})",
                field="omega0",
            )
        if self.kappa < 0.0:
            raise ConfigurationError("kappa must be non-negative", field="kappa")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}", field="delta")
        if not self.dt > 0.0:
            raise ConfigurationError("time grid must be increasing: dt must be positive", field="dt")
        if not self.redundancy_dt > 0.0:
            raise ConfigurationError(
                "time grid must be increasing: redundancy_dt must be positive", field="redundancy_dt"
            )
        if self.t_max < 0.0:
            raise ConfigurationError("t_max must be non-negative", field="t_max")
        if self.t_eval < 0.0:
            raise ConfigurationError("t_eval must be non-negative", field="t_eval")
        if not 0.0 < self.fraction_step <= 1.0:
            raise ConfigurationError("fraction_step must lie in (0, 1]", field="fraction_step")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be at least 1", field="n_samples")
        if set(self.pairs) - set(PAIR_FAMILIES) or not self.pairs:
            raise ConfigurationError(
                f"pairs must be a non-empty subset of {', '.join(PAIR_FAMILIES)}", field="pairs"
            )
        omegas = self.omega_grid
        if omegas.size == 0:
            raise ConfigurationError("omega_s grid is empty", field="omega_s")
        if not self.omega_s and self.omega_s_points < 1:
            raise ConfigurationError("omega_s_points must be at least 1", field="omega_s_points")
        if np.any(np.diff(omegas) <= 0.0):
            raise ConfigurationError("omega_s grid must be strictly increasing", field="omega_s")
        if np.any(omegas <= 0.0):
            raise ConfigurationError("omega_s values must be positive", field="omega_s")
        for w in omegas:
            params = ModelParams.build(w, self.squeezing_r, self.n_osc, self.kappa, self.omega0, self.omegaR)
            lowest = stability_check(potential_matrix(params))
            if lowest <= 0.0:
                raise ConfigurationError(
                    f"unstable model at omega_s={w:.6g}: potential matrix min eigenvalue {lowest:.6g} "
                    f"(reduce kappa or raise omega_s)",
                    field="omega_s",
                )
        return self


def _uniform_grid(t_max: float, dt: float) -> np.ndarray:
    n = int(np.floor(t_max / dt + 1e-9))
    return np.round(dt * np.arange(n + 1), 12)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def resolve_config_path(path) -> Path:
    """A filesystem path, or the name of a shipped config (``fig1.cfg`` ...)."""
    p = Path(path)
    if p.exists():
        return p
    shipped = resources.files("qbmdarwin") / "configs" / p.name
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigurationError(f"config file not found: {path}", field="config")


def shipped_configs() -> dict[str, Path]:
    folder = resources.files("qbmdarwin") / "configs"
    return {p.name: Path(str(p)) for p in folder.iterdir() if p.name.endswith(".cfg")}


# ---------------------------------------------------------------------------
# CSV

def format_number(value: float) -> str:
    return f"{float(value):.{CSV_DIGITS}g}"


def render_csv(header, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_number(v) for v in row) + "\n")
    return buf.getvalue()


def csv_body(text: str) -> str:
    """CSV content with '#' comment lines removed."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def write_csv(path, header, rows, label: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(path, "w", newline="\n") as fh:
        fh.write(render_csv(header, rows, comment=f"qbmdarwin {label} generated {stamp}"))
    return path


# ---------------------------------------------------------------------------
# work items (top-level so they pickle for the process pool)

def _redundancy_item(config: ExperimentConfig, omega_s: float) -> list[tuple]:
    model = config.model(omega_s)
    trace = redundancy_trace(
        model,
        config.redundancy_times,
        config.delta,
        config.fraction_grid,
        config.n_samples,
        config.master_seed,
    )
    return [(omega_s, t, f, h) for t, f, h in zip(trace.times, trace.f_delta, trace.h_system)]


def _partial_info_item(config: ExperimentConfig, omega_s: float) -> list[tuple]:
    model = config.model(omega_s)
    curve = mutual_info_curve(
        model, config.t_eval, config.fraction_grid, config.n_samples, config.master_seed
    )
    if curve.h_system < DEGENERATE_ENTROPY:
        log.warning(
            "omega_s=%g: H_S=%.3g below the degenerate threshold at t=%g; mi_mean is raw I(S:f)",
            omega_s, curve.h_system, config.t_eval,
        )
    return [
        (omega_s, f, m, e, curve.h_system)
        for f, m, e in zip(curve.fractions, curve.mi_mean, curve.mi_stderr)
    ]


def _sweep_item(config: ExperimentConfig, omega_s: float) -> list[tuple]:
    model = config.model(omega_s)
    pairs = default_probe_pairs(omega_s, config.pairs)
    times = config.time_grid
    nm = nm_measure(model, pairs, times)
    change = resolution_change(model, pairs, times)
    if change >= RESOLUTION_TOL:
        raise ConsistencyError(
            f"omega_s={omega_s:.6g}: halving dt changes the non-Markovianity by {change:.1%}; "
            "time grid is under-resolved"
        )
    trace = redundancy_trace(
        model,
        config.redundancy_times,
        config.delta,
        config.fraction_grid,
        config.n_samples,
        config.master_seed,
    )
    j = rubin_spectral_density(omega_s, model.params.spectral)
    return [
        (
            omega_s,
            j,
            nm.n_measure,
            trace.f_delta[-1],
            non_monotonicity_Nf(trace) if trace.times.size > 1 else 0.0,
            trace.h_system[-1],
        )
    ]


def _run_items(func, config: ExperimentConfig, workers: int) -> list[tuple]:
    omegas = [float(w) for w in config.omega_grid]
    if workers <= 1 or len(omegas) == 1:
        chunks = [func(config, w) for w in omegas]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(func, [config] * len(omegas), omegas))
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


REDUNDANCY_HEADER = ("omega_s", "t", "f_delta", "h_system")
PARTIAL_INFO_HEADER = ("omega_s", "f", "mi_mean", "mi_stderr", "h_system")
SWEEP_HEADER = ("omega_s", "J", "n_measure", "f_delta", "nf_measure", "h_system")


def run_redundancy_dynamics(config: ExperimentConfig, workers: int = 1) -> list[tuple]:
    """Rows ``(omega_s, t, f_delta, h_system)``, one per (omega_s, t) grid point."""
    return _run_items(_redundancy_item, config.validate(), workers)


def run_partial_info(config: ExperimentConfig, workers: int = 1) -> list[tuple]:
    """Rows ``(omega_s, f, mi_mean, mi_stderr, h_system)`` at ``t_eval``; mi in nats."""
    return _run_items(_partial_info_item, config.validate(), workers)


def run_spectrum_sweep(config: ExperimentConfig, workers: int = 1) -> list[tuple]:
    """One row ``(omega_s, J, n_measure, f_delta, nf_measure, h_system)`` per omega_s.

    ``f_delta`` and ``h_system`` are taken at ``t_max``; ``nf_measure`` uses the
    redundancy time grid, ``n_measure`` the fidelity grid ``dt``.
    """
    return _run_items(_sweep_item, config.validate(), workers)


# ---------------------------------------------------------------------------
# oracle

def rk4_propagator(generator: np.ndarray, checkpoints, steps_per_unit: float) -> list[np.ndarray]:
    """Integrate ``dR/dt = G R`` from ``R(0) = I`` with classical RK4, returning R at checkpoints."""
    dim = generator.shape[0]
    r = np.eye(dim)
    out = []
    t_prev = 0.0
    for t in checkpoints:
        span = t - t_prev
        n = max(1, int(np.ceil(span * steps_per_unit)))
        h = span / n
        for _ in range(n):
            k1 = generator @ r
            k2 = generator @ (r + 0.5 * h * k1)
            k3 = generator @ (r + 0.5 * h * k2)
            k4 = generator @ (r + h * k3)
            r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(r.copy())
        t_prev = t
    return out


@dataclass
class OracleReport:
    omega_s: float
    checkpoints: list
    deviations: list
    max_deviation: float
    steps_per_unit: float
    passed: bool

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"oracle check omega_s={self.omega_s:g}: {status} "
            f"(max |cov deviation| = {self.max_deviation:.3e}, tolerance {ORACLE_TOL:g}, "
            f"RK4 steps per unit time {self.steps_per_unit:g})"
        ]
        for t, d in zip(self.checkpoints, self.deviations):
            lines.append(f"  t = {t:g}: {d:.3e}")
        return "\n".join(lines)


def run_oracle_check(
    config: ExperimentConfig,
    propagator_fn=None,
    n_checkpoints: int = 5,
    conv_tol: float = 1e-9,
    max_halvings: int = 14,
) -> OracleReport:
    """Compare normal-mode propagation with step-halved RK4 integration.

    The RK4 step is halved until successive covariance results agree to
    ``conv_tol``; pass iff the normal-mode covariance deviates by less
    than 1e-6 at every checkpoint. ``propagator_fn(model, t)`` replaces the
    normal-mode propagator (used for negative controls).
    """
    config = config.validate()
    if config.n_osc > 4:
        raise ConfigurationError("oracle check needs n_osc <= 4", field="n_osc")
    omega_s = float(config.omega_grid[0])
    model = config.model(omega_s)
    horizon = config.t_max if config.t_max > 0 else 1.0
    checkpoints = list(np.linspace(horizon / n_checkpoints, horizon, n_checkpoints))
    generator = _symplectic_form_like(model) @ hamiltonian_matrix(model.potential)
    cov0 = model.initial.cov

    def covs(steps):
        return [r @ cov0 @ r.T for r in rk4_propagator(generator, checkpoints, steps)]

    steps = 10.0
    previous = covs(steps)
    for _ in range(max_halvings):
        steps *= 2.0
        current = covs(steps)
        change = max(np.max(np.abs(a - b)) for a, b in zip(current, previous))
        previous = current
        if change < conv_tol:
            break
    else:
        raise OracleInconclusiveError(
            f"RK4 refinement did not converge (last change {change:.3e} > {conv_tol:g})"
        )
    prop = propagator_fn or (lambda m, t: m.propagator(t))
    deviations = []
    for t, ref in zip(checkpoints, previous):
        s = prop(model, t)
        deviations.append(float(np.max(np.abs(s @ cov0 @ s.T - ref))))
    worst = max(deviations)
    return OracleReport(omega_s, checkpoints, deviations, worst, steps, worst < ORACLE_TOL)


def _symplectic_form_like(model: Model) -> np.ndarray:
    from qbmdarwin.gaussian_core import symplectic_form

    return symplectic_form(model.n_modes)


# ---------------------------------------------------------------------------
# symplectic / purity audit

@dataclass
class AuditResult:
    omega_s: float
    n_times: int
    max_symplectic_residual: float
    max_purity_bound: float
    max_purity_exact: float


def audit_symplectic(model: Model, times, exact_every: int = 0) -> AuditResult:
    """Check ``S(t)`` along a time grid.

    For each time, ``||S Omega S^T - Omega||_max`` is computed, together with
    a rigorous bound on ``max_j |nu_j - 1/2|`` for the evolved pure state:
    with ``W = S L`` (``L`` the initial symplectic factor) the eigenvalues are
    those of ``(i/2) W^T Omega W``, so Weyl's inequality gives
    ``|nu_j - 1/2| <= ||W^T Omega W - Omega||_F / 2``. Every
    ``exact_every``-th time the spectrum is also computed directly.
    """
    l_diag = np.sqrt(2.0) * model._init_sd
    lx, lp = l_diag[0::2], l_diag[1::2]
    n = model.n_modes
    eye = np.eye(n)
    res_max = bound_max = exact_max = 0.0
    times = np.asarray(times, dtype=float)
    for k, t in enumerate(times):
        a, b, c, d = propagator_blocks(model.basis, t)
        ab, ad, bc, cd = a @ b.T, a @ d.T, b @ c.T, c @ d.T
        res = max(
            np.max(np.abs(ab - ab.T)),
            np.max(np.abs(ad - bc - eye)),
            np.max(np.abs(bc.T - ad.T + eye)),
            np.max(np.abs(cd - cd.T)),
        )
        # S^T Omega S blocks, then scaled by L on both sides
        atc, atd, ctb, btd = a.T @ c, a.T @ d, c.T @ b, b.T @ d
        exx = (atc - atc.T) * np.outer(lx, lx)
        exp_ = (atd - ctb) * np.outer(lx, lp) - eye
        epp = (btd - btd.T) * np.outer(lp, lp)
        frob = np.sqrt(np.sum(exx**2) + 2.0 * np.sum(exp_**2) + np.sum(epp**2))
        res_max = max(res_max, res)
        bound_max = max(bound_max, 0.5 * frob)
        if exact_every and k % exact_every == 0:
            nu = _raw_nu_factor(model.state_at(t).factor)
            exact_max = max(exact_max, float(np.max(np.abs(nu - 0.5))))
    return AuditResult(float(model.params.omegaS), times.size, res_max, bound_max, exact_max)


def _audit_item(config: ExperimentConfig, omega_s: float, exact_every: int) -> AuditResult:
    return audit_symplectic(config.model(omega_s), config.time_grid, exact_every)


def run_symplectic_audit(config: ExperimentConfig, workers: int = 1, exact_every: int = 0) -> list[AuditResult]:
    config = config.validate()
    omegas = [float(w) for w in config.omega_grid]
    if workers <= 1:
        return [_audit_item(config, w, exact_every) for w in omegas]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_audit_item, [config] * len(omegas), omegas, [exact_every] * len(omegas)))


def default_workers() -> int:
    return os.cpu_count() or 1
