"""Command-line entry point: ``qbmdarwin <subcommand> --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical-consistency failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from qbmdarwin import experiments as ex
from qbmdarwin.errors import (
    ConfigurationError,
    ConsistencyError,
    InstabilityError,
    OracleInconclusiveError,
    UnphysicalStateError,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_OUTPUTS = {
    "redundancy": ("redundancy.csv", ex.REDUNDANCY_HEADER, ex.run_redundancy_dynamics),
    "partial-info": ("partial_info.csv", ex.PARTIAL_INFO_HEADER, ex.run_partial_info),
    "sweep": ("sweep.csv", ex.SWEEP_HEADER, ex.run_spectrum_sweep),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbmdarwin",
        description="Quantum Darwinism and non-Markovianity in a structured harmonic bath.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "redundancy": "f_delta(t) traces for each omega_s",
        "partial-info": "averaged I(S:f) against fragment fraction at t_eval",
        "sweep": "non-Markovianity and record non-monotonicity across omega_s",
        "oracle": "compare the normal-mode propagator with RK4 integration (n_osc <= 4)",
        "validate": "parse and validate a configuration without running it",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, help="config file path or shipped name (fig1.cfg ...)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides master_seed)")
        p.add_argument("--out", default=None, help="output directory (overrides out_dir)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        group = p.add_argument_group("config overrides")
        for key in ex._PARSERS:
            group.add_argument(f"--{key}", default=None, metavar="VALUE")
    return parser


def _load(args) -> ex.ExperimentConfig:
    config = ex.ExperimentConfig.from_file(args.config)
    overrides = {key: getattr(args, key) for key in ex._PARSERS}
    if args.seed is not None:
        overrides["master_seed"] = str(args.seed)
    if args.out is not None:
        overrides["out_dir"] = args.out
    return config.with_overrides(**overrides).validate()


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = _load(args)
        if args.command == "validate":
            print(f"{config.source}: ok ({config.omega_grid.size} omega_s values)")
            return EXIT_OK
        if args.command == "oracle":
            report = ex.run_oracle_check(config)
            print(report.summary())
            return EXIT_OK if report.passed else EXIT_NUMERICAL
        filename, header, runner = _OUTPUTS[args.command]
        rows = runner(config, workers=max(1, args.workers))
        path = ex.write_csv(Path(config.out_dir) / filename, header, rows, args.command)
        print(f"wrote {len(rows)} rows to {path}")
        return EXIT_OK
    except (ConfigurationError, InstabilityError) as exc:
        where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
        print(f"configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConsistencyError, OracleInconclusiveError, UnphysicalStateError) as exc:
        print(f"numerical consistency failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
