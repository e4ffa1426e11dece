"""Command-line front end.

Results go to stdout (and to files under the output directory); logs go
to stderr. Exit codes: 0 success, 1 a non-vacuous bound was violated,
2 configuration or input error, 3 dimension error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from . import io
from .config import CHECKS, RunConfig, load_config
from .errors import (
    BadFactorIndex,
    BinTooLarge,
    ConfigError,
    DimensionMismatch,
    InputFormatError,
    ProcequilError,
    RareOutcome,
    SeriesDiverges,
    TooLarge,
    TooManyTerms,
)
from .sim.bounds import MeasurementSet, MultitimeMeasurement, effective_dimension, result2_check
from .sim.channels import random_projective_instrument
from .sim.experiments import binned, draw_model, model_effective_dimension, plot_series, random_pure_state, sweep
from .sim.nonmarkov import CausalBreakProtocol, result3_check
from .sim.process import ProcessSpec, build_equilibrium_tensor, build_process_tensor
from .sim.qmath import Operator, State, spectral_decompose
from .sim.sampling import STREAM_INSTRUMENT, STREAM_TIMES, derive_rng, sample_intervals
from .sim.suite import run_verification_suite, undefined_report, violations
from .sim.types import TIME_WINDOWS, BoundReport, TimeMode

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_DIMENSION = 3


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _report_exit(reports: Sequence[BoundReport]) -> int:
    bad = violations(list(reports))
    for r in bad:
        print(f"bound violated: {r.context} lhs={r.lhs_estimate!r} rhs={r.rhs!r} seed={r.seed}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def _emit_reports(config: RunConfig, name: str, reports: Sequence[BoundReport]) -> int:
    io.write_reports_csv(config.output_dir / f"{name}.csv", reports)
    io.write_reports_csv(sys.stdout, reports)
    return _report_exit(reports)


def _model_spec(config: RunConfig, d_E: int, steps: int) -> ProcessSpec:
    model, rho = draw_model(config.fig2.bath(), d_E, config.seed)
    return ProcessSpec.from_hamiltonian(model.h_se, rho, 2, steps)


# --- subcommands ----------------------------------------------------------------


def cmd_deff(config: RunConfig) -> int:
    cfg = config.deff
    if cfg.hamiltonian is None:
        d_eff = model_effective_dimension(config.fig2.bath(), cfg.d_E, config.seed)
    else:
        h = io.read_operator_csv(cfg.hamiltonian)
        spec = spectral_decompose(h, cfg.tol)
        if cfg.state is None:
            rho = Operator(np.eye(h.dim) / h.dim, h.dims)
        else:
            rho = State.from_operator(io.read_operator_csv(cfg.state)).op
        logger.info("%d levels from a %d-dimensional Hamiltonian", spec.n_levels, spec.dim)
        d_eff = effective_dimension(spec, rho)
    print(repr(float(d_eff)))
    return EXIT_OK


def cmd_verify_bounds(config: RunConfig) -> int:
    reports = run_verification_suite(config.bounds, config.seed, config.workers)
    return _emit_reports(config, "bounds", reports)


def cmd_fig2(config: RunConfig) -> int:
    cfg = config.fig2
    result = sweep(cfg.d_E_values(), cfg.modes, cfg.counts(), cfg.bath(), config.seed, config.workers)
    smoothed = binned(result, cfg.bin)

    out = config.output_dir
    io.write_sweep_csv(out / "fig2_raw.csv", result)
    io.write_sweep_csv(out / "fig2_binned.csv", smoothed)
    io.write_plot_json(out / "fig2_plot.json", plot_series(result) + plot_series(smoothed, binned_rows=True))
    io.write_sweep_csv(sys.stdout, result)
    return EXIT_OK


def cmd_diamond(config: RunConfig) -> int:
    cfg = config.diamond
    spec = _model_spec(config, cfg.d_E, cfg.steps)
    rng = derive_rng(config.seed, STREAM_INSTRUMENT)
    m = MeasurementSet(tuple(
        MultitimeMeasurement(tuple(random_projective_instrument(rng, spec.d_S) for _ in range(cfg.steps)), label=f"M{i}")
        for i in range(cfg.n_instruments)
    ))
    report = result2_check(spec, m, cfg.window, cfg.samples, config.seed, config.workers)
    return _emit_reports(config, "diamond", [report])


def cmd_nonmarkov(config: RunConfig) -> int:
    cfg = config.nonmarkov
    spec = _model_spec(config, cfg.d_E, cfg.steps)
    rng = derive_rng(config.seed, STREAM_INSTRUMENT)
    proto = CausalBreakProtocol(
        tuple(random_projective_instrument(rng, spec.d_S) for _ in range(cfg.k_minus)),
        Operator(random_pure_state(spec.d_S, rng).data),
        tuple(random_projective_instrument(rng, spec.d_S) for _ in range(cfg.steps - cfg.k_minus)),
    )
    try:
        report = result3_check(spec, proto, cfg.window, cfg.samples, config.seed, workers=config.workers)
    except (SeriesDiverges, RareOutcome) as exc:
        report = undefined_report(spec, config.seed, exc)
    return _emit_reports(config, "nonmarkov", [report])


def cmd_tensor_dump(config: RunConfig) -> int:
    cfg = config.tensor
    dts = cfg.dts
    if dts is None:
        low, high = TIME_WINDOWS[TimeMode.LONG]
        dts = sample_intervals(derive_rng(config.seed, STREAM_TIMES), cfg.steps, low, high)
    spec = _model_spec(config, cfg.d_E, cfg.steps).with_dts(dts)
    tensor = build_equilibrium_tensor(spec) if cfg.equilibrium else build_process_tensor(spec)
    path = config.output_dir / cfg.output
    io.dump_tensor(path, tensor)
    print(path)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "deff": cmd_deff,
    "verify-bounds": cmd_verify_bounds,
    "fig2": cmd_fig2,
    "diamond": cmd_diamond,
    "nonmarkov": cmd_nonmarkov,
    "tensor-dump": cmd_tensor_dump,
}


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procequil", description="Equilibration of multitime quantum processes")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="worker processes; 0 means one per core")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--log-level", dest="log_level")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deff", parents=[common], help="effective dimension of H and rho")
    p.add_argument("--hamiltonian", dest="deff__hamiltonian")
    p.add_argument("--state", dest="deff__state")
    p.add_argument("--d-E", type=int, dest="deff__d_E")
    p.add_argument("--tol", type=float, dest="deff__tol")

    p = sub.add_parser("verify-bounds", parents=[common], help="randomized bound-verification suite")
    p.add_argument("--n-seeds", type=int, dest="bounds__n_seeds")
    p.add_argument("--samples", type=int, dest="bounds__samples")
    p.add_argument("--check", action="append", choices=CHECKS, dest="bounds__checks")
    p.add_argument("--window", type=float, dest="bounds__window")
    p.add_argument("--dephased", action="store_const", const=True, dest="bounds__dephased")
    p.add_argument("--hamiltonian", choices=("random", "resonant"), dest="bounds__hamiltonian")

    p = sub.add_parser("fig2", parents=[common], help="random-bath non-Markovianity sweep")
    p.add_argument("--mode", action="append", choices=[m.value for m in TimeMode], dest="fig2__modes")
    p.add_argument("--bin", type=int, dest="fig2__bin")
    p.add_argument("--d-E-min", type=int, dest="fig2__d_E_min")
    p.add_argument("--d-E-max", type=int, dest="fig2__d_E_max")
    p.add_argument("--d-E-step", type=int, dest="fig2__d_E_step")
    p.add_argument("--n-models", type=int, dest="fig2__n_models")
    p.add_argument("--full-scale", action="store_const", const=True, dest="fig2__full_scale")

    p = sub.add_parser("diamond", parents=[common], help="operational distinguishability from equilibrium")
    p.add_argument("--d-E", type=int, dest="diamond__d_E")
    p.add_argument("--steps", type=int, dest="diamond__steps")
    p.add_argument("--samples", type=int, dest="diamond__samples")

    p = sub.add_parser("nonmarkov", parents=[common], help="non-Markovianity across a causal break")
    p.add_argument("--d-E", type=int, dest="nonmarkov__d_E")
    p.add_argument("--steps", type=int, dest="nonmarkov__steps")
    p.add_argument("--k-minus", type=int, dest="nonmarkov__k_minus")
    p.add_argument("--samples", type=int, dest="nonmarkov__samples")

    p = sub.add_parser("tensor-dump", parents=[common], help="write a process tensor as CSV")
    p.add_argument("--d-E", type=int, dest="tensor__d_E")
    p.add_argument("--steps", type=int, dest="tensor__steps")
    p.add_argument("--equilibrium", action="store_const", const=True, dest="tensor__equilibrium")
    p.add_argument("--output", dest="tensor__output")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")

    try:
        config = load_config(config_path, **args)
        configure_logging(config.log_level)
        config.output_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[command](config)
    except (DimensionMismatch, BadFactorIndex, TooLarge, TooManyTerms) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DIMENSION
    except (ConfigError, InputFormatError, BinTooLarge, ValidationError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG
    except ProcequilError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
