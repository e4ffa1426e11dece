"""Randomized bound-verification suite.

Instance ``s`` of a run cycles through the configured bath dimensions
first and the step counts second. Everything it draws (Hamiltonian,
state, instruments, interval samples) comes from ``derive_seed(seed, s)``,
so the seed printed next to a violated row rebuilds that instance alone.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Iterator

import numpy as np

from ..errors import RareOutcome, SeriesDiverges
from .bounds import (
    MeasurementSet,
    MultitimeMeasurement,
    chebyshev_deviation_check,
    main_bound_rhs,
    result2_check,
    spec_effective_dimension,
    tighter_bound_terms,
    variance_monte_carlo,
)
from .channels import random_projective_instrument, random_rank1_instrument
from .experiments import random_pure_state
from .nonmarkov import CausalBreakProtocol, result3_check
from .process import MultitimeInstrument, ProcessSpec, decompose_observable
from .qmath import SIGMA_X, SIGMA_Y, SIGMA_Z, Operator, random_hermitian
from .sampling import STREAM_INSTRUMENT, STREAM_MODEL, STREAM_STATE, derive_rng, derive_seed
from .types import BoundReport

if TYPE_CHECKING:
    from ..config import BoundsConfig

logger = logging.getLogger(__name__)

D_S = 2
TIGHTER_SLACK = 1e-12
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def instance_shape(index: int, d_E_values, steps_values) -> tuple[int, int]:
    """(d_E, k) of suite instance ``index``."""
    d_E = d_E_values[index % len(d_E_values)]
    k = steps_values[(index // len(d_E_values)) % len(steps_values)]
    return d_E, k


def random_instance(seed: int, d_E: int, steps: int, hamiltonian: str = "random") -> ProcessSpec:
    """Random H on S (x) E with a random pure state, d_S = 2."""
    d = D_S * d_E
    if hamiltonian == "resonant":
        # evenly spaced levels repeat every gap
        h = np.diag(np.arange(d, dtype=float))
    else:
        h = random_hermitian(d, derive_rng(seed, STREAM_MODEL)).data
    rho = random_pure_state(d, derive_rng(seed, STREAM_STATE), (D_S, d_E))
    return ProcessSpec.from_hamiltonian(h, rho.data, D_S, steps)


def _instrument(seed: int, steps: int) -> MultitimeInstrument:
    rng = derive_rng(seed, STREAM_INSTRUMENT)
    return MultitimeInstrument(tuple(random_rank1_instrument(rng, D_S) for _ in range(steps)))


def _tighter_report(spec: ProcessSpec, instr: MultitimeInstrument, seed: int) -> BoundReport:
    terms = tighter_bound_terms(spec, instr)
    d_eff = spec_effective_dimension(spec)
    main = main_bound_rhs(spec.steps, spec.d_S, d_eff)
    return BoundReport.build(
        f"tighter k={spec.steps}", terms.max_form, 0.0, main * (1 + TIGHTER_SLACK),
        k=spec.steps, d_S=spec.d_S, d_E=spec.d_E, d_eff=d_eff, seed=seed,
        details={"sum_form": terms.sum_form, "main": main},
    )


def _measurement_set(seed: int, steps: int, count: int = 2) -> MeasurementSet:
    rng = derive_rng(seed, STREAM_INSTRUMENT, 1)
    return MeasurementSet(tuple(
        MultitimeMeasurement(tuple(random_projective_instrument(rng, D_S) for _ in range(steps)), label=f"M{i}")
        for i in range(count)
    ))


def _protocol(seed: int, steps: int) -> CausalBreakProtocol:
    rng = derive_rng(seed, STREAM_INSTRUMENT, 2)
    a_minus = (random_projective_instrument(rng, D_S),)
    reprepare = random_pure_state(D_S, rng).data
    a_plus = tuple(random_projective_instrument(rng, D_S) for _ in range(steps - 1))
    return CausalBreakProtocol(a_minus, Operator(reprepare), a_plus)


def undefined_report(spec: ProcessSpec, seed: int, exc: Exception) -> BoundReport:
    logger.info("non-Markovianity bound undefined for seed %d: %s", seed, exc)
    return BoundReport(
        context=f"non-markovianity k={spec.steps}; undefined", lhs_estimate=0.0, rhs=float("inf"),
        satisfied=True, vacuous=True, k=spec.steps, d_S=spec.d_S, d_E=spec.d_E,
        d_eff=spec_effective_dimension(spec), seed=seed, details={"error": str(exc)},
    )


def instance_reports(config: "BoundsConfig", seed: int, d_E: int, steps: int,
                     workers: int | None = 1) -> Iterator[BoundReport]:
    """Every enabled check on one random instance."""
    spec = random_instance(seed, d_E, steps, config.hamiltonian)
    if config.dephased:
        spec = spec.as_dephased()
    checks = set(config.checks)
    window, n = config.window, config.samples
    instr = _instrument(seed, steps)

    if "variance" in checks:
        yield variance_monte_carlo(spec, instr, window, n, seed, workers)
    if "tighter" in checks and not config.dephased:
        yield _tighter_report(spec, instr, seed)
    if "chebyshev" in checks and steps <= config.chebyshev_max_steps:
        rng = derive_rng(seed, STREAM_INSTRUMENT, 3)
        ops = [PAULIS[i] for i in rng.integers(0, len(PAULIS), size=steps)]
        yield chebyshev_deviation_check(spec, decompose_observable(ops), window, n, seed, workers=workers)
    if "distinguishability" in checks:
        yield result2_check(spec, _measurement_set(seed, steps), window, n, seed, workers)
    if "nonmarkov" in checks and steps >= 2:
        try:
            yield result3_check(spec, _protocol(seed, steps), window, n, seed, workers=workers)
        except (SeriesDiverges, RareOutcome) as exc:
            yield undefined_report(spec, seed, exc)


def run_verification_suite(config: "BoundsConfig", seed: int = 0, workers: int | None = 1) -> list[BoundReport]:
    """BoundReports for ``config.n_seeds`` random instances, in instance order."""
    reports: list[BoundReport] = []
    for index in range(config.n_seeds):
        d_E, steps = instance_shape(index, config.d_E, config.steps)
        instance_seed = derive_seed(seed, index)
        logger.info("instance %d: d_E=%d k=%d seed=%d", index, d_E, steps, instance_seed)
        reports.extend(instance_reports(config, instance_seed, d_E, steps, workers))
    return reports


def violations(reports: list[BoundReport]) -> list[BoundReport]:
    """Rows whose bound is informative and was exceeded."""
    return [r for r in reports if not r.satisfied and not r.vacuous]
