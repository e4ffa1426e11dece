"""Effective dimension and the equilibration bounds on multitime statistics.

Time averages are taken two ways. Means use the dephasing identity
exactly; second moments and tail probabilities are sampled over intervals
drawn uniformly from [0, window] at every step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from ..errors import DimensionMismatch, NonPositivePurity, SeriesDiverges
from .channels import Instrument, apply_adjoint, apply_cp, dephase, kraus_rank, povm_norm
from .process import MultitimeInstrument, ProcessSpec, expectation_direct, expectation_equilibrium, outcome_distribution
from .qmath import Operator, OperatorLike, SpectralDecomposition, as_array, check_nonresonance
from .sampling import STREAM_TIMES, derive_rng, parallel_map, resolve_workers, sample_intervals
from .types import BoundReport

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
DEFAULT_WINDOW_PHASES = 1e3


def inverse_effective_dimension(spec: SpectralDecomposition, sigma: OperatorLike) -> float:
    """tr[$(sigma)^2], also for unnormalized sigma."""
    arr = as_array(sigma)
    if arr.shape != (spec.dim, spec.dim):
        raise DimensionMismatch(f"state of shape {arr.shape} vs Hamiltonian dimension {spec.dim}")
    y = np.where(spec.block_mask, spec.to_eigenbasis(arr), 0.0)
    return float(np.real(np.vdot(y.conj().T, y)))


def effective_dimension(spec: SpectralDecomposition, sigma: OperatorLike) -> float:
    """d_eff[sigma] = 1 / tr[$(sigma)^2]."""
    return 1.0 / inverse_effective_dimension(spec, sigma)


def main_bound_rhs(k: int, d_S: int, d_eff: float) -> float:
    """(2^k - 1) d_S^(2k) / d_eff."""
    return (2**k - 1) * d_S ** (2 * k) / d_eff


def default_window(spec: ProcessSpec | SpectralDecomposition) -> float:
    """Sampling window long enough for every phase to wrap many times."""
    h = spec.hamiltonian if isinstance(spec, ProcessSpec) else spec
    gap = h.min_gap()
    return DEFAULT_WINDOW_PHASES / gap if gap > 0 else DEFAULT_WINDOW_PHASES


def spec_effective_dimension(spec: ProcessSpec) -> float:
    return effective_dimension(spec.hamiltonian, spec.rho)


class TighterBoundTerms(BaseModel):
    """Per-step ingredients of the tighter variance bound, j = 0 .. k-1."""
    povm_norms: list[float] = Field(description="||A_{k:...:(j+1)}||_p per j")
    inverse_deff: list[float] = Field(description="tr[$(A_j(omega_j))^2] per j")
    terms: list[float]
    max_form: float
    sum_form: float


def _composed_effects(spec: ProcessSpec, instr: MultitimeInstrument) -> list[Operator]:
    """POVM elements of A_k $ ... $ A_{j+1} on S (x) E, indexed by j."""
    eye = Operator(np.eye(spec.dim), (spec.d_S, spec.d_E))
    effects: list[Operator] = [eye] * spec.steps
    e = eye
    for j in reversed(range(spec.steps)):
        e = apply_adjoint(instr.per_step[j], e)
        effects[j] = e
        e = dephase(spec.hamiltonian, e)
    return effects


def tighter_bound_terms(spec: ProcessSpec, instr: MultitimeInstrument) -> TighterBoundTerms:
    """Terms of the bound that replaces d_S^(2k)/d_eff[rho] by step-resolved quantities.

    Term j multiplies the squared POVM norm of the composed later steps
    by tr[$(A_j(omega_j))^2] with omega_j = $ A_{j-1} ... A_1 $(rho);
    the j = 0 term uses rho itself.
    """
    if instr.steps != spec.steps:
        raise DimensionMismatch(f"{instr.steps}-step instrument on a {spec.steps}-step process")
    h = spec.hamiltonian
    effects = _composed_effects(spec, instr)

    norms, inv = [], []
    omega = dephase(h, spec.rho)
    for j in range(spec.steps):
        norms.append(povm_norm(effects[j]))
        if j == 0:
            inv.append(inverse_effective_dimension(h, spec.rho))
            continue
        if abs(omega.trace()) <= 1e-15:
            raise NonPositivePurity(f"intermediate dephased state before step {j + 1} has zero weight")
        out = apply_cp(instr.per_step[j - 1], omega)
        inv.append(inverse_effective_dimension(h, out))
        omega = dephase(h, out)

    terms = [n**2 * v for n, v in zip(norms, inv)]
    factor = 2**spec.steps - 1
    return TighterBoundTerms(
        povm_norms=norms,
        inverse_deff=inv,
        terms=terms,
        max_form=factor * max(terms),
        sum_form=float(sum(2**j * t for j, t in enumerate(terms))),
    )


def tighter_bound_rhs(spec: ProcessSpec, instr: MultitimeInstrument) -> float:
    return tighter_bound_terms(spec, instr).max_form


# --- Monte Carlo over intervals -------------------------------------------------


def _mc_chunk(fn: Callable, spec: ProcessSpec, payload, window: float, seed: int, start: int, stop: int) -> list:
    out = []
    for i in range(start, stop):
        rng = derive_rng(seed, STREAM_TIMES, i)
        dts = sample_intervals(rng, spec.steps, 0.0, window)
        out.append(fn(spec.with_dts(dts), payload))
    return out


def sample_over_intervals(fn: Callable, spec: ProcessSpec, payload, window: float, n: int, seed: int,
                          workers: int | None = 1) -> list:
    """Evaluate ``fn(spec_with_sampled_dts, payload)`` for draws 0..n-1, in draw order.

    Draw i always uses the stream (seed, times, i), so the result does not
    depend on how draws are split among workers.
    """
    n_jobs = min(resolve_workers(workers), n)
    bounds = np.linspace(0, n, n_jobs + 1).astype(int)
    chunks = parallel_map(
        _mc_chunk,
        [(fn, spec, payload, window, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])],
        workers=n_jobs,
    )
    return [v for chunk in chunks for v in chunk]


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def resonance_note(spec: ProcessSpec) -> str:
    if check_nonresonance(spec.hamiltonian):
        return ""
    logger.warning("Hamiltonian violates the non-resonance condition; time averages may not reach the dephased process")
    return "; non-resonance violated"


def _check_samples(n: int) -> None:
    if n < MIN_SAMPLES:
        logger.warning("only %d interval samples; estimates will be noisy", n)


def _squared_deviation(spec: ProcessSpec, payload) -> float:
    instr, omega_value = payload
    return abs(expectation_direct(spec, instr) - omega_value) ** 2


def variance_monte_carlo(spec: ProcessSpec, instr: MultitimeInstrument, window: float | None = None,
                         n: int = 2000, seed: int = 0, workers: int | None = 1) -> BoundReport:
    """Sampled time average of |<A>_Y - <A>_O|^2 against (2^k-1) d_S^(2k) / d_eff."""
    _check_samples(n)
    window = window or default_window(spec)
    d_eff = spec_effective_dimension(spec)
    rhs = main_bound_rhs(spec.steps, spec.d_S, d_eff)
    context = f"variance k={spec.steps}" + resonance_note(spec)

    if spec.dephased:
        lhs, stderr = 0.0, 0.0
    else:
        omega_value = expectation_equilibrium(spec, instr)
        values = np.array(sample_over_intervals(_squared_deviation, spec, (instr, omega_value), window, n, seed, workers))
        lhs, stderr = _mean_stderr(values)

    report = BoundReport.build(
        context, lhs, stderr, rhs, vacuous_above=1.0,
        samples=n, k=spec.steps, d_S=spec.d_S, d_E=spec.d_E, d_eff=d_eff, seed=seed,
        details={"window": window},
    )
    if report.vacuous:
        logger.info("variance bound is vacuous (rhs=%.3g)", rhs)
    return report


Decomposition = Sequence[tuple[complex, MultitimeInstrument]]


def _weighted_deviation(spec: ProcessSpec, payload) -> float:
    decomposition, omega_values = payload
    total = sum(w * (expectation_direct(spec, instr) - o) for (w, instr), o in zip(decomposition, omega_values))
    return abs(total)


def chebyshev_deviation_check(spec: ProcessSpec, decomposition: Decomposition, window: float | None = None,
                              n: int = 2000, seed: int = 0, threshold_scale: float = 1.0,
                              workers: int | None = 1) -> BoundReport:
    """Tail frequency of |<O>_{Y-O}| above d_S^k sqrt(2^k-1) sum|alpha| / d_eff^(1/3).

    The comparison value is 1 / d_eff^(1/3); ``threshold_scale`` multiplies
    the threshold (1 reproduces the stated form).
    """
    _check_samples(n)
    window = window or default_window(spec)
    k = spec.steps
    d_eff = spec_effective_dimension(spec)
    alpha = sum(abs(w) for w, _ in decomposition)
    threshold = threshold_scale * spec.d_S**k * math.sqrt(2**k - 1) * alpha / d_eff ** (1 / 3)
    rhs = d_eff ** (-1 / 3)
    context = f"chebyshev k={k}" + resonance_note(spec)

    if spec.dephased:
        deviations = np.zeros(n)
    else:
        omega_values = [expectation_equilibrium(spec, instr) for _, instr in decomposition]
        deviations = np.array(
            sample_over_intervals(_weighted_deviation, spec, (list(decomposition), omega_values), window, n, seed, workers)
        )
    exceed = (deviations >= threshold).astype(float)
    freq = float(exceed.mean())
    stderr = math.sqrt(freq * (1 - freq) / n)

    return BoundReport.build(
        context, freq, stderr, rhs, vacuous_above=1.0,
        samples=n, k=k, d_S=spec.d_S, d_E=spec.d_E, d_eff=d_eff, seed=seed,
        details={"threshold": threshold, "alpha_l1": alpha, "mean_deviation": float(deviations.mean())},
    )


# --- operational distinguishability ---------------------------------------------


@dataclass(frozen=True)
class MultitimeMeasurement:
    """Complete instruments applied at steps 1..m, one per step."""

    per_step: tuple[Instrument, ...]
    label: str = ""

    def __post_init__(self):
        per_step = tuple(self.per_step)
        if not per_step:
            raise DimensionMismatch("a measurement needs at least one step")
        object.__setattr__(self, "per_step", per_step)

    @property
    def steps(self) -> int:
        return len(self.per_step)

    def cardinality(self) -> int:
        """Canonical Kraus count summed over outcome strings."""
        return int(np.prod([sum(kraus_rank(o) for o in inst.outcomes) for inst in self.per_step]))


@dataclass(frozen=True)
class MeasurementSet:
    measurements: tuple[MultitimeMeasurement, ...]

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))

    def __iter__(self):
        return iter(self.measurements)

    def __len__(self) -> int:
        return len(self.measurements)

    @property
    def max_steps(self) -> int:
        return max(m.steps for m in self.measurements)


def measurement_set_cardinality(m: MeasurementSet) -> int:
    return sum(meas.cardinality() for meas in m)


def diamond_distance(spec_upsilon: ProcessSpec, spec_omega: Optional[ProcessSpec], m: MeasurementSet) -> float:
    """(1/2) max over measurements of sum_x |P_Y(x) - P_O(x)|.

    With ``spec_omega=None`` the second process is the dephased version of
    the first.
    """
    out = 0.0
    for meas in m:
        p_u = outcome_distribution(spec_upsilon, meas.per_step)
        if spec_omega is None:
            p_o = outcome_distribution(spec_upsilon, meas.per_step, equilibrium=True)
        else:
            p_o = outcome_distribution(spec_omega, meas.per_step)
        if p_u.shape != p_o.shape:
            raise DimensionMismatch("processes yield different outcome spaces")
        out = max(out, 0.5 * float(np.abs(p_u - p_o).sum()))
    return out


def distinguishability_mean_rhs(S: int, k: int, d_S: int, d_eff: float) -> float:
    """Bound on the time-averaged distance: S d_S^k sqrt((2^k-1)/d_eff) / 2."""
    return 0.5 * S * d_S**k * math.sqrt((2**k - 1) / d_eff)


def _distance_sample(spec: ProcessSpec, payload) -> float:
    m, omega_dists = payload
    out = 0.0
    for meas, p_o in zip(m, omega_dists):
        p_u = outcome_distribution(spec, meas.per_step)
        out = max(out, 0.5 * float(np.abs(p_u - p_o).sum()))
    return out


def result2_check(spec: ProcessSpec, m: MeasurementSet, window: float | None = None, n: int = 500,
                  seed: int = 0, workers: int | None = 1) -> BoundReport:
    """Tail frequency of D >= S d_S^k sqrt(2^k-1) / (2 d_eff^(1/4)) against d_eff^(-1/4)."""
    _check_samples(n)
    window = window or default_window(spec)
    k = spec.steps
    if m.max_steps > k:
        raise DimensionMismatch(f"measurement on {m.max_steps} steps for a {k}-step process")
    d_eff = spec_effective_dimension(spec)
    S = measurement_set_cardinality(m)
    threshold = S * spec.d_S**k * math.sqrt(2**k - 1) / (2 * d_eff**0.25)
    rhs = d_eff**-0.25
    mean_rhs = distinguishability_mean_rhs(S, k, spec.d_S, d_eff)

    if spec.dephased:
        distances = np.zeros(n)
    else:
        omega_dists = [outcome_distribution(spec, meas.per_step, equilibrium=True) for meas in m]
        distances = np.array(sample_over_intervals(_distance_sample, spec, (m, omega_dists), window, n, seed, workers))
    freq = float((distances >= threshold).mean())
    stderr = math.sqrt(freq * (1 - freq) / n)
    mean_d, mean_err = _mean_stderr(distances)

    report = BoundReport.build(
        f"distinguishability k={k}" + resonance_note(spec), freq, stderr, rhs, vacuous_above=1.0,
        samples=n, k=k, d_S=spec.d_S, d_E=spec.d_E, d_eff=d_eff, seed=seed,
        details={
            "S": S,
            "threshold": threshold,
            "mean_distance": mean_d,
            "mean_distance_stderr": mean_err,
            "mean_rhs": mean_rhs,
            "mean_satisfied": mean_d - 3 * mean_err <= mean_rhs,
            "mean_vacuous": mean_rhs >= 1.0,
        },
    )
    if report.vacuous:
        logger.info("distinguishability tail bound is vacuous (rhs=%.3g)", rhs)
    elif mean_rhs >= 1.0:
        logger.info("mean distance bound is vacuous (mean rhs=%.3g)", mean_rhs)
    return report


# --- non-Markovianity bound terms -----------------------------------------------


def result3_terms(p: np.ndarray, q: np.ndarray, k: int, k_minus: int, d_S: int, d_eff: float) -> tuple[float, float]:
    """eta_k and C_k maximized over candidate conditioning outcomes w and both processes.

    ``p[l, w]`` is <A_w>_l and ``q[l, w]`` is <A_+ (x) A_w>_l for l = 0
    (driven process) and l = 1 (equilibrium process). C_k for a candidate
    uses q of the complementary process and the geometric ratio
    r = sqrt(2^k_- - 1) d_S^k_- / (d_eff^(1/3) p); its series sums to
    |q| d_eff^(1/3) r / (1 - r). Returns (eta_k, C_k at the maximizer).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=complex)
    if p.shape != q.shape or p.ndim != 2 or p.shape[0] != 2:
        raise DimensionMismatch("expected (2, n) arrays of marginals and joints")
    a_k = math.sqrt(2**k - 1) * d_S**k
    a_minus = math.sqrt(2**k_minus - 1) * d_S**k_minus
    cube = d_eff ** (1 / 3)

    best = (-math.inf, 0.0)
    for lam in range(2):
        for w in range(p.shape[1]):
            pw = p[lam, w]
            if pw <= 0:
                raise SeriesDiverges(math.inf)
            qw = abs(q[1 - lam, w])
            r = a_minus / (cube * pw)
            if qw == 0.0:
                c = 0.0
            elif r >= 1.0:
                raise SeriesDiverges(r)
            else:
                c = qw * cube * r / (1.0 - r)
            eta = 2.0 * (a_k + c) / pw
            if eta > best[0]:
                best = (eta, c)
    return best
