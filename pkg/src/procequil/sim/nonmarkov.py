"""Causal-break protocols, conditional outcome tables and non-Markovianity."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, InsufficientColumns, RareOutcome
from .bounds import resonance_note, default_window, result3_terms, sample_over_intervals, spec_effective_dimension
from .channels import CPMap, Instrument, compose, replace_map
from .process import MultitimeInstrument, ProcessSpec, expectation_direct, expectation_equilibrium, outcome_distribution
from .qmath import Operator, OperatorLike, as_array, check_state
from .types import BoundReport

logger = logging.getLogger(__name__)

EPS_RARE = 1e-12


@dataclass(frozen=True)
class CausalBreakProtocol:
    """Instruments before and after a measure-and-reprepare break.

    ``a_minus`` acts at steps 1..k_-; after its last step the system is
    discarded and replaced by ``reprepare``. ``a_plus`` acts at the
    remaining steps.
    """

    a_minus: tuple[Instrument, ...]
    reprepare: Operator
    a_plus: tuple[Instrument, ...]

    def __post_init__(self):
        object.__setattr__(self, "a_minus", tuple(self.a_minus))
        object.__setattr__(self, "a_plus", tuple(self.a_plus))
        if not self.a_minus or not self.a_plus:
            raise DimensionMismatch("both sides of a causal break need at least one step")
        if not isinstance(self.reprepare, Operator):
            object.__setattr__(self, "reprepare", Operator(as_array(self.reprepare)))

    @property
    def k_minus(self) -> int:
        return len(self.a_minus)

    @property
    def steps(self) -> int:
        return len(self.a_minus) + len(self.a_plus)

    @property
    def d_S(self) -> int:
        return self.a_minus[0].dim

    def validate(self) -> None:
        """Raise unless the instruments are complete and the re-prepared state is valid."""
        check_state(self.reprepare)
        for inst in self.a_minus + self.a_plus:
            if not inst.check_complete():
                raise DimensionMismatch(f"instrument {inst.label!r} is not complete")

    def instruments(self) -> list[Instrument]:
        """Per-step instruments with the re-preparation folded into the last A_- step."""
        reset = replace_map(self.reprepare)
        last = self.a_minus[-1]
        broken = Instrument(
            tuple(compose(reset, o) for o in last.outcomes), complete=last.complete, label=f"{last.label}|break"
        )
        return list(self.a_minus[:-1]) + [broken] + list(self.a_plus)


@dataclass(frozen=True)
class ConditionalTable:
    """Joint outcome probabilities, rows x_+ and columns x_-, with the x_- marginals."""

    joint: np.ndarray
    marginal_minus: np.ndarray
    eps_rare: float = EPS_RARE

    @property
    def defined(self) -> np.ndarray:
        return self.marginal_minus > self.eps_rare

    @property
    def conditional(self) -> np.ndarray:
        """P(x_+ | x_-); undefined columns are NaN."""
        out = np.full(self.joint.shape, np.nan)
        ok = self.defined
        out[:, ok] = self.joint[:, ok] / self.marginal_minus[ok]
        return out


def conditional_probabilities(spec: ProcessSpec, proto: CausalBreakProtocol, equilibrium: bool = False,
                              strict: bool = True, eps_rare: float = EPS_RARE) -> ConditionalTable:
    """P(x_+ | x_-) across the causal break.

    Outcome strings on either side are flattened in row-major order. A
    column whose marginal is at most ``eps_rare`` raises ``RareOutcome``
    when ``strict``, and is otherwise flagged undefined.
    """
    if proto.steps != spec.steps:
        raise DimensionMismatch(f"{proto.steps}-step protocol on a {spec.steps}-step process")
    if proto.d_S != spec.d_S:
        raise DimensionMismatch(f"protocol on dimension {proto.d_S} for d_S={spec.d_S}")
    instruments = proto.instruments()
    full = outcome_distribution(spec, instruments, equilibrium)
    n_minus = int(np.prod(full.shape[: proto.k_minus]))
    joint = full.reshape(n_minus, -1).T
    marginal = outcome_distribution(spec, instruments[: proto.k_minus], equilibrium).reshape(-1)

    rare = np.nonzero(marginal <= eps_rare)[0]
    if rare.size:
        if strict:
            raise RareOutcome(int(rare[0]), float(marginal[rare[0]]))
        logger.info("flagging %d rare conditioning outcomes as undefined", rare.size)
    return ConditionalTable(joint=joint, marginal_minus=marginal, eps_rare=eps_rare)


def _row_spread(row: np.ndarray) -> float:
    return float(row.max() - row.min())


def non_markovianity(table: ConditionalTable) -> float:
    """N = sum over x_+ of the largest difference P(x_+|x_-) - P(x_+|y_-)."""
    ok = table.defined
    if np.count_nonzero(ok) < 2:
        raise InsufficientColumns("need at least two well-defined conditioning outcomes")
    cond = table.conditional[:, ok]
    return float(sum(_row_spread(row) for row in cond))


def _result3_sample(spec: ProcessSpec, payload) -> tuple[float, float, float]:
    """(|dN| for the chosen x_+, eta_k, summed-definition |dN|) at one set of intervals."""
    proto, omega_table, plus_outcome, d_eff = payload
    table = conditional_probabilities(spec, proto)
    cu, co = table.conditional, omega_table.conditional

    row_u, row_o = cu[plus_outcome], co[plus_outcome]
    n_u, n_o = _row_spread(row_u), _row_spread(row_o)
    candidates = sorted({int(np.argmax(row_u)), int(np.argmin(row_u)), int(np.argmax(row_o)), int(np.argmin(row_o))})

    p = np.array([table.marginal_minus[candidates], omega_table.marginal_minus[candidates]])
    q = np.array([table.joint[plus_outcome, candidates], omega_table.joint[plus_outcome, candidates]])
    eta, _ = result3_terms(p, q, spec.steps, proto.k_minus, spec.d_S, d_eff)

    summed = abs(non_markovianity(table) - non_markovianity(omega_table))
    return abs(n_u - n_o), eta, summed


def result3_check(spec: ProcessSpec, proto: CausalBreakProtocol, window: float | None = None, n: int = 500,
                  seed: int = 0, plus_outcome: int = 0, workers: int | None = 1) -> BoundReport:
    """Tail frequency of |N_Y - N_O| >= eta_k / d_eff^(1/3) against 2 / d_eff^(1/3).

    N here is the single-outcome form for the A_+ outcome ``plus_outcome``;
    eta_k is evaluated at every sample from that sample's maximizing
    conditioning outcomes. The summed-definition difference is reported in
    the details.
    """
    window = window or default_window(spec)
    d_eff = spec_effective_dimension(spec)
    cube = d_eff ** (1 / 3)
    rhs = 2.0 / cube
    omega_table = conditional_probabilities(spec, proto, equilibrium=True)

    if spec.dephased:
        samples = [_result3_sample(spec, (proto, omega_table, plus_outcome, d_eff))] * n
    else:
        samples = sample_over_intervals(_result3_sample, spec, (proto, omega_table, plus_outcome, d_eff),
                                        window, n, seed, workers)
    dev = np.array([s[0] for s in samples])
    eta = np.array([s[1] for s in samples])
    summed = np.array([s[2] for s in samples])

    freq = float((dev >= eta / cube).mean())
    stderr = math.sqrt(freq * (1 - freq) / n)
    report = BoundReport.build(
        f"non-markovianity k={spec.steps}" + resonance_note(spec), freq, stderr, rhs, vacuous_above=1.0,
        samples=n, k=spec.steps, d_S=spec.d_S, d_E=spec.d_E, d_eff=d_eff, seed=seed,
        details={
            "k_minus": proto.k_minus,
            "plus_outcome": plus_outcome,
            "eta_min": float(eta.min()),
            "mean_deviation": float(dev.mean()),
            "mean_summed_deviation": float(summed.mean()),
        },
    )
    if report.vacuous:
        logger.info("non-Markovianity bound is vacuous (rhs=%.3g)", rhs)
    return report


def single_step_protocol(a_minus: Instrument, reprepare: OperatorLike, a_plus: Sequence[Instrument]) -> CausalBreakProtocol:
    return CausalBreakProtocol((a_minus,), Operator(as_array(reprepare)), tuple(a_plus))


def branch_probability(spec: ProcessSpec, proto: CausalBreakProtocol, plus: Sequence[int], minus: Sequence[int],
                       equilibrium: bool = False) -> float:
    """Joint probability of one outcome string, by composing the maps of a single branch."""
    maps: list[CPMap] = []
    for inst, x in zip(proto.instruments(), list(minus) + list(plus)):
        maps.append(inst.outcomes[x])
    instr = MultitimeInstrument(tuple(maps))
    value = expectation_equilibrium(spec, instr) if equilibrium else expectation_direct(spec, instr)
    return float(np.real(value))
