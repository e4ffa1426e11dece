"""Spin coupled to a random-matrix bath: non-Markovianity against effective dimension.

Each trial draws a Hamiltonian and a pure initial state, then runs a
three-step protocol. Step 1 applies one of ``n_aminus`` random rank-1
maps and re-prepares a random system state; step 2 applies a random rank-1
map and re-prepares again; step 3 applies a random rank-1 map. The
probabilities P(+|x_-) of the later maps given the step-1 choice give
N = max_x P(+|x) - min_x P(+|x), averaged over ``n_aplus`` draws of the
later maps and states.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.random import default_rng
from pydantic import BaseModel, Field
from scipy import stats

from ..errors import BinTooLarge, ConfigError
from .bounds import effective_dimension
from .channels import random_rank1_instrument
from .qmath import IDENTITY_2, SIGMA_X, SIGMA_Z, Operator, SpectralDecomposition, State, spectral_decompose
from .sampling import STREAM_INSTRUMENT, STREAM_MODEL, STREAM_STATE, STREAM_TIMES, derive_rng, derive_seed, parallel_map, sample_intervals
from .types import TIME_WINDOWS, PlotPoint, PlotSeries, SweepResult, SweepRow, TimeMode

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]
PROTOCOL_STEPS = 3


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else default_rng(seed)


class BathParameters(BaseModel):
    """Qubit splitting, tunnelling and coupling of the random-bath model."""
    omega: float = Field(default=0.5, gt=0.0, description="qubit level splitting, also the coupling cutoff")
    delta: float = Field(default=0.2, description="tunnelling amplitude")
    lam: float = Field(default=0.1, ge=0.0, description="system-bath coupling strength")


class ProtocolCounts(BaseModel):
    n_aminus: int = Field(default=20, ge=2)
    n_aplus: int = Field(default=25, ge=1)
    n_models: int = Field(default=12, ge=1)


@dataclass(frozen=True)
class RandomBathModel:
    """H = H_S (x) I + I (x) diag(eps) + lam sigma_x (x) B."""

    omega: float
    delta: float
    lam: float
    d_E: int
    seed: int | None
    h_se: Operator
    b: np.ndarray
    bath_energies: np.ndarray

    def decompose(self) -> SpectralDecomposition:
        return spectral_decompose(self.h_se)


def system_hamiltonian(omega: float, delta: float) -> np.ndarray:
    return 0.5 * omega * SIGMA_Z + 0.5 * delta * SIGMA_X


def build_random_bath(omega: float, delta: float, lam: float, d_E: int, seed: SeedLike) -> RandomBathModel:
    """Random bath energies on [0, 1] and a zero-diagonal coupling cut off at |eps_j - eps_k| >= omega."""
    if d_E < 1:
        raise ConfigError("bath dimension must be positive")
    if not 0 < omega < 1:
        logger.warning("omega=%g outside (0, 1); the coupling cutoff keeps %s", omega, "everything" if omega >= 1 else "nothing")
    rng = _rng(seed)
    eps = rng.uniform(0.0, 1.0, size=d_E)
    r = rng.uniform(-1.0, 1.0, size=(d_E, d_E))
    s = 0.5 * (r + r.T)
    b = s - np.diag(np.diag(s))
    b[np.abs(eps[:, None] - eps[None, :]) >= omega] = 0.0

    h = (
        np.kron(system_hamiltonian(omega, delta), np.eye(d_E))
        + np.kron(IDENTITY_2, np.diag(eps))
        + lam * np.kron(SIGMA_X, b)
    )
    return RandomBathModel(
        omega=omega,
        delta=delta,
        lam=lam,
        d_E=d_E,
        seed=seed if isinstance(seed, (int, np.integer)) else None,
        h_se=Operator(h, (2, d_E)),
        b=b,
        bath_energies=eps,
    )


def random_pure_state(d: int, seed: SeedLike, dims: Sequence[int] | None = None) -> State:
    """Normalized complex Gaussian vector in the computational basis."""
    rng = _rng(seed)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return State.pure(psi, dims)


def draw_model(params: BathParameters, d_E: int, seed: int) -> tuple[RandomBathModel, np.ndarray]:
    """Bath model and pure initial state of the cell ``seed``."""
    model = build_random_bath(params.omega, params.delta, params.lam, d_E, derive_rng(seed, STREAM_MODEL))
    rho = random_pure_state(2 * d_E, derive_rng(seed, STREAM_STATE, 0)).data
    return model, rho


def model_effective_dimension(params: BathParameters, d_E: int, seed: int) -> float:
    model, rho = draw_model(params, d_E, seed)
    return effective_dimension(model.decompose(), rho)


# --- one trial --------------------------------------------------------------


def _system_trace(op: np.ndarray, sys_state: np.ndarray, d_E: int) -> np.ndarray:
    """tr_S[(sigma (x) I) op] as a d_E x d_E matrix."""
    return np.einsum("ji,iejf->ef", sys_state, op.reshape(2, d_E, 2, d_E))


def _heisenberg(h: SpectralDecomposition, op: np.ndarray, dt: float | None) -> np.ndarray:
    """U^dagger op U, or the dephased op when ``dt`` is None."""
    y = h.to_eigenbasis(op)
    if dt is None:
        y = np.where(h.block_mask, y, 0.0)
    else:
        ph = h.phases(dt)
        y = y * np.outer(ph.conj(), ph)
    return h.from_eigenbasis(y)


def _schrodinger(h: SpectralDecomposition, rho: np.ndarray, dt: float | None) -> np.ndarray:
    y = h.to_eigenbasis(rho)
    if dt is None:
        y = np.where(h.block_mask, y, 0.0)
    else:
        ph = h.phases(dt)
        y = y * np.outer(ph, ph.conj())
    return h.from_eigenbasis(y)


def protocol_non_markovianity(h: SpectralDecomposition, rho: np.ndarray, d_E: int, k1: Sequence[np.ndarray],
                              k2: np.ndarray, k3: np.ndarray, sys2: np.ndarray, sys3: np.ndarray,
                              dts: tuple[float, float, float] | None) -> float:
    """max - min over step-1 maps of P(+|x_-) for one choice of later maps and intervals.

    ``dts=None`` evaluates the equilibrium process.
    """
    t1, t2, t3 = dts if dts is not None else (None, None, None)
    eye_e = np.eye(d_E)

    e3 = _heisenberg(h, np.kron(k3.conj().T @ k3, eye_e), t3)
    f3 = _system_trace(e3, sys3, d_E)
    e2 = _heisenberg(h, np.kron(k2.conj().T @ k2, f3), t2)
    f2 = _system_trace(e2, sys2, d_E)

    sigma = _schrodinger(h, rho, t1).reshape(2, d_E, 2, d_E)
    cond = []
    for k in k1:
        m = k.conj().T @ k
        joint = np.einsum("ij,ef,jfie->", m, f2, sigma)
        p = np.einsum("ij,jeie->", m, sigma)
        cond.append(np.real(joint) / np.real(p))
    return float(max(cond) - min(cond))


class TrialResult(BaseModel):
    """Non-Markovianity of one (H, rho) draw in every requested mode."""
    d_E: int
    index: int
    d_eff: float
    n_upsilon: dict[TimeMode, float]
    n_omega: float


def fig2_trial(params: BathParameters, d_E: int, modes: Sequence[TimeMode], counts: ProtocolCounts,
               seed: int, index: int = 0) -> TrialResult:
    """One model draw of the protocol; draws depend only on (seed, d_E, index)."""
    cell = derive_seed(seed, d_E, index)
    model, rho = draw_model(params, d_E, cell)
    h = model.decompose()
    d_eff = effective_dimension(h, rho)

    inst_rng = derive_rng(cell, STREAM_INSTRUMENT)
    k1 = [random_rank1_instrument(inst_rng, 2).kraus[0] for _ in range(counts.n_aminus)]

    n_u = {m: 0.0 for m in modes}
    n_o = 0.0
    for j in range(counts.n_aplus):
        plus_rng = derive_rng(cell, STREAM_INSTRUMENT, j + 1)
        k2 = random_rank1_instrument(plus_rng, 2).kraus[0]
        k3 = random_rank1_instrument(plus_rng, 2).kraus[0]
        sys2 = random_pure_state(2, plus_rng).data
        sys3 = random_pure_state(2, plus_rng).data
        args = (h, rho, d_E, k1, k2, k3, sys2, sys3)

        omega_value = protocol_non_markovianity(*args, None)
        n_o += omega_value
        for mode in modes:
            if mode == TimeMode.DEPHASED:
                n_u[mode] += omega_value
                continue
            low, high = TIME_WINDOWS[mode]
            dts = sample_intervals(derive_rng(cell, STREAM_TIMES, j), PROTOCOL_STEPS, low, high)
            n_u[mode] += protocol_non_markovianity(*args, dts)

    scale = 1.0 / counts.n_aplus
    return TrialResult(
        d_E=d_E,
        index=index,
        d_eff=d_eff,
        n_upsilon={m: v * scale for m, v in n_u.items()},
        n_omega=n_o * scale,
    )


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


def aggregate_trials(trials: Sequence[TrialResult], modes: Sequence[TimeMode]) -> list[SweepRow]:
    """One row per mode from trials at a single bath dimension."""
    d_eff = np.array([t.d_eff for t in trials])
    omega = np.array([t.n_omega for t in trials])
    rows = []
    for mode in modes:
        ups = np.array([t.n_upsilon[mode] for t in trials])
        rows.append(SweepRow(
            d_E=trials[0].d_E,
            mode=mode,
            d_eff_mean=float(d_eff.mean()),
            d_eff_min=float(d_eff.min()),
            d_eff_max=float(d_eff.max()),
            N_upsilon=float(ups.mean()),
            N_upsilon_stderr=_stderr(ups),
            N_omega=float(omega.mean()),
            N_omega_stderr=_stderr(omega),
            n_trials=len(trials),
        ))
    return rows


def run_fig2_protocol(params: BathParameters, d_E: int, modes: Sequence[TimeMode] = (TimeMode.LONG,),
                      counts: ProtocolCounts | None = None, seed: int = 0, workers: int | None = 1) -> list[SweepRow]:
    """All model draws at one bath dimension, aggregated per mode."""
    counts = counts or ProtocolCounts()
    modes = [TimeMode(m) for m in modes]
    trials = parallel_map(fig2_trial, [(params, d_E, modes, counts, seed, i) for i in range(counts.n_models)], workers)
    return aggregate_trials(trials, modes)


def _sort_rows(rows: Iterable[SweepRow], modes: Sequence[TimeMode]) -> list[SweepRow]:
    order = {m: i for i, m in enumerate(modes)}
    return sorted(rows, key=lambda r: (order[r.mode], r.d_eff_mean, r.d_E))


def sweep(d_E_values: Sequence[int], modes: Sequence[TimeMode] = (TimeMode.LONG,), counts: ProtocolCounts | None = None,
          params: BathParameters | None = None, seed: int = 0, workers: int | None = 1) -> SweepResult:
    """Protocol over every bath dimension, parallel over (d_E, model draw)."""
    d_E_values = list(d_E_values)
    if not d_E_values:
        raise ConfigError("empty range of bath dimensions")
    counts = counts or ProtocolCounts()
    params = params or BathParameters()
    modes = [TimeMode(m) for m in modes]

    tasks = [(params, d_E, modes, counts, seed, i) for d_E in d_E_values for i in range(counts.n_models)]
    logger.info("running %d trials over %d bath dimensions", len(tasks), len(d_E_values))
    trials = parallel_map(fig2_trial, tasks, workers)

    rows = []
    for d_E in d_E_values:
        cell = [t for t in trials if t.d_E == d_E]
        rows.extend(aggregate_trials(cell, modes))
        logger.info("d_E=%d done: d_eff=%.1f", d_E, rows[-1].d_eff_mean)
    return SweepResult(rows=_sort_rows(rows, modes))


def d_E_range(start: int, stop: int, step: int) -> list[int]:
    """Inclusive range of bath dimensions."""
    if step < 1 or start < 1 or stop < start:
        raise ConfigError(f"bad bath range {start}..{stop} step {step}")
    return list(range(start, stop + 1, step))


# --- post-processing ----------------------------------------------------------


def _window_mean(x: np.ndarray, width: int) -> np.ndarray:
    return np.convolve(x, np.ones(width) / width, mode="valid")


def moving_average(rows: Sequence[SweepRow], bin: int) -> list[SweepRow]:
    """Centred moving mean over rows ordered by effective dimension."""
    if bin < 1:
        raise ConfigError("moving-average bin must be at least 1")
    if bin > len(rows):
        raise BinTooLarge(f"bin of {bin} for {len(rows)} rows")
    rows = sorted(rows, key=lambda r: r.d_eff_mean)
    if bin == 1:
        return list(rows)

    def col(name):
        return np.array([getattr(r, name) for r in rows], dtype=float)

    d_eff = _window_mean(col("d_eff_mean"), bin)
    n_u = _window_mean(col("N_upsilon"), bin)
    n_o = _window_mean(col("N_omega"), bin)
    se_u = np.sqrt(_window_mean(col("N_upsilon_stderr") ** 2, bin) / bin)
    se_o = np.sqrt(_window_mean(col("N_omega_stderr") ** 2, bin) / bin)
    lo = col("d_eff_min")
    hi = col("d_eff_max")
    half = bin // 2

    out = []
    for i in range(len(rows) - bin + 1):
        window = rows[i:i + bin]
        out.append(SweepRow(
            d_E=window[half].d_E,
            mode=window[half].mode,
            d_eff_mean=float(d_eff[i]),
            d_eff_min=float(lo[i:i + bin].min()),
            d_eff_max=float(hi[i:i + bin].max()),
            N_upsilon=float(n_u[i]),
            N_upsilon_stderr=float(se_u[i]),
            N_omega=float(n_o[i]),
            N_omega_stderr=float(se_o[i]),
            n_trials=sum(r.n_trials for r in window),
        ))
    return out


def binned(result: SweepResult, bin: int) -> SweepResult:
    """Moving average applied separately to each mode."""
    rows = []
    for mode in dict.fromkeys(r.mode for r in result.rows):
        rows.extend(moving_average(result.for_mode(mode), bin))
    return SweepResult(rows=rows)


def spearman_trend(rows: Sequence[SweepRow], field: str = "N_upsilon") -> float:
    """Spearman rank correlation of ``field`` against mean effective dimension."""
    if len(rows) < 3:
        return float("nan")
    x = [r.d_eff_mean for r in rows]
    y = [getattr(r, field) for r in rows]
    return float(stats.spearmanr(x, y).correlation)


def plot_series(result: SweepResult, binned_rows: bool = False) -> list[PlotSeries]:
    """(x, y, err) series per mode for the driven and equilibrium processes."""
    series = []
    for mode in dict.fromkeys(r.mode for r in result.rows):
        rows = result.for_mode(mode)
        for name, value, err in (("N_upsilon", "N_upsilon", "N_upsilon_stderr"), ("N_omega", "N_omega", "N_omega_stderr")):
            series.append(PlotSeries(
                name=name,
                mode=mode,
                binned=binned_rows,
                points=[PlotPoint(x=r.d_eff_mean, y=getattr(r, value), err=getattr(r, err)) for r in rows],
            ))
    return series
