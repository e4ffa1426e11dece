"""Multitime processes on a system-environment pair.

A ``ProcessSpec`` fixes the Hamiltonian, the initial state and the free
intervals between interventions. It defines two processes: the one driven
by exp(-iH dt) between steps and its equilibrium counterpart where every
interval is replaced by the dephasing map.

Slot layout of a process tensor with k steps::

    rows:  (a_k, b_k, a_{k-1}, b_{k-1}, ..., a_1, b_1)
    cols:  (a'_k, b'_k, ..., a'_1, b'_1)

    step l instrument:  b_l --[A_l]--> a_l
                        (input leg)    (output leg)

The earliest step occupies the rightmost (least significant) factors, and
an instrument sequence enters as C_k (x) ... (x) C_1 of per-step Choi
matrices C[(a,b),(a',b')] = sum K[a,b] conj(K[a',b']). Contraction is the
elementwise sum of tensor times instrument, i.e. tr[T A^T].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Literal, Sequence, Union

import numpy as np

from ..errors import DimensionMismatch, TooLarge, TooManyTerms
from .channels import CPMap, Instrument, choi, identity_map
from .qmath import Operator, OperatorLike, SpectralDecomposition, State, as_array, spectral_decompose

logger = logging.getLogger(__name__)

MAX_TENSOR_DIM = 4096
MAX_DECOMPOSITION_STEPS = 4

Dephased = Literal["dephased"]
DEPHASED: Dephased = "dephased"


@dataclass(frozen=True)
class ProcessSpec:
    """Hamiltonian, initial state and intervention schedule of a process."""

    hamiltonian: SpectralDecomposition
    rho: Operator
    d_S: int
    d_E: int
    steps: int
    dts: Union[tuple[float, ...], Dephased] = DEPHASED

    def __post_init__(self):
        rho = self.rho.op if isinstance(self.rho, State) else self.rho
        if not isinstance(rho, Operator):
            rho = Operator(rho, (self.d_S, self.d_E))
        d = self.d_S * self.d_E
        if self.hamiltonian.dim != d or rho.dim != d:
            raise DimensionMismatch(
                f"d_S*d_E = {d} but Hamiltonian has {self.hamiltonian.dim} and state {rho.dim}"
            )
        if rho.dims != (self.d_S, self.d_E):
            rho = Operator(rho.data, (self.d_S, self.d_E))
        object.__setattr__(self, "rho", rho)
        if self.steps < 1:
            raise DimensionMismatch("a process needs at least one step")
        if not isinstance(self.dts, str):
            dts = tuple(float(t) for t in self.dts)
            if len(dts) != self.steps:
                raise DimensionMismatch(f"{len(dts)} intervals for {self.steps} steps")
            object.__setattr__(self, "dts", dts)

    @classmethod
    def from_hamiltonian(cls, h: OperatorLike, rho: OperatorLike, d_S: int, steps: int,
                         dts: Union[Sequence[float], Dephased] = DEPHASED, tol: float | None = None) -> ProcessSpec:
        h_arr = as_array(h)
        if h_arr.shape[0] % d_S:
            raise DimensionMismatch(f"dimension {h_arr.shape[0]} is not a multiple of d_S={d_S}")
        d_E = h_arr.shape[0] // d_S
        spec = spectral_decompose(Operator(h_arr, (d_S, d_E)), tol)
        dts = dts if isinstance(dts, str) else tuple(dts)
        return cls(spec, Operator(as_array(rho), (d_S, d_E)), d_S, d_E, steps, dts)

    @property
    def dim(self) -> int:
        return self.d_S * self.d_E

    @property
    def dephased(self) -> bool:
        return isinstance(self.dts, str)

    def with_dts(self, dts: Union[Sequence[float], Dephased]) -> ProcessSpec:
        return replace(self, dts=dts if isinstance(dts, str) else tuple(dts))

    def as_dephased(self) -> ProcessSpec:
        return replace(self, dts=DEPHASED)

    def with_steps(self, steps: int, dts: Union[Sequence[float], Dephased, None] = None) -> ProcessSpec:
        if dts is None:
            dts = DEPHASED if self.dephased else self.dts[:steps]
        return replace(self, steps=steps, dts=dts)

    def free(self, x: np.ndarray, step: int, equilibrium: bool = False) -> np.ndarray:
        """Free evolution before intervention ``step`` (0-based), batched over leading axes."""
        h = self.hamiltonian
        y = h.to_eigenbasis(x)
        if equilibrium or self.dephased:
            y = np.where(h.block_mask, y, 0.0)
        else:
            ph = h.phases(self.dts[step])
            y = y * np.outer(ph, ph.conj())
        return h.from_eigenbasis(y)


@dataclass(frozen=True)
class MultitimeInstrument:
    """One CP map per step, earliest first."""

    per_step: tuple[CPMap, ...]

    def __post_init__(self):
        per_step = tuple(self.per_step)
        if not per_step:
            raise DimensionMismatch("a multitime instrument needs at least one step")
        if len({m.dim for m in per_step}) != 1:
            raise DimensionMismatch("per-step maps act on different dimensions")
        object.__setattr__(self, "per_step", per_step)

    @property
    def steps(self) -> int:
        return len(self.per_step)

    @property
    def dim(self) -> int:
        return self.per_step[0].dim

    @classmethod
    def identity(cls, d_S: int, steps: int) -> MultitimeInstrument:
        return cls(tuple(identity_map(d_S) for _ in range(steps)))

    def padded(self, steps: int) -> MultitimeInstrument:
        """Extend with identity maps at later steps."""
        if steps < self.steps:
            raise DimensionMismatch(f"cannot pad a {self.steps}-step instrument to {steps} steps")
        return MultitimeInstrument(self.per_step + tuple(identity_map(self.dim) for _ in range(steps - self.steps)))


@dataclass(frozen=True)
class ProcessTensor:
    """Choi matrix of a k-step process, laid out as in the module docstring."""

    choi: Operator
    steps: int
    d_S: int
    normalization: float

    def contract(self, instr: MultitimeInstrument) -> complex:
        return contract(self, instr)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.choi.data + self.choi.data.conj().T)).min())


def _apply_kraus_batch(kraus: Sequence[np.ndarray], x: np.ndarray, d_S: int, d_E: int) -> np.ndarray:
    b = x.shape[0]
    x5 = x.reshape(b, d_S, d_E, d_S, d_E)
    out = np.zeros_like(x5)
    for k in kraus:
        out += np.einsum("ai,niejf,bj->naebf", k, x5, k.conj(), optimize=True)
    return out.reshape(b, d_S * d_E, d_S * d_E)


def _check_instrument(spec: ProcessSpec, instr: MultitimeInstrument) -> MultitimeInstrument:
    if instr.dim != spec.d_S:
        raise DimensionMismatch(f"instrument on dimension {instr.dim} for d_S={spec.d_S}")
    if instr.steps != spec.steps:
        raise DimensionMismatch(f"{instr.steps}-step instrument on a {spec.steps}-step process")
    return instr


def _expectation(spec: ProcessSpec, instr: MultitimeInstrument, equilibrium: bool) -> complex:
    _check_instrument(spec, instr)
    x = spec.rho.data[None]
    for step, cp in enumerate(instr.per_step):
        x = spec.free(x, step, equilibrium)
        x = _apply_kraus_batch(cp.kraus, x, spec.d_S, spec.d_E)
    return complex(np.trace(x[0]))


def expectation_direct(spec: ProcessSpec, instr: MultitimeInstrument) -> complex:
    """tr[A_k U_k ... A_1 U_1(rho)]; a dephased spec uses the dephasing map for every U."""
    return _expectation(spec, instr, equilibrium=False)


def expectation_equilibrium(spec: ProcessSpec, instr: MultitimeInstrument) -> complex:
    """tr[A_k $ ... A_1 $(rho)], independent of the intervals."""
    return _expectation(spec, instr, equilibrium=True)


def outcome_distribution(spec: ProcessSpec, instruments: Sequence[Instrument],
                         equilibrium: bool = False) -> np.ndarray:
    """Joint outcome probabilities of per-step instruments, shape (n_1, ..., n_m).

    Fewer instruments than steps leaves the later steps unmeasured.
    """
    if len(instruments) > spec.steps:
        raise DimensionMismatch(f"{len(instruments)} instruments on a {spec.steps}-step process")
    x = spec.rho.data[None]
    shape = []
    for step, inst in enumerate(instruments):
        if inst.dim != spec.d_S:
            raise DimensionMismatch(f"instrument on dimension {inst.dim} for d_S={spec.d_S}")
        x = spec.free(x, step, equilibrium)
        branches = [_apply_kraus_batch(o.kraus, x, spec.d_S, spec.d_E) for o in inst.outcomes]
        x = np.stack(branches, axis=1).reshape(-1, spec.dim, spec.dim)
        shape.append(len(inst))
    probs = np.real(np.einsum("nii->n", x))
    return probs.reshape(shape)


def correlation_direct(spec: ProcessSpec, ops: Sequence[OperatorLike]) -> complex:
    """<X_k(t_k) ... X_1(t_1)> as tr[X_k U_k ... X_1 U_1(rho)] with left multiplication."""
    if len(ops) != spec.steps:
        raise DimensionMismatch(f"{len(ops)} observables on a {spec.steps}-step process")
    x = spec.rho.data[None]
    eye_e = np.eye(spec.d_E)
    for step, op in enumerate(ops):
        op = as_array(op)
        if op.shape != (spec.d_S, spec.d_S):
            raise DimensionMismatch(f"observable of shape {op.shape} for d_S={spec.d_S}")
        x = spec.free(x, step)
        x = np.kron(op, eye_e) @ x
    return complex(np.trace(x[0]))


def _guard_tensor(d_S: int, steps: int) -> None:
    size = d_S ** (2 * steps)
    if size > MAX_TENSOR_DIM:
        logger.error("refusing a %d-dimensional process tensor (limit %d)", size, MAX_TENSOR_DIM)
        raise TooLarge(f"d_S^(2k) = {size} exceeds {MAX_TENSOR_DIM}")


def _build_tensor(spec: ProcessSpec, equilibrium: bool) -> ProcessTensor:
    d_S, d_E, k = spec.d_S, spec.d_E, spec.steps
    _guard_tensor(d_S, k)
    d = spec.dim

    # probe each step with X -> |a><b| X |b'><a'|; batch axes accumulate (a, b, a', b') per step
    x = spec.rho.data[None]
    for step in range(k - 1):
        x = spec.free(x, step, equilibrium)
        n = x.shape[0]
        x5 = x.reshape(n, d_S, d_E, d_S, d_E).transpose(0, 1, 3, 2, 4)
        y = np.zeros((n, d_S, d_S, d_S, d_S, d_S, d_E, d_S, d_E), dtype=complex)
        for a in range(d_S):
            for a2 in range(d_S):
                y[:, a, :, a2, :, a, :, a2, :] = x5
        x = y.reshape(n * d_S**4, d, d)

    x = spec.free(x, k - 1, equilibrium)
    n = x.shape[0]
    reduced = np.einsum("nbece->nbc", x.reshape(n, d_S, d_E, d_S, d_E))
    last = np.einsum("ac,nbd->nabcd", np.eye(d_S), reduced)

    t = last.reshape((d_S,) * (4 * k))
    rows, cols = [], []
    for step in reversed(range(k)):
        rows += [4 * step, 4 * step + 1]
        cols += [4 * step + 2, 4 * step + 3]
    size = d_S ** (2 * k)
    mat = t.transpose(rows + cols).reshape(size, size)
    return ProcessTensor(
        choi=Operator(mat, (d_S,) * (2 * k)),
        steps=k,
        d_S=d_S,
        normalization=float(np.real(spec.rho.trace())),
    )


def build_process_tensor(spec: ProcessSpec) -> ProcessTensor:
    """Choi matrix of the process with the intervals of ``spec``."""
    return _build_tensor(spec, equilibrium=False)


def build_equilibrium_tensor(spec: ProcessSpec) -> ProcessTensor:
    """Choi matrix of the process with every interval dephased."""
    return _build_tensor(spec, equilibrium=True)


def multitime_choi(instr: MultitimeInstrument) -> np.ndarray:
    """C_k (x) ... (x) C_1 of the per-step Choi matrices."""
    _guard_tensor(instr.dim, instr.steps)
    out = np.ones((1, 1), dtype=complex)
    for cp in reversed(instr.per_step):
        out = np.kron(out, choi(cp))
    return out


def contract(tensor: ProcessTensor, instr: MultitimeInstrument) -> complex:
    """tr[T A^T] for the instrument sequence A."""
    if instr.steps != tensor.steps or instr.dim != tensor.d_S:
        raise DimensionMismatch("instrument does not match the process tensor slots")
    return complex(np.sum(tensor.choi.data * multitime_choi(instr)))


def marginalize_last(tensor: ProcessTensor) -> ProcessTensor:
    """Contract the latest step with the identity instrument."""
    if tensor.steps < 2:
        raise DimensionMismatch("marginalizing needs at least two steps")
    d_S = tensor.d_S
    rest = d_S ** (2 * (tensor.steps - 1))
    t = tensor.choi.data.reshape(d_S, d_S, rest, d_S, d_S, rest)
    mat = np.einsum("aarbbs->rs", t)
    return ProcessTensor(
        choi=Operator(mat, (d_S,) * (2 * (tensor.steps - 1))),
        steps=tensor.steps - 1,
        d_S=d_S,
        normalization=tensor.normalization,
    )


def decompose_observable(ops: Sequence[OperatorLike]) -> list[tuple[complex, MultitimeInstrument]]:
    """Write the left-multiplication chain X_k(.) ... X_1(.) as a combination of CP instruments.

    Each step uses the polarization
        X Y = 1/4 sum_m i^m (X + i^m I) Y (X + i^m I)^dagger,   m = 0..3,
    with every Kraus operator rescaled to spectral norm one and the norm
    folded into the weight. A multiple of the identity is kept as a single
    identity term.
    """
    ops = [as_array(op) for op in ops]
    if not ops:
        raise DimensionMismatch("no observables to decompose")
    n_terms = 1
    per_step: list[list[tuple[complex, CPMap]]] = []
    for x in ops:
        d = x.shape[0]
        eye = np.eye(d, dtype=complex)
        c = np.trace(x) / d
        if np.abs(x - c * eye).max() <= 1e-12:
            per_step.append([(complex(c), identity_map(d))])
            continue
        terms = []
        for m in range(4):
            phase = 1j**m
            k = x + phase * eye
            norm = float(np.linalg.norm(k, 2))
            if norm <= 1e-15:
                continue
            terms.append((phase * norm**2 / 4.0, CPMap((k / norm,), label=f"polar{m}")))
        per_step.append(terms)
        n_terms *= len(terms)
        if n_terms > 4**MAX_DECOMPOSITION_STEPS:
            raise TooManyTerms(f"decomposition needs at least {n_terms} terms (limit {4**MAX_DECOMPOSITION_STEPS})")

    out = [(1.0 + 0j, ())]
    for terms in per_step:
        out = [(w * wt, maps + (cp,)) for w, maps in out for wt, cp in terms]
    return [(w, MultitimeInstrument(maps)) for w, maps in out]


def link_product_demo(mu: Operator, nu: Operator, pi: Operator,
                      x: OperatorLike, y: OperatorLike, z: OperatorLike) -> tuple[complex, complex]:
    """Both sides of tr[mu x nu y pi z] = tr[Xi R], with x, y, z acting on F of F (x) G.

    Xi is the link product of mu, nu, pi over the G legs and R the
    correspondingly reordered product of x, y, z.
    """
    for op in (mu, nu, pi):
        if len(op.dims) != 2 or op.dims != mu.dims:
            raise DimensionMismatch("mu, nu, pi must share two-factor dims (F, G)")
    d_f, d_g = mu.dims
    xs = [as_array(o) for o in (x, y, z)]
    if any(o.shape != (d_f, d_f) for o in xs):
        raise DimensionMismatch(f"x, y, z must act on the {d_f}-dimensional factor")
    x, y, z = xs
    eye_g = np.eye(d_g)

    lhs = np.trace(mu.data @ np.kron(x, eye_g) @ nu.data @ np.kron(y, eye_g) @ pi.data @ np.kron(z, eye_g))

    m = mu.data.reshape(d_f, d_g, d_f, d_g)
    n = nu.data.reshape(d_f, d_g, d_f, d_g)
    p = pi.data.reshape(d_f, d_g, d_f, d_g)
    xi = np.einsum("aAbB,cBdC,eCfA->acebdf", m, n, p, optimize=True)
    r = np.einsum("bc,de,fa->bdface", x, y, z)
    dim = d_f**3
    rhs = np.trace(xi.reshape(dim, dim) @ r.reshape(dim, dim))
    return complex(lhs), complex(rhs)
