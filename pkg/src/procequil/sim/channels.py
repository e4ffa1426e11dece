"""CP maps and instruments acting on the system factor.

Kraus operators are plain square numpy arrays of size d_S. Maps act on the
leftmost tensor factor of an operator (the system), i.e. K acts as K (x) I_E.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import BadFactorIndex, DimensionMismatch, NotHermitian
from .qmath import HERMITIAN_TOL, Operator, OperatorLike, SpectralDecomposition, as_array, as_operator

logger = logging.getLogger(__name__)

KRAUS_CUTOFF = 1e-12
TP_TOL = 1e-9


@dataclass(frozen=True)
class CPMap:
    """Completely positive map in Kraus form."""

    kraus: tuple[np.ndarray, ...]
    label: str = ""
    trace_preserving: bool = False

    def __post_init__(self):
        mats = []
        for k in self.kraus:
            k = np.array(as_array(k), dtype=complex, copy=True)
            if k.ndim != 2 or k.shape[0] != k.shape[1]:
                raise DimensionMismatch(f"Kraus operators must be square, got {k.shape}")
            k.flags.writeable = False
            mats.append(k)
        if not mats:
            raise DimensionMismatch("a CP map needs at least one Kraus operator")
        if len({m.shape for m in mats}) != 1:
            raise DimensionMismatch("Kraus operators have inconsistent shapes")
        object.__setattr__(self, "kraus", tuple(mats))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    def is_trace_nonincreasing(self, tol: float = TP_TOL) -> bool:
        return povm_norm(povm_element(self)) <= 1.0 + tol

    def is_trace_preserving(self, tol: float = TP_TOL) -> bool:
        e = povm_element(self).data
        return bool(np.abs(e - np.eye(self.dim)).max() <= tol)


@dataclass(frozen=True)
class Instrument:
    """A set of CP outcomes; complete when they sum to a channel."""

    outcomes: tuple[CPMap, ...]
    complete: bool = True
    label: str = ""

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        if not outcomes:
            raise DimensionMismatch("an instrument needs at least one outcome")
        if len({o.dim for o in outcomes}) != 1:
            raise DimensionMismatch("instrument outcomes act on different dimensions")
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def dim(self) -> int:
        return self.outcomes[0].dim

    def __len__(self) -> int:
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    def sum_map(self) -> CPMap:
        kraus = tuple(k for o in self.outcomes for k in o.kraus)
        return CPMap(kraus, label=f"sum({self.label})", trace_preserving=self.complete)

    def check_complete(self, tol: float = TP_TOL) -> bool:
        return self.sum_map().is_trace_preserving(tol)


def identity_map(d: int) -> CPMap:
    return CPMap((np.eye(d, dtype=complex),), label="identity", trace_preserving=True)


def unitary_superop(spec: SpectralDecomposition, dt: float) -> CPMap:
    """Conjugation by exp(-i H dt), built from the spectral data."""
    return CPMap((spec.unitary(dt),), label=f"U({dt:g})", trace_preserving=True)


def dephase(spec: SpectralDecomposition, a: OperatorLike) -> Operator:
    """sum_n P_n A P_n, evaluated as a block mask in the eigenbasis."""
    arr = as_array(a)
    if arr.shape != (spec.dim, spec.dim):
        raise DimensionMismatch(f"operator of shape {arr.shape} vs Hamiltonian dimension {spec.dim}")
    dims = a.dims if isinstance(a, Operator) else spec.dims
    blocks = np.where(spec.block_mask, spec.to_eigenbasis(arr), 0.0)
    return Operator(spec.from_eigenbasis(blocks), dims)


def _target_dims(a: Operator, embed_on) -> tuple[int, int]:
    if embed_on is None or embed_on == "whole":
        return a.dim, 1
    if embed_on != 0:
        raise BadFactorIndex("instruments act on the system factor (index 0) only")
    d_s = a.dims[0]
    return d_s, a.dim // d_s


def apply_cp(cp: CPMap, a: OperatorLike, embed_on=0) -> Operator:
    """sum_b (K_b (x) I) A (K_b (x) I)^dagger with K acting on ``embed_on``."""
    a = as_operator(a)
    d_s, d_e = _target_dims(a, embed_on)
    if cp.dim != d_s:
        raise DimensionMismatch(f"map on dimension {cp.dim} applied to factor of dimension {d_s}")
    x = a.data.reshape(d_s, d_e, d_s, d_e)
    out = np.zeros_like(x)
    for k in cp.kraus:
        out += np.einsum("ai,iejf,bj->aebf", k, x, k.conj(), optimize=True)
    return Operator(out.reshape(a.dim, a.dim), a.dims)


def apply_adjoint(cp: CPMap, a: OperatorLike, embed_on=0) -> Operator:
    """Heisenberg-picture action sum_b K_b^dagger A K_b."""
    a = as_operator(a)
    d_s, d_e = _target_dims(a, embed_on)
    if cp.dim != d_s:
        raise DimensionMismatch(f"map on dimension {cp.dim} applied to factor of dimension {d_s}")
    x = a.data.reshape(d_s, d_e, d_s, d_e)
    out = np.zeros_like(x)
    for k in cp.kraus:
        out += np.einsum("ia,iejf,jb->aebf", k.conj(), x, k, optimize=True)
    return Operator(out.reshape(a.dim, a.dim), a.dims)


def povm_element(cp: CPMap) -> Operator:
    """The effect sum_b K_b^dagger K_b."""
    return Operator(sum(k.conj().T @ k for k in cp.kraus))


def povm_norm(a: OperatorLike) -> float:
    """Largest eigenvalue of a Hermitian PSD effect."""
    a = as_operator(a)
    scale = max(1.0, float(np.abs(a.data).max(initial=0.0)))
    if not a.is_hermitian(HERMITIAN_TOL * scale):
        raise NotHermitian("POVM element is not Hermitian")
    return float(scipy.linalg.eigvalsh(a.data).max())


def transfer_matrix(cp: CPMap) -> np.ndarray:
    """sum_a K_a (x) conj(K_a)."""
    return sum(np.kron(k, k.conj()) for k in cp.kraus)


def schatten_channel_norm(cp: CPMap) -> float:
    """Largest singular value of the transfer matrix."""
    return float(scipy.linalg.svdvals(transfer_matrix(cp))[0])


def choi(cp: CPMap) -> np.ndarray:
    """Choi matrix with output index first: C[(o,i),(o',i')] = sum K[o,i] conj(K[o',i'])."""
    vecs = np.stack([k.reshape(-1) for k in cp.kraus])
    return vecs.T @ vecs.conj()


def canonical_kraus(cp: CPMap, cutoff: float = KRAUS_CUTOFF) -> CPMap:
    """Minimal orthogonal Kraus set from the Choi eigendecomposition."""
    w, v = scipy.linalg.eigh(choi(cp))
    d = cp.dim
    kraus = tuple(np.sqrt(w[n]) * v[:, n].reshape(d, d) for n in range(len(w)) if w[n] > cutoff)
    if not kraus:
        kraus = (np.zeros((d, d), dtype=complex),)
    return CPMap(kraus, label=cp.label, trace_preserving=cp.trace_preserving)


def kraus_rank(cp: CPMap, cutoff: float = KRAUS_CUTOFF) -> int:
    w = scipy.linalg.eigvalsh(choi(cp))
    return int(np.count_nonzero(w > cutoff))


def compose(after: CPMap, before: CPMap) -> CPMap:
    """The map ``after`` applied to the output of ``before``."""
    if after.dim != before.dim:
        raise DimensionMismatch("composed maps act on different dimensions")
    kraus = tuple(a @ b for a in after.kraus for b in before.kraus)
    return CPMap(kraus, label=f"{after.label}*{before.label}",
                 trace_preserving=after.trace_preserving and before.trace_preserving)


def random_rank1_instrument(rng_seed, d_s: int) -> CPMap:
    """Single Kraus operator with uniform complex entries, scaled to spectral norm one."""
    if d_s < 2:
        raise DimensionMismatch("random instruments need d_S >= 2")
    rng = np.random.default_rng(rng_seed)
    k = rng.uniform(-1.0, 1.0, size=(d_s, d_s)) + 1j * rng.uniform(-1.0, 1.0, size=(d_s, d_s))
    k /= scipy.linalg.svdvals(k)[0]
    return CPMap((k,), label="random-rank1")


def projective_instrument(basis: np.ndarray | None = None, d: int | None = None) -> Instrument:
    """One rank-1 projector outcome per column of ``basis`` (computational basis by default)."""
    if basis is None:
        basis = np.eye(d, dtype=complex)
    basis = np.asarray(basis, dtype=complex)
    outcomes = tuple(
        CPMap((np.outer(basis[:, n], basis[:, n].conj()),), label=f"P{n}") for n in range(basis.shape[1])
    )
    return Instrument(outcomes, complete=True, label="projective")


def random_projective_instrument(rng: np.random.Generator, d: int) -> Instrument:
    """Projective measurement in a Haar-random basis."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = scipy.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return projective_instrument(q)


def replace_map(state: OperatorLike) -> CPMap:
    """Measure-and-reprepare channel X -> tr(X) sigma."""
    sigma = as_array(state)
    d = sigma.shape[0]
    w, v = scipy.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    kraus = []
    for n in range(d):
        if w[n] <= KRAUS_CUTOFF:
            continue
        for j in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[:, j] = np.sqrt(w[n]) * v[:, n]
            kraus.append(k)
    return CPMap(tuple(kraus), label="replace", trace_preserving=True)


def replace_with_ground(d: int) -> CPMap:
    """Channel sending every input to |0><0|."""
    ground = np.zeros((d, d), dtype=complex)
    ground[0, 0] = 1.0
    return replace_map(ground)


def depolarizing_map(d: int, p: float) -> CPMap:
    """X -> (1-p) X + p tr(X) I/d, in the Weyl (shift-clock) Kraus basis."""
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    kraus = []
    for a in range(d):
        for b in range(d):
            w = np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            weight = 1.0 - p + p / d**2 if a == b == 0 else p / d**2
            kraus.append(np.sqrt(weight) * w)
    return CPMap(tuple(kraus), label=f"depolarize({p:g})", trace_preserving=True)
