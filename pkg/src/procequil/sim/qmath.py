"""Dense operator algebra with subsystem structure.

Operators are immutable wrappers around complex numpy matrices together
with the ordered list of tensor-factor dimensions (system first).
Validity checks are explicit calls; construction only checks shape, so
post-selected and otherwise unnormalized objects are representable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.linalg

from ..errors import (
    BadFactorIndex,
    DecompositionFailed,
    DimensionMismatch,
    InvalidState,
    NotHermitian,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-9
STATE_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _frozen(data) -> np.ndarray:
    arr = np.array(data, dtype=complex, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Operator:
    """Square complex matrix acting on a tensor product of factors."""

    data: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {data.shape}")
        dims = tuple(int(d) for d in self.dims) or (data.shape[0],)
        if int(np.prod(dims)) != data.shape[0]:
            raise DimensionMismatch(f"factor dims {dims} do not multiply to {data.shape[0]}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def dag(self) -> Operator:
        return Operator(self.data.conj().T, self.dims)

    def kron(self, other: Operator) -> Operator:
        return Operator(np.kron(self.data, other.data), self.dims + other.dims)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.abs(self.data - self.data.conj().T).max(initial=0.0) <= tol)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    def purity(self) -> float:
        return float(np.real(np.vdot(self.data.conj().T, self.data)))

    def __add__(self, other: Operator) -> Operator:
        _check_same_shape(self, other)
        return Operator(self.data + other.data, self.dims)

    def __sub__(self, other: Operator) -> Operator:
        _check_same_shape(self, other)
        return Operator(self.data - other.data, self.dims)

    def __mul__(self, scalar: complex) -> Operator:
        return Operator(scalar * self.data, self.dims)

    __rmul__ = __mul__

    def __matmul__(self, other: Operator) -> Operator:
        _check_same_shape(self, other)
        return Operator(self.data @ other.data, self.dims)


OperatorLike = Union[Operator, np.ndarray]


def _check_same_shape(a: Operator, b: Operator) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionMismatch(f"shapes {a.data.shape} and {b.data.shape} differ")


def as_array(op: OperatorLike) -> np.ndarray:
    if isinstance(op, Operator):
        return op.data
    return np.asarray(op, dtype=complex)


def as_operator(op: OperatorLike, dims: Sequence[int] | None = None) -> Operator:
    if isinstance(op, Operator):
        return op
    return Operator(op, tuple(dims or ()))


def identity(dims: Sequence[int]) -> Operator:
    return Operator(np.eye(int(np.prod(dims)), dtype=complex), tuple(dims))


def kron(*ops: Operator) -> Operator:
    out = ops[0]
    for op in ops[1:]:
        out = out.kron(op)
    return out


@dataclass(frozen=True)
class State:
    """A validated density matrix."""

    op: Operator
    purity: float

    @classmethod
    def from_operator(cls, op: OperatorLike, dims: Sequence[int] | None = None, tol: float = STATE_TOL) -> State:
        op = as_operator(op, dims)
        check_state(op, tol)
        return cls(op=op, purity=op.purity())

    @classmethod
    def pure(cls, psi: np.ndarray, dims: Sequence[int] | None = None) -> State:
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls.from_operator(np.outer(psi, psi.conj()), dims)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.op.dims

    @property
    def data(self) -> np.ndarray:
        return self.op.data


def check_state(op: Operator, tol: float = STATE_TOL) -> None:
    """Raise unless ``op`` is a density matrix within ``tol``."""
    if not op.is_finite():
        raise InvalidState("state contains NaN or Inf entries")
    if not op.is_hermitian(tol):
        raise NotHermitian("density matrix is not Hermitian")
    tr = op.trace()
    if abs(tr - 1.0) > tol:
        raise InvalidState(f"trace {tr.real:.12g} differs from 1")
    lowest = scipy.linalg.eigvalsh(op.data).min()
    if lowest < -tol:
        raise InvalidState(f"negative eigenvalue {lowest:.3e}")


def is_state(op: Operator, tol: float = STATE_TOL) -> bool:
    try:
        check_state(op, tol)
    except (InvalidState, NotHermitian):
        return False
    return True


@dataclass(frozen=True)
class SpectralDecomposition:
    """Energies and spectral projectors of a Hamiltonian, H = sum_n E_n P_n.

    The projectors are stored implicitly through the orthonormal eigenbasis
    and a level label per eigenvector; ``projectors`` materializes them on
    demand. Dephasing and evolution work in the eigenbasis.
    """

    energies: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    labels: np.ndarray
    degeneracy_tolerance: float
    dims: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def is_degenerate(self) -> bool:
        return self.n_levels < self.dim

    @cached_property
    def block_mask(self) -> np.ndarray:
        """Boolean mask of eigenbasis matrix elements kept by dephasing."""
        return self.labels[:, None] == self.labels[None, :]

    def projector(self, n: int) -> Operator:
        cols = self.eigenvectors[:, self.labels == n]
        return Operator(cols @ cols.conj().T, self.dims)

    @property
    def projectors(self) -> tuple[Operator, ...]:
        return tuple(self.projector(n) for n in range(self.n_levels))

    def to_eigenbasis(self, a: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return v.conj().T @ a @ v

    def from_eigenbasis(self, a: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return v @ a @ v.conj().T

    def phases(self, dt: float) -> np.ndarray:
        return np.exp(-1j * self.eigenvalues * dt)

    def unitary(self, dt: float) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.phases(dt)) @ v.conj().T

    def reconstruct(self) -> Operator:
        v = self.eigenvectors
        return Operator((v * self.eigenvalues) @ v.conj().T, self.dims)

    def gaps(self) -> np.ndarray:
        """Positive gaps E_m - E_n (m > n) between distinct levels."""
        e = self.energies
        i, j = np.triu_indices(len(e), k=1)
        return e[j] - e[i]

    def min_gap(self) -> float:
        gaps = self.gaps()
        if gaps.size == 0:
            return 0.0
        return float(gaps.min())


def spectral_decompose(h: OperatorLike, tol: float | None = None) -> SpectralDecomposition:
    """Diagonalize a Hermitian operator, merging eigenvalues closer than ``tol``.

    The default merge tolerance is 1e-9 times the largest |E|.
    """
    h = as_operator(h)
    scale = max(1.0, float(np.abs(h.data).max(initial=0.0)))
    if not h.is_hermitian(HERMITIAN_TOL * scale):
        raise NotHermitian("Hamiltonian is not Hermitian")
    herm = 0.5 * (h.data + h.data.conj().T)
    try:
        w, v = scipy.linalg.eigh(herm)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise DecompositionFailed(str(exc)) from exc

    if tol is None:
        tol = 1e-9 * float(np.abs(w).max(initial=0.0))

    labels = np.zeros(len(w), dtype=int)
    for i in range(1, len(w)):
        labels[i] = labels[i - 1] + (1 if w[i] - w[i - 1] > tol else 0)
    n_levels = labels[-1] + 1 if len(w) else 0
    energies = np.array([w[labels == n].mean() for n in range(n_levels)])
    eigenvalues = energies[labels]

    return SpectralDecomposition(
        energies=energies,
        eigenvalues=eigenvalues,
        eigenvectors=v,
        labels=labels,
        degeneracy_tolerance=float(tol),
        dims=h.dims,
    )


def near_resonances(spec: SpectralDecomposition, gap_tol: float) -> list[tuple[float, tuple[int, int], tuple[int, int]]]:
    """Pairs of distinct level pairs whose nonzero gaps agree within ``gap_tol``."""
    e = spec.energies
    i, j = np.triu_indices(len(e), k=1)
    gaps = e[j] - e[i]
    order = np.argsort(gaps, kind="stable")
    sorted_gaps = gaps[order]
    hits = np.nonzero(np.diff(sorted_gaps) <= gap_tol)[0]
    found = []
    for h in hits:
        a, b = order[h], order[h + 1]
        found.append((float(sorted_gaps[h]), (int(j[a]), int(i[a])), (int(j[b]), int(i[b]))))
    if found:
        logger.warning("found %d near-resonant gap pairs (gap_tol=%g)", len(found), gap_tol)
    return found


def check_nonresonance(spec: SpectralDecomposition, gap_tol: float = 1e-10) -> bool:
    """True iff all nonzero gaps E_m - E_n are pairwise distinct within ``gap_tol``."""
    return not near_resonances(spec, gap_tol)


def partial_trace(a: OperatorLike, keep: Union[int, Iterable[int]]) -> Operator:
    """Trace out every factor not listed in ``keep``."""
    a = as_operator(a)
    dims = list(a.dims)
    n = len(dims)
    if n < 2:
        raise BadFactorIndex("partial trace needs at least two factors")
    keep = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if not keep or any(k < 0 or k >= n for k in keep):
        raise BadFactorIndex(f"factor index {keep} out of range for {n} factors")

    rows = list(range(n))
    cols = list(range(n, 2 * n))
    for f in range(n):
        if f not in keep:
            cols[f] = rows[f]
    out = [rows[f] for f in keep] + [cols[f] for f in keep]
    kept_dims = [dims[f] for f in keep]
    d_out = int(np.prod(kept_dims))
    reduced = np.einsum(a.data.reshape(dims + dims), rows + cols, out)
    return Operator(reduced.reshape(d_out, d_out), tuple(kept_dims))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    """Random Hermitian matrix with complex Gaussian entries."""
    a = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    return Operator(0.5 * scale * (a + a.conj().T))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None,
                          dims: Sequence[int] | None = None) -> Operator:
    """Wishart-distributed density matrix of the given rank (full rank by default)."""
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return Operator(rho / np.trace(rho).real, tuple(dims or ()))
