import numpy as np
import pytest
import scipy.linalg

from procequil.errors import BadFactorIndex, DimensionMismatch, InvalidState, NotHermitian
from procequil.sim.qmath import (
    SIGMA_X,
    SIGMA_Z,
    Operator,
    State,
    check_nonresonance,
    check_state,
    is_state,
    near_resonances,
    partial_trace,
    random_density_matrix,
    random_hermitian,
    spectral_decompose,
)


def test_operator_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        Operator(np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        Operator(np.eye(4), (2, 3))
    assert Operator(np.eye(6), (2, 3)).dims == (2, 3)
    assert Operator(np.eye(3)).dims == (3,)


def test_operator_is_immutable():
    op = Operator(np.eye(2))
    with pytest.raises(ValueError):
        op.data[0, 0] = 5.0


@pytest.mark.parametrize("d_a,d_b", [(2, 2), (2, 3), (3, 2)])
def test_partial_trace_of_product(rng, d_a, d_b):
    a = random_density_matrix(d_a, rng).data
    b = random_density_matrix(d_b, rng).data
    ab = Operator(np.kron(a, b), (d_a, d_b))
    assert np.allclose(partial_trace(ab, 0).data, a)
    assert np.allclose(partial_trace(ab, 1).data, b)
    assert np.allclose(partial_trace(ab, [0, 1]).data, ab.data)


def test_partial_trace_three_factors(rng):
    ops = [random_density_matrix(d, rng).data for d in (2, 3, 2)]
    abc = Operator(np.kron(np.kron(ops[0], ops[1]), ops[2]), (2, 3, 2))
    assert np.allclose(partial_trace(abc, [0, 2]).data, np.kron(ops[0], ops[2]))
    assert partial_trace(abc, [0, 2]).dims == (2, 2)


def test_partial_trace_bad_index():
    with pytest.raises(BadFactorIndex):
        partial_trace(Operator(np.eye(4), (2, 2)), 2)
    with pytest.raises(BadFactorIndex):
        partial_trace(Operator(np.eye(4)), 0)


def test_spectral_decompose_reconstructs(rng):
    h = random_hermitian(6, rng)
    spec = spectral_decompose(h)
    assert np.allclose(spec.reconstruct().data, h.data)
    assert spec.n_levels == 6
    assert not spec.is_degenerate
    assert np.allclose(sum(p.data for p in spec.projectors), np.eye(6))


def test_spectral_decompose_merges_degenerate_levels():
    spec = spectral_decompose(np.diag([0.0, 0.0, 1.0, 3.0]))
    assert spec.n_levels == 3
    assert spec.is_degenerate
    assert np.allclose(spec.energies, [0.0, 1.0, 3.0])
    assert np.allclose(spec.projector(0).data, np.diag([1, 1, 0, 0]))
    assert spec.min_gap() == pytest.approx(1.0)


def test_spectral_decompose_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        spectral_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_unitary_matches_expm(rng):
    h = random_hermitian(4, rng)
    spec = spectral_decompose(h)
    assert np.allclose(spec.unitary(0.7), scipy.linalg.expm(-0.7j * h.data))


def test_nonresonance():
    assert check_nonresonance(spectral_decompose(np.diag([0.0, 1.0, 3.0])))
    resonant = spectral_decompose(np.diag([0.0, 1.0, 2.0]))
    assert not check_nonresonance(resonant)
    hits = near_resonances(resonant, 1e-10)
    assert hits and hits[0][0] == pytest.approx(1.0)


def test_nonresonance_single_level():
    assert check_nonresonance(spectral_decompose(np.eye(3)))


def test_state_checks():
    assert is_state(Operator(np.eye(2) / 2))
    with pytest.raises(InvalidState):
        check_state(Operator(np.eye(2)))
    with pytest.raises(InvalidState):
        check_state(Operator(np.diag([1.5, -0.5])))
    with pytest.raises(NotHermitian):
        check_state(Operator(np.array([[0.5, 0.5], [0.0, 0.5]])))
    with pytest.raises(InvalidState):
        check_state(Operator(np.array([[np.nan, 0], [0, 1]])))


def test_pure_state_purity(rng):
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    state = State.pure(psi, (2, 2))
    assert state.purity == pytest.approx(1.0)
    assert state.dims == (2, 2)


@pytest.mark.parametrize("rank", [1, 2, 4])
def test_random_density_matrix(rng, rank):
    rho = random_density_matrix(4, rng, rank=rank)
    assert is_state(rho)
    assert np.linalg.matrix_rank(rho.data, tol=1e-10) == rank


def test_operator_algebra():
    x, z = Operator(SIGMA_X), Operator(SIGMA_Z)
    assert np.allclose((x @ z + z @ x).data, 0)
    assert np.allclose((2 * x - x).data, SIGMA_X)
    assert x.kron(z).dims == (2, 2)
    assert x.purity() == pytest.approx(2.0)
