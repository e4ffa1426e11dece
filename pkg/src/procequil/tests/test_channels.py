import numpy as np
import pytest

from procequil.errors import BadFactorIndex, DimensionMismatch, NotHermitian
from procequil.sim.channels import (
    CPMap,
    Instrument,
    apply_adjoint,
    apply_cp,
    canonical_kraus,
    choi,
    compose,
    dephase,
    depolarizing_map,
    identity_map,
    kraus_rank,
    povm_element,
    povm_norm,
    projective_instrument,
    random_projective_instrument,
    random_rank1_instrument,
    replace_map,
    replace_with_ground,
    schatten_channel_norm,
    unitary_superop,
)
from procequil.sim.qmath import SIGMA_X, SIGMA_Z, Operator, random_density_matrix, random_hermitian, spectral_decompose


def _random_operator(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def test_dephase_is_a_projection(rng):
    spec = spectral_decompose(random_hermitian(6, rng))
    a = _random_operator(rng, 6)
    once = dephase(spec, a)
    assert np.allclose(dephase(spec, once).data, once.data)
    assert np.trace(once.data) == pytest.approx(np.trace(a))
    h = spec.reconstruct().data
    assert np.allclose(h @ once.data, once.data @ h)


def test_dephase_is_self_adjoint(rng):
    spec = spectral_decompose(random_hermitian(4, rng))
    a, b = _random_operator(rng, 4), _random_operator(rng, 4)
    lhs = np.trace(b @ dephase(spec, a).data)
    rhs = np.trace(dephase(spec, b).data @ a)
    assert lhs == pytest.approx(rhs)


def test_dephase_matches_projector_sum():
    spec = spectral_decompose(np.diag([0.0, 0.0, 1.0]))
    a = np.arange(9, dtype=complex).reshape(3, 3)
    expected = sum(p.data @ a @ p.data for p in spec.projectors)
    assert np.allclose(dephase(spec, a).data, expected)


def test_dephase_dimension_mismatch(rng):
    spec = spectral_decompose(random_hermitian(4, rng))
    with pytest.raises(DimensionMismatch):
        dephase(spec, np.eye(3))


def test_apply_cp_matches_kron(rng):
    k = _random_operator(rng, 2)
    cp = CPMap((k,))
    x = Operator(random_density_matrix(6, rng).data, (2, 3))
    big = np.kron(k, np.eye(3))
    assert np.allclose(apply_cp(cp, x).data, big @ x.data @ big.conj().T)
    assert np.allclose(apply_adjoint(cp, x).data, big.conj().T @ x.data @ big)


def test_apply_cp_whole_space(rng):
    k = _random_operator(rng, 4)
    x = random_density_matrix(4, rng)
    out = apply_cp(CPMap((k,)), x, embed_on="whole")
    assert np.allclose(out.data, k @ x.data @ k.conj().T)


def test_apply_cp_bad_factor(rng):
    x = Operator(np.eye(4), (2, 2))
    with pytest.raises(BadFactorIndex):
        apply_cp(identity_map(2), x, embed_on=1)
    with pytest.raises(DimensionMismatch):
        apply_cp(identity_map(3), x)


def test_adjoint_duality(rng):
    cp = random_rank1_instrument(rng, 2)
    a = Operator(_random_operator(rng, 4), (2, 2))
    b = Operator(_random_operator(rng, 4), (2, 2))
    lhs = np.trace(b.data @ apply_cp(cp, a).data)
    rhs = np.trace(apply_adjoint(cp, b).data @ a.data)
    assert lhs == pytest.approx(rhs)


def test_random_rank1_instrument_is_normalized():
    cp = random_rank1_instrument(5, 3)
    assert cp.n_kraus == 1
    assert povm_norm(povm_element(cp)) == pytest.approx(1.0)
    assert cp.is_trace_nonincreasing()
    assert np.allclose(random_rank1_instrument(5, 3).kraus[0], cp.kraus[0])


def test_random_rank1_instrument_needs_two_levels():
    with pytest.raises(DimensionMismatch):
        random_rank1_instrument(0, 1)


def test_povm_norm_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        povm_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_schatten_channel_norms():
    assert schatten_channel_norm(identity_map(2)) == pytest.approx(1.0)
    spec = spectral_decompose(SIGMA_X)
    assert schatten_channel_norm(unitary_superop(spec, 0.3)) == pytest.approx(1.0)
    assert schatten_channel_norm(replace_with_ground(2)) == pytest.approx(np.sqrt(2.0))


def test_choi_of_identity():
    c = choi(identity_map(3))
    assert np.trace(c) == pytest.approx(3.0)
    assert np.linalg.matrix_rank(c) == 1


@pytest.mark.parametrize("cp,rank", [
    (identity_map(2), 1),
    (replace_with_ground(2), 2),
    (depolarizing_map(2, 1.0), 4),
])
def test_kraus_rank(cp, rank):
    assert kraus_rank(cp) == rank


def test_canonical_kraus_preserves_action(rng):
    # redundant Kraus set: two copies of the same operator
    k = _random_operator(rng, 2) / 3
    cp = CPMap((k, k))
    canon = canonical_kraus(cp)
    assert canon.n_kraus == 1
    x = Operator(random_density_matrix(4, rng).data, (2, 2))
    assert np.allclose(apply_cp(canon, x).data, apply_cp(cp, x).data)


def test_compose(rng):
    a, b = random_rank1_instrument(rng, 2), depolarizing_map(2, 0.3)
    x = Operator(random_density_matrix(4, rng).data, (2, 2))
    assert np.allclose(apply_cp(compose(a, b), x).data, apply_cp(a, apply_cp(b, x)).data)
    with pytest.raises(DimensionMismatch):
        compose(identity_map(2), identity_map(3))


@pytest.mark.parametrize("p", [0.0, 0.4, 1.0])
def test_depolarizing_action(rng, p):
    cp = depolarizing_map(3, p)
    x = random_density_matrix(3, rng)
    expected = (1 - p) * x.data + p * np.eye(3) / 3
    assert np.allclose(apply_cp(cp, x, embed_on="whole").data, expected)
    assert cp.is_trace_preserving()


def test_replace_map(rng):
    sigma = random_density_matrix(2, rng)
    cp = replace_map(sigma)
    x = Operator(random_density_matrix(6, rng).data, (2, 3))
    out = apply_cp(cp, x)
    reduced_e = np.einsum("iejf,ij->ef", x.data.reshape(2, 3, 2, 3), np.eye(2))
    assert np.allclose(out.data, np.kron(sigma.data, reduced_e))
    assert cp.is_trace_preserving()


def test_projective_instruments_are_complete(rng):
    assert projective_instrument(d=3).check_complete()
    inst = random_projective_instrument(rng, 2)
    assert len(inst) == 2
    assert inst.check_complete()
    assert not Instrument((identity_map(2), identity_map(2))).check_complete()


def test_dephase_ignores_free_evolution(rng):
    spec = spectral_decompose(random_hermitian(6, rng))
    rho = random_density_matrix(6, rng).data
    for dt in (0.3, 2.0, 17.5):
        u = spec.unitary(dt)
        assert np.allclose(dephase(spec, u @ rho @ u.conj().T).data, dephase(spec, rho).data, atol=1e-9)


def test_unitary_superop_preserves_purity(rng):
    spec = spectral_decompose(random_hermitian(6, rng))
    rho = Operator(random_density_matrix(6, rng, rank=2).data)
    cp = unitary_superop(spec, rng.uniform(0.0, 10.0))
    k = cp.kraus[0]
    assert np.allclose(k.conj().T @ k, np.eye(6), atol=1e-9)
    assert apply_cp(cp, rho, embed_on="whole").purity() == pytest.approx(rho.purity(), abs=1e-10)


def test_unitary_superop_of_sigma_z():
    spec = spectral_decompose(SIGMA_Z)
    half_turn = unitary_superop(spec, np.pi)
    assert np.allclose(half_turn.kraus[0], -np.eye(2))
    assert np.allclose(unitary_superop(spec, 0.0).kraus[0], np.eye(2))
    x = np.array([[0.25, 0.1 - 0.3j], [0.1 + 0.3j, 0.75]])
    assert np.allclose(apply_cp(half_turn, x, embed_on="whole").data, x)


def test_depolarizing_outcome_has_full_kraus_rank():
    assert kraus_rank(depolarizing_map(2, 1.0)) == 4
    assert kraus_rank(canonical_kraus(depolarizing_map(2, 0.5))) == 4
    assert kraus_rank(depolarizing_map(2, 0.0)) == 1
