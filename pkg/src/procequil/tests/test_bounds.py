import math

import numpy as np
import pytest

from procequil.errors import DimensionMismatch, NonPositivePurity, SeriesDiverges
from procequil.sim.bounds import (
    MeasurementSet,
    MultitimeMeasurement,
    chebyshev_deviation_check,
    default_window,
    diamond_distance,
    distinguishability_mean_rhs,
    effective_dimension,
    inverse_effective_dimension,
    main_bound_rhs,
    measurement_set_cardinality,
    result2_check,
    result3_terms,
    sample_over_intervals,
    tighter_bound_rhs,
    tighter_bound_terms,
    variance_monte_carlo,
)
from procequil.sim.channels import (
    Instrument,
    apply_cp,
    dephase,
    depolarizing_map,
    identity_map,
    projective_instrument,
    random_projective_instrument,
    random_rank1_instrument,
    schatten_channel_norm,
)
from procequil.sim.process import (
    MultitimeInstrument,
    ProcessSpec,
    decompose_observable,
    expectation_direct,
    expectation_equilibrium,
)
from procequil.sim.qmath import SIGMA_X, SIGMA_Z, Operator, random_density_matrix, random_hermitian, spectral_decompose

from procequil.tests.conftest import make_instrument, make_spec


def test_effective_dimension_of_maximally_mixed_state():
    spec = spectral_decompose(np.diag([0.0, 1.0, 3.0, 7.0]))
    assert effective_dimension(spec, np.eye(4) / 4) == pytest.approx(4.0)


def test_effective_dimension_of_eigenstate(rng):
    spec = spectral_decompose(random_hermitian(6, rng))
    v = spec.eigenvectors[:, 2]
    assert effective_dimension(spec, np.outer(v, v.conj())) == pytest.approx(1.0)


def test_effective_dimension_range(rng):
    spec = spectral_decompose(random_hermitian(8, rng))
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    d_eff = effective_dimension(spec, np.outer(psi, psi.conj()))
    assert 1.0 <= d_eff <= spec.n_levels + 1e-9


def test_inverse_effective_dimension_unnormalized():
    spec = spectral_decompose(np.diag([0.0, 1.0]))
    assert inverse_effective_dimension(spec, np.diag([2.0, 0.0])) == pytest.approx(4.0)
    with pytest.raises(DimensionMismatch):
        inverse_effective_dimension(spec, np.eye(3))


@pytest.mark.parametrize("k,d_S,d_eff,expected", [
    (1, 2, 16.0, 0.25),
    (2, 2, 48.0, 1.0),
    (3, 2, 7.0 * 64, 7.0 * 4096 / (7.0 * 64)),
])
def test_main_bound_rhs(k, d_S, d_eff, expected):
    assert main_bound_rhs(k, d_S, d_eff) == pytest.approx(expected)


def test_default_window():
    spec = make_spec(0, steps=1)
    assert default_window(spec) == pytest.approx(1e3 / spec.hamiltonian.min_gap())


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("steps", [1, 2, 3])
def test_tighter_bound_does_not_exceed_main(seed, steps):
    spec = make_spec(seed, d_E=4, steps=steps, pure=True)
    instr = make_instrument(seed, steps)
    d_eff = effective_dimension(spec.hamiltonian, spec.rho)
    assert tighter_bound_rhs(spec, instr) <= main_bound_rhs(steps, 2, d_eff) * (1 + 1e-12)


def test_tighter_bound_terms_structure():
    spec = make_spec(3, d_E=3, steps=2, pure=True)
    terms = tighter_bound_terms(spec, make_instrument(3, 2))
    assert len(terms.terms) == 2
    assert terms.max_form == pytest.approx(3 * max(terms.terms))
    assert terms.sum_form == pytest.approx(terms.terms[0] + 2 * terms.terms[1])
    assert terms.inverse_deff[0] == pytest.approx(1 / effective_dimension(spec.hamiltonian, spec.rho))


def test_tighter_bound_vanishing_intermediate_state():
    spec = ProcessSpec.from_hamiltonian(np.diag([0.0, 1.0]), np.diag([0.0, 1.0]), 2, 3)
    kill = projective_instrument(d=2).outcomes[0]
    instr = MultitimeInstrument((kill, identity_map(2), identity_map(2)))
    with pytest.raises(NonPositivePurity):
        tighter_bound_terms(spec, instr)


def test_variance_of_dephased_process_is_zero():
    spec = make_spec(1, steps=2).as_dephased()
    report = variance_monte_carlo(spec, make_instrument(1, 2), n=10)
    assert report.lhs_estimate == 0.0
    assert report.satisfied


def test_variance_monte_carlo_satisfies_bound():
    spec = make_spec(2, d_E=4, steps=1, pure=True)
    report = variance_monte_carlo(spec, make_instrument(2, 1), n=200, seed=3)
    assert report.satisfied
    assert report.rhs == pytest.approx(main_bound_rhs(1, 2, report.d_eff))
    assert report.samples == 200


def test_variance_independent_of_worker_count():
    spec = make_spec(4, steps=1)
    instr = make_instrument(4, 1)
    one = variance_monte_carlo(spec, instr, n=120, seed=9, workers=1)
    two = variance_monte_carlo(spec, instr, n=120, seed=9, workers=2)
    assert one.lhs_estimate == two.lhs_estimate
    assert one.lhs_stderr == two.lhs_stderr


def _driven_expectation(spec, instr):
    return expectation_direct(spec, instr).real


def test_time_average_converges_to_equilibrium():
    spec = make_spec(12, steps=2)
    instr = make_instrument(12, 2)
    values = np.array(sample_over_intervals(_driven_expectation, spec, instr, default_window(spec), 4000, seed=1))
    stderr = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - expectation_equilibrium(spec, instr).real) <= 5 * stderr + 1e-3


def test_chebyshev_on_dephased_process():
    spec = make_spec(3, steps=1).as_dephased()
    report = chebyshev_deviation_check(spec, decompose_observable([SIGMA_X]), n=20)
    assert report.lhs_estimate == 0.0
    assert report.rhs == pytest.approx(report.d_eff ** (-1 / 3))
    assert report.details["alpha_l1"] > 0


def _measurements(seed, steps, count=2):
    rng = np.random.default_rng(seed)
    return MeasurementSet(tuple(
        MultitimeMeasurement(tuple(random_projective_instrument(rng, 2) for _ in range(steps)))
        for _ in range(count)
    ))


def test_measurement_set_cardinality():
    assert measurement_set_cardinality(_measurements(0, 2)) == 8
    assert measurement_set_cardinality(_measurements(0, 1, count=3)) == 6


def test_diamond_distance_of_identical_processes():
    spec = make_spec(5, steps=2)
    m = _measurements(5, 2)
    assert diamond_distance(spec, spec, m) == pytest.approx(0.0, abs=1e-12)
    dephased = spec.as_dephased()
    assert diamond_distance(dephased, None, m) == pytest.approx(0.0, abs=1e-12)
    assert 0.0 <= diamond_distance(spec, None, m) <= 1.0


def test_result2_report():
    spec = make_spec(6, d_E=3, steps=1)
    m = _measurements(6, 1)
    report = result2_check(spec, m, n=50, seed=2)
    s = measurement_set_cardinality(m)
    assert report.details["S"] == s
    assert report.details["mean_rhs"] == pytest.approx(distinguishability_mean_rhs(s, 1, 2, report.d_eff))
    assert report.rhs == pytest.approx(report.d_eff**-0.25)
    assert report.satisfied
    with pytest.raises(DimensionMismatch):
        result2_check(spec, _measurements(6, 2), n=5)


def test_result2_vacuity_follows_the_tail_bound():
    spec = make_spec(6, d_E=3, steps=1)
    report = result2_check(spec, _measurements(6, 1), n=50, seed=2)
    assert report.rhs < 1.0
    assert report.details["mean_rhs"] >= 1.0
    assert report.details["mean_vacuous"]
    assert not report.vacuous


def test_result3_terms_formula():
    k, k_minus, d_S, d_eff = 2, 1, 2, 1e6
    p = np.array([[0.5], [0.5]])
    q = np.array([[0.1], [0.1]])
    eta, c = result3_terms(p, q, k, k_minus, d_S, d_eff)
    cube = d_eff ** (1 / 3)
    r = math.sqrt(2**k_minus - 1) * d_S**k_minus / (cube * 0.5)
    expected_c = 0.1 * cube * r / (1 - r)
    assert c == pytest.approx(expected_c)
    assert eta == pytest.approx(2 * (math.sqrt(3) * 4 + expected_c) / 0.5)


def test_result3_terms_picks_the_worst_candidate():
    p = np.array([[0.5, 0.25], [0.4, 0.3]])
    q = np.zeros((2, 2))
    eta, c = result3_terms(p, q, 2, 1, 2, 1e6)
    assert c == 0.0
    assert eta == pytest.approx(2 * math.sqrt(3) * 4 / 0.25)


@pytest.mark.parametrize("pw", [0.01, 0.0])
def test_result3_terms_diverges(pw):
    p = np.array([[pw], [0.5]])
    q = np.array([[0.1], [0.1]])
    with pytest.raises(SeriesDiverges):
        result3_terms(p, q, 2, 1, 2, 1e6)


def test_effective_dimension_is_invariant_under_free_evolution(rng):
    spec = spectral_decompose(random_hermitian(6, rng))
    rho = random_density_matrix(6, rng).data
    d_eff = effective_dimension(spec, rho)
    for dt in (0.7, 4.0, 31.0):
        u = spec.unitary(dt)
        assert effective_dimension(spec, u @ rho @ u.conj().T) == pytest.approx(d_eff, rel=1e-9)
    assert effective_dimension(spec, dephase(spec, rho)) == pytest.approx(d_eff, rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_instrument_cannot_shrink_effective_dimension_beyond_its_norm(seed):
    rng = np.random.default_rng(seed)
    spec = spectral_decompose(random_hermitian(8, rng))
    omega = dephase(spec, Operator(random_density_matrix(8, rng).data, (2, 4)))
    for cp in (random_rank1_instrument(rng, 2), depolarizing_map(2, 0.3), projective_instrument(d=2).outcomes[0]):
        after = inverse_effective_dimension(spec, apply_cp(cp, omega))
        assert after <= schatten_channel_norm(cp) ** 2 * inverse_effective_dimension(spec, omega) + 1e-8


def test_diamond_distance_grows_with_the_measurement_set():
    spec = make_spec(9, d_E=3, steps=2)
    m = _measurements(9, 2, count=4)
    distances = [diamond_distance(spec, None, MeasurementSet(m.measurements[:i])) for i in range(1, 5)]
    assert all(a <= b + 1e-12 for a, b in zip(distances, distances[1:]))
    assert distances[-1] == pytest.approx(max(diamond_distance(spec, None, MeasurementSet((x,))) for x in m))


def test_cardinality_counts_kraus_rank():
    noisy = MultitimeMeasurement((Instrument((depolarizing_map(2, 1.0),), complete=True),))
    sharp = MultitimeMeasurement((projective_instrument(d=2),))
    assert measurement_set_cardinality(MeasurementSet((noisy,))) == 4
    assert measurement_set_cardinality(MeasurementSet((noisy, sharp))) == 6


def test_result3_terms_match_partial_sums():
    k, k_minus, d_S, d_eff = 2, 1, 2, 1e6
    p = np.array([[1.0], [1.0]])
    q = np.array([[0.3], [0.3]])
    eta, c = result3_terms(p, q, k, k_minus, d_S, d_eff)
    a = math.sqrt(2**k_minus - 1) * d_S**k_minus
    cube = d_eff ** (1 / 3)
    assert a / cube == pytest.approx(0.02)
    partial = 0.3 * sum(a**i / (cube ** (i - 1) * 1.0**i) for i in range(1, 51))
    assert c == pytest.approx(partial, rel=1e-12)
    assert eta == pytest.approx(2 * (math.sqrt(3) * 4 + partial))


def test_chebyshev_on_driven_process():
    spec = make_spec(8, d_E=8, steps=2, pure=True)
    report = chebyshev_deviation_check(spec, decompose_observable([SIGMA_Z, SIGMA_X]), n=200, seed=1)
    assert report.d_eff > 1.0
    assert not report.vacuous
    assert report.details["mean_deviation"] > 0.0
    assert report.satisfied


@pytest.mark.slow
def test_time_average_error_falls_as_inverse_root_samples():
    spec = make_spec(12, steps=2)
    instr = make_instrument(12, 2)
    omega = expectation_equilibrium(spec, instr).real
    total = 200_000
    values = np.array(
        sample_over_intervals(_driven_expectation, spec, instr, 100 * default_window(spec), total, seed=5, workers=0)
    )
    sizes = np.array([100, 1_000, 10_000])
    rms = [np.sqrt(np.mean((values.reshape(-1, n).mean(axis=1) - omega) ** 2)) for n in sizes]
    slope = np.polyfit(np.log(sizes), np.log(rms), 1)[0]
    assert -0.7 <= slope <= -0.3
