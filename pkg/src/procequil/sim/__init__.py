"""Numerical core: operators, channels, process tensors, bounds and experiments."""

from .bounds import (
    MeasurementSet,
    MultitimeMeasurement,
    chebyshev_deviation_check,
    diamond_distance,
    effective_dimension,
    main_bound_rhs,
    result2_check,
    result3_terms,
    tighter_bound_rhs,
    variance_monte_carlo,
)
from .channels import CPMap, Instrument, apply_cp, dephase, povm_norm, schatten_channel_norm
from .experiments import build_random_bath, moving_average, sweep
from .nonmarkov import CausalBreakProtocol, conditional_probabilities, non_markovianity, result3_check
from .process import (
    MultitimeInstrument,
    ProcessSpec,
    ProcessTensor,
    build_equilibrium_tensor,
    build_process_tensor,
    decompose_observable,
    expectation_direct,
    expectation_equilibrium,
    link_product_demo,
)
from .qmath import Operator, SpectralDecomposition, check_nonresonance, partial_trace, spectral_decompose
from .suite import run_verification_suite
from .types import BoundReport, SweepResult, SweepRow, TimeMode

__all__ = [
    "BoundReport",
    "CPMap",
    "CausalBreakProtocol",
    "Instrument",
    "MeasurementSet",
    "MultitimeInstrument",
    "MultitimeMeasurement",
    "Operator",
    "ProcessSpec",
    "ProcessTensor",
    "SpectralDecomposition",
    "SweepResult",
    "SweepRow",
    "TimeMode",
    "apply_cp",
    "build_equilibrium_tensor",
    "build_process_tensor",
    "build_random_bath",
    "chebyshev_deviation_check",
    "check_nonresonance",
    "conditional_probabilities",
    "decompose_observable",
    "dephase",
    "diamond_distance",
    "effective_dimension",
    "expectation_direct",
    "expectation_equilibrium",
    "link_product_demo",
    "main_bound_rhs",
    "moving_average",
    "non_markovianity",
    "partial_trace",
    "povm_norm",
    "result2_check",
    "result3_check",
    "result3_terms",
    "run_verification_suite",
    "schatten_channel_norm",
    "spectral_decompose",
    "sweep",
    "tighter_bound_rhs",
    "variance_monte_carlo",
]
