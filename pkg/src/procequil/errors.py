"""Exception types raised by the simulator and the command-line front end."""


class ProcequilError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(ProcequilError):
    """An operator expected to be Hermitian failed the symmetry check."""


class DecompositionFailed(ProcequilError):
    """The eigensolver did not converge."""


class BadFactorIndex(ProcequilError):
    """A tensor-factor index is out of range or not allowed."""


class DimensionMismatch(ProcequilError):
    """Operands have incompatible dimensions."""


class TooLarge(ProcequilError):
    """A dense object would exceed the memory guard."""


class TooManyTerms(ProcequilError):
    """An expansion would produce more terms than the guard allows."""


class NonPositivePurity(ProcequilError):
    """A post-selected intermediate state has vanishing weight."""


class SeriesDiverges(ProcequilError):
    """A geometric series needed by a bound has ratio >= 1."""

    def __init__(self, ratio: float):
        super().__init__(f"geometric ratio {ratio:.6g} >= 1; bound undefined (rare-event regime)")
        self.ratio = ratio


class RareOutcome(ProcequilError):
    """Conditioning on an outcome whose probability is below the rare threshold."""

    def __init__(self, outcome, probability: float):
        super().__init__(f"outcome {outcome!r} has marginal probability {probability:.3e}")
        self.outcome = outcome
        self.probability = probability


class InsufficientColumns(ProcequilError):
    """Fewer than two well-defined conditioning outcomes."""


class BinTooLarge(ProcequilError):
    """Moving-average bin is wider than the series."""


class ConfigError(ProcequilError):
    """Invalid run configuration."""


class InputFormatError(ProcequilError):
    """Malformed operator or tensor input file."""


class InvalidState(ProcequilError):
    """An operator fails the density-matrix checks (trace, Hermiticity, positivity)."""
