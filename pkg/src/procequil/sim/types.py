"""Shared result types for the simulation modules."""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class TimeMode(str, Enum):
    """Interval sampling regimes of the random-bath experiment."""
    LONG = "long"
    SHORT = "short"
    DEPHASED = "dephased"


TIME_WINDOWS: Dict[TimeMode, tuple] = {
    TimeMode.LONG: (5.0, 50.0),
    TimeMode.SHORT: (0.01, 0.5),
}


class BoundReport(BaseModel):
    """Outcome of one sampled bound check."""
    model_config = ConfigDict(extra="allow")

    context: str = Field(description="Which bound and instance this row checks")
    lhs_estimate: float = Field(description="Sampled left-hand side")
    lhs_stderr: float = Field(default=0.0, ge=0.0, description="Standard error of the lhs")
    rhs: float = Field(description="Bound value")
    satisfied: bool
    samples: int = Field(default=1, ge=1)
    k: int = 1
    d_S: int = 2
    d_E: int = 1
    d_eff: float = 1.0
    vacuous: bool = Field(default=False, description="rhs already exceeds the largest possible lhs")
    seed: Optional[int] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def build(cls, context: str, lhs: float, stderr: float, rhs: float, *, vacuous_above: float = float("inf"),
              **extra) -> "BoundReport":
        """Fill ``satisfied`` from the 3-sigma rule and ``vacuous`` from the lhs ceiling."""
        satisfied = lhs - 3.0 * stderr <= rhs
        return cls(
            context=context,
            lhs_estimate=float(lhs),
            lhs_stderr=float(stderr),
            rhs=float(rhs),
            satisfied=bool(satisfied),
            vacuous=bool(rhs >= vacuous_above),
            **extra,
        )

    def csv_row(self) -> Dict[str, Any]:
        return {
            "context": self.context,
            "k": self.k,
            "d_S": self.d_S,
            "d_E": self.d_E,
            "d_eff": self.d_eff,
            "lhs": self.lhs_estimate,
            "stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "satisfied": self.satisfied,
        }


BOUND_CSV_COLUMNS = ["context", "k", "d_S", "d_E", "d_eff", "lhs", "stderr", "rhs", "satisfied"]


class SweepRow(BaseModel):
    """Aggregated non-Markovianity at one bath dimension and time mode."""
    d_E: int
    mode: TimeMode
    d_eff_mean: float
    d_eff_min: float
    d_eff_max: float
    N_upsilon: float
    N_upsilon_stderr: float = Field(ge=0.0)
    N_omega: float
    N_omega_stderr: float = Field(ge=0.0)
    n_trials: int = Field(ge=1)

    @property
    def d_eff(self) -> float:
        return self.d_eff_mean


SWEEP_CSV_COLUMNS = [
    "d_E", "d_eff_mean", "d_eff_min", "d_eff_max",
    "N_upsilon", "N_upsilon_stderr", "N_omega", "N_omega_stderr", "mode", "n_trials",
]


class SweepResult(BaseModel):
    """Rows of a sweep, sorted by mode then mean effective dimension."""
    rows: List[SweepRow] = Field(default_factory=list)

    def for_mode(self, mode: TimeMode) -> List[SweepRow]:
        return [r for r in self.rows if r.mode == mode]


class PlotPoint(BaseModel):
    x: float
    y: float
    err: float = 0.0


class PlotSeries(BaseModel):
    """One curve of plot data for external plotting tools."""
    name: str
    mode: TimeMode
    binned: bool = False
    points: List[PlotPoint] = Field(default_factory=list)
