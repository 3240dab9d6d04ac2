from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Optional, Dict, Any, Union, Literal
from enum import Enum
import math

from core.config import settings


class DeformationParams(BaseModel):
    """The deformation pair (p, q) and the tolerance below which |p - q| selects the p = q limit."""

    model_config = ConfigDict(frozen=True)

    p: float
    q: float
    degenerate_tol: float = Field(ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _default_tolerance(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("degenerate_tol") is None:
            try:
                scale = max(1.0, abs(float(data["p"])), abs(float(data["q"])))
            except (KeyError, TypeError, ValueError):
                return data
            data = {**data, "degenerate_tol": settings.degenerate_rel_tol * scale}
        return data

    @field_validator("p", "q")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("deformation parameters must be finite")
        return v

    @property
    def is_degenerate(self) -> bool:
        return abs(self.p - self.q) <= self.degenerate_tol

    @property
    def product(self) -> float:
        return self.p * self.q

    @property
    def total(self) -> float:
        return self.p + self.q

    def swapped(self) -> "DeformationParams":
        return DeformationParams(p=self.q, q=self.p, degenerate_tol=self.degenerate_tol)

    def with_bases(self, p: float, q: float) -> "DeformationParams":
        """Same policy, new bases (tolerance rescaled to the new magnitudes)"""
        return DeformationParams(p=p, q=q)


class FamilyKind(str, Enum):
    NON_SYMMETRIC_Q = "nonsym"
    SYMMETRIC_Q = "sym"
    FERMIONIC_Q = "fermionic"
    FIBONACCI = "fibonacci"
    FIBONACCI_DIVISOR = "fibdiv"
    TAMM_DANKOV = "tammdankov"


class FamilyPreset(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: FamilyKind
    q: Optional[float] = None
    k: Optional[int] = None
    resolved: DeformationParams

    @property
    def label(self) -> str:
        if self.kind == FamilyKind.FIBONACCI_DIVISOR:
            return f"{self.kind.value}(k={self.k})"
        if self.q is not None:
            return f"{self.kind.value}(q={self.q:g})"
        return self.kind.value


class SeriesClassification(str, Enum):
    CONVERGED = "converged"
    TRUNCATED_AT_CAP = "truncated_at_cap"
    DIVERGING = "diverging"


class UncertaintySource(str, Enum):
    CLOSED_FORM = "closed_form"
    MATRIX_NUMERIC = "matrix_numeric"
    SYMMETRIC_FORM = "symmetric_form"


class UncertaintyReport(BaseModel):
    dx2: float
    dp2: float
    product: float
    source: UncertaintySource
    mean_x: Optional[float] = None
    mean_p: Optional[float] = None


class CheckStatus(str, Enum):
    OK = "ok"
    INAPPLICABLE = "inapplicable"
    ERROR = "error"


class IdentityResidual(BaseModel):
    name: str
    residual: Optional[float] = None
    status: CheckStatus = CheckStatus.OK
    detail: Optional[str] = None


class IdentityReport(BaseModel):
    p: float
    q: float
    n: int
    m: int
    residuals: List[IdentityResidual]

    def get(self, name: str) -> IdentityResidual:
        for item in self.residuals:
            if item.name == name:
                return item
        raise KeyError(name)

    @property
    def worst(self) -> float:
        applicable = [r.residual for r in self.residuals if r.status == CheckStatus.OK and r.residual is not None]
        return max(applicable, default=0.0)


class ResidualReport(BaseModel):
    """Named residuals of a group of relations; None marks an inapplicable relation."""

    label: str
    residuals: Dict[str, Optional[float]]
    notes: Dict[str, float] = {}

    @property
    def worst(self) -> float:
        return max((v for v in self.residuals.values() if v is not None), default=0.0)


class SuiteStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    PAPER_DIVERGENCE = "paper-divergence"
    ERROR = "error"


class SuiteResult(BaseModel):
    suite: str
    status: SuiteStatus
    worst_residual: float
    tolerance: float
    checks: int
    detail: str = ""


# CLI / API configuration models

class SweepQuantity(str, Enum):
    PQ_NUMBER = "pq_number"
    EXPONENTIAL = "exponential"
    SPECTRUM = "spectrum"
    UNCERTAINTY = "uncertainty"
    CONCURRENCE_L = "concurrence_L"
    CONCURRENCE_B = "concurrence_B"
    REFERENCE_VALUES = "reference_values"
    IDENTITY_SUITE = "identity_suite"
    ALGEBRA_RESIDUALS = "algebra_residuals"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class AlphaGrid(BaseModel):
    min: float = 0.0
    max: float = 0.0
    steps: int = Field(default=1, ge=1)
    phase: float = 0.0
    point: Optional[List[float]] = None  # explicit [re, im], overrides the grid

    @model_validator(mode="after")
    def _ordered(self) -> "AlphaGrid":
        if self.min > self.max:
            raise ValueError("alpha min must not exceed alpha max")
        if self.point is not None and len(self.point) != 2:
            raise ValueError("alpha point must be [re, im]")
        return self

    def points(self) -> List[complex]:
        if self.point is not None:
            return [complex(self.point[0], self.point[1])]
        rotation = complex(math.cos(self.phase), math.sin(self.phase))
        if self.steps == 1:
            return [self.max * rotation]
        step = (self.max - self.min) / (self.steps - 1)
        return [(self.min + i * step) * rotation for i in range(self.steps)]


class ParamsSelection(BaseModel):
    family: Optional[FamilyKind] = None
    p: Optional[float] = None
    q: Optional[float] = None
    k: Optional[int] = Field(default=None, ge=1)


class GridRequest(ParamsSelection):
    alpha: AlphaGrid = AlphaGrid()
    n_max: int = Field(default=10, ge=0)
    dim: Union[int, Literal["auto"]] = "auto"
    tol: Optional[float] = Field(default=None, gt=0.0)
    hbar_omega: float = 1.0

    @field_validator("dim")
    @classmethod
    def _dim_range(cls, v: Union[int, str]) -> Union[int, str]:
        if isinstance(v, int) and v < 2:
            raise ValueError("dim must be at least 2")
        return v


class SweepConfig(GridRequest):
    quantity: SweepQuantity
    output: OutputFormat = OutputFormat.CSV


class ExpRequest(ParamsSelection):
    z_re: float = 0.0
    z_im: float = 0.0
    tol: Optional[float] = Field(default=None, gt=0.0)


class SweepTable(BaseModel):
    metadata: Dict[str, Any]
    rows: List[Dict[str, Any]]
    failed: bool = False
