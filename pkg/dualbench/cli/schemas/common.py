"""
Common Pydantic schemas
Experiment file layout and result records
"""
from enum import Enum
from typing import Annotated, Any, Dict, List, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from dualbench.infra.exact import to_rational


def _exact(value: Any) -> Any:
    if value is None:
        return None
    return to_rational(value)


ExactNumber = Annotated[Any, BeforeValidator(_exact)]


# Enums
class ModelKindEnum(str, Enum):
    SEP = "sep"
    SEP2J = "sep2j"
    SIP = "sip"
    IRW = "irw"
    LADDER_SEP = "ladder_sep"
    BMP = "bmp"
    BEP = "bep"
    KMP = "kmp"
    DUAL_KMP = "dual_kmp"
    HERMITE = "hermite"
    BOUNDARY_SEP2J = "boundary_sep2j"
    BOUNDARY_LADDER_SEP = "boundary_ladder_sep"
    BOUNDARY_BEP = "boundary_bep"
    BOUNDARY_BMP = "boundary_bmp"
    DUAL_ABSORBING_SEP2J = "dual_absorbing_sep2j"
    DUAL_ABSORBING_SIP = "dual_absorbing_sip"


class ExperimentEnum(str, Enum):
    CHECK_ALGEBRA = "check-algebra"
    CHECK_DUALITY = "check-duality"
    CHECK_STATIONARY = "check-stationary"
    SIMULATE = "simulate"
    MC_DUALITY = "mc-duality"
    PROFILE = "profile"
    LIMITS = "limits"


# Base schemas
class BaseSchema(BaseModel):
    model_config = ConfigDict(from_attributes=True, extra="forbid")


# Experiment file
class ModelBlock(BaseSchema):
    kind: ModelKindEnum
    j: Optional[ExactNumber] = None
    m: Optional[int] = Field(default=None, ge=1)
    levels: Optional[int] = Field(default=None, ge=1)
    lam: Optional[ExactNumber] = Field(default=None, alias="lambda")
    rho: Optional[Dict[str, ExactNumber]] = None
    T: Optional[Dict[str, ExactNumber]] = None

    model_config = ConfigDict(from_attributes=True, extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def check_reservoirs(self) -> "ModelBlock":
        if self.rho is not None and self.T is not None:
            raise ValueError("give either rho (densities) or T (temperatures), not both")
        return self

    @property
    def reservoirs(self) -> Optional[Dict[str, Any]]:
        return self.rho if self.rho is not None else self.T


class GraphBlock(BaseSchema):
    sites: List[str] = Field(min_length=1)
    edges: List[List[Any]] = Field(default_factory=list)
    boundary: List[str] = Field(default_factory=list)

    @field_validator("sites", "boundary", mode="before")
    @classmethod
    def sites_as_strings(cls, value: Any) -> Any:
        if isinstance(value, list):
            return [str(v) for v in value]
        return value

    @field_validator("edges")
    @classmethod
    def edge_shape(cls, value: List[List[Any]]) -> List[List[Any]]:
        for edge in value:
            if len(edge) not in (2, 3):
                raise ValueError(f"edge {edge} must be [a, b] or [a, b, weight]")
        return value


class RunBlock(BaseSchema):
    experiment: ExperimentEnum
    t: float = Field(default=1.0, ge=0)
    dt: float = Field(default=0.01, gt=0)
    samples: int = Field(default=2000, ge=1)
    seed: int = 0
    sector: Optional[int] = Field(default=None, ge=0)
    cutoff: int = Field(default=8, ge=3)
    eta0: Optional[List[float]] = None
    xi0: Optional[List[int]] = None
    density: Optional[List[ExactNumber]] = None
    j_values: Optional[List[ExactNumber]] = None
    m_values: Optional[List[int]] = None
    max_degree: int = Field(default=3, ge=1)
    correlations: bool = False
    cross_check: bool = False
    sigma: Optional[float] = Field(default=None, gt=0)
    significance: Optional[float] = Field(default=None, gt=0, lt=1)


class ExperimentConfig(BaseSchema):
    model: ModelBlock
    graph: GraphBlock
    run: RunBlock


# Result records
class VerificationRecordResponse(BaseSchema):
    identity: str
    sector: str
    residual: str
    passed: bool
    witness: Optional[str] = None

    @field_validator("residual", mode="before")
    @classmethod
    def residual_text(cls, value: Any) -> str:
        return str(value)


class MCComparisonResponse(BaseSchema):
    label: str
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float
    n_lhs: int
    n_rhs: int
    z_score: float
    threshold: float
    passed: bool
    exact_lhs: Optional[float] = None
    exact_rhs: Optional[float] = None
    reruns: int = 0


class TableRow(BaseSchema):
    """One record of a comma-separated output table"""
    values: Dict[str, str]

    @field_validator("values", mode="before")
    @classmethod
    def stringify(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return {str(k): "" if v is None else str(v) for k, v in value.items()}
        return value
