"""
Validation - Toolkit Module
Pydantic request/parameter models for the command-line surface and the
linearization file format.
"""

import re
from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ExperimentName = Literal["schur", "locallaw", "rigidity", "deloc", "speed", "globaldos"]
EntryLawName = Literal["complex-gaussian", "real-gaussian", "bernoulli"]

COMPLEX_PAIR_PATTERN = re.compile(r"^\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*$")


def parse_complex(value: Any) -> complex:
    """Accept "re,im", Python complex literals, numbers or [re, im] pairs."""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        match = COMPLEX_PAIR_PATTERN.match(value)
        if match:
            return complex(float(match.group(1)), float(match.group(2)))
        try:
            return complex(value.strip().replace("i", "j"))
        except ValueError as exc:
            raise ValueError(f"Invalid complex number: {value!r}") from exc
    raise ValueError(f"Invalid complex number: {value!r}")


def _split_csv(value: Any) -> Any:
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",") if item.strip()]
        return items or None
    return value


class ModelSource(BaseModel):
    """A model given either as a polynomial or as a saved linearization."""

    model_config = ConfigDict(populate_by_name=True, extra="ignore")

    expr: Optional[str] = Field(default=None, max_length=20_000)
    lin: Optional[str] = Field(default=None, max_length=4096)
    alpha: int = Field(default=0, ge=0, le=64)
    beta: int = Field(default=0, ge=0, le=64)
    minimize: bool = False

    @field_validator("expr")
    @classmethod
    def validate_expr(cls, value: Optional[str]) -> Optional[str]:
        if value is None:
            return None
        normalized = value.strip()
        if not normalized:
            raise ValueError("Polynomial expression must not be empty")
        return normalized

    @model_validator(mode="after")
    def validate_source(self) -> "ModelSource":
        if (self.expr is None) == (self.lin is None):
            raise ValueError("Provide exactly one of --expr or --lin")
        return self


class LinearizeRequest(ModelSource):
    block: Literal["padded", "compact"] = "padded"
    verify_depth: Optional[int] = Field(default=None, alias="verifyDepth", ge=0)
    output: Optional[str] = None

    @model_validator(mode="after")
    def validate_expression_present(self) -> "LinearizeRequest":
        if self.expr is None:
            raise ValueError("linearize needs --expr")
        return self


class SolveRequest(ModelSource):
    z: Tuple[float, float]
    include_matrix: bool = Field(default=True, alias="includeMatrix")
    output: Optional[str] = None

    @field_validator("z", mode="before")
    @classmethod
    def parse_z(cls, value: Any) -> Tuple[float, float]:
        point = parse_complex(value)
        return (point.real, point.imag)

    @field_validator("z")
    @classmethod
    def validate_half_plane(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if value[1] < 0:
            raise ValueError("z must satisfy Im z >= 0")
        return value

    @property
    def spectral_point(self) -> complex:
        return complex(self.z[0], self.z[1])


class DosRequest(ModelSource):
    emin: float
    emax: float
    points: int = Field(default=400, ge=2, le=1_000_000)
    eta: float = Field(default=1e-5, gt=0)
    richardson: bool = False
    output: Optional[str] = None

    @model_validator(mode="after")
    def validate_range(self) -> "DosRequest":
        if self.emax <= self.emin:
            raise ValueError("emax must exceed emin")
        return self


class StabilityRequest(ModelSource):
    kappa: float = Field(default=0.05, gt=0)
    emin: float
    emax: float
    points: int = Field(default=201, ge=2, le=100_000)
    eta: float = Field(default=1e-5, gt=0)
    etas: Optional[List[float]] = None
    threshold: Optional[float] = Field(default=None, gt=0)
    bulk_samples: int = Field(default=9, alias="bulkSamples", ge=1)
    sigma_floor: float = Field(default=1e-3, alias="sigmaFloor", ge=0)
    output: Optional[str] = None

    @field_validator("etas", mode="before")
    @classmethod
    def parse_etas(cls, value: Any) -> Any:
        return _split_csv(value)

    @field_validator("etas")
    @classmethod
    def validate_etas(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is None:
            return None
        if any(eta <= 0 for eta in value):
            raise ValueError("eta grid values must be positive")
        return sorted(value)

    @model_validator(mode="after")
    def validate_range(self) -> "StabilityRequest":
        if self.emax <= self.emin:
            raise ValueError("emax must exceed emin")
        return self


class MomentsRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="ignore")

    expr: str = Field(..., min_length=1, max_length=20_000)
    alpha: int = Field(default=0, ge=0, le=64)
    beta: int = Field(default=0, ge=0, le=64)
    k_max: int = Field(default=4, alias="kMax", ge=0, le=200)
    method: Literal["symbolic", "fock", "automaton"] = "symbolic"
    output: Optional[str] = None


class SimulateRequest(ModelSource):
    experiment: ExperimentName
    sizes: List[int] = Field(default_factory=lambda: [200])
    replicas: int = Field(default=3, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    law: EntryLawName = "complex-gaussian"
    gamma: float = Field(default=0.1, gt=0, lt=1)
    kappa: float = Field(default=0.05, gt=0)
    etas: Optional[List[float]] = None
    energies: Optional[List[float]] = None
    energy_points: int = Field(default=10, alias="energyPoints", ge=1)
    bins: int = Field(default=40, ge=2)
    dos_eta: float = Field(default=1e-5, alias="dosEta", gt=0)
    dos_points: int = Field(default=401, alias="dosPoints", ge=2)
    output: Optional[str] = None
    raw_csv: Optional[str] = Field(default=None, alias="rawCsv")

    @field_validator("sizes", "etas", "energies", mode="before")
    @classmethod
    def parse_lists(cls, value: Any) -> Any:
        return _split_csv(value)

    @field_validator("sizes")
    @classmethod
    def validate_sizes(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one matrix size is required")
        if any(size < 2 for size in value):
            raise ValueError("matrix sizes must be at least 2")
        return value

    @field_validator("etas")
    @classmethod
    def validate_etas(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(eta <= 0 for eta in value):
            raise ValueError("eta values must be positive")
        return value


MatrixPairs = List[List[List[float]]]


class LinearizationDocument(BaseModel):
    """On-disk linearization: matrices as rows of [re, im] pairs."""

    model_config = ConfigDict(extra="ignore")

    m: int = Field(..., ge=1)
    alpha_star: int = Field(..., ge=0)
    beta_star: int = Field(..., ge=0)
    K0: MatrixPairs
    K: List[MatrixPairs] = Field(default_factory=list)
    L: List[MatrixPairs] = Field(default_factory=list)
    expression: Optional[str] = None
    offset: Optional[float] = None

    @model_validator(mode="after")
    def validate_shapes(self) -> "LinearizationDocument":
        if len(self.K) != self.alpha_star:
            raise ValueError(f"expected {self.alpha_star} K matrices, found {len(self.K)}")
        if len(self.L) != self.beta_star:
            raise ValueError(f"expected {self.beta_star} L matrices, found {len(self.L)}")
        for label, matrix in [("K0", self.K0)] + [(f"K{i + 1}", k) for i, k in enumerate(self.K)] + [
            (f"L{i + 1}", l) for i, l in enumerate(self.L)
        ]:
            if len(matrix) != self.m or any(len(row) != self.m for row in matrix):
                raise ValueError(f"{label} must be {self.m}x{self.m}")
            if any(len(entry) != 2 for row in matrix for entry in row):
                raise ValueError(f"{label} entries must be [re, im] pairs")
        return self
