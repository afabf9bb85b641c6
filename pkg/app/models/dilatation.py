from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.grids import Window


class AnnularRegion(BaseModel):
    """rmin <= |z| <= rmax; for three-space maps also x3min <= x3 <= x3max."""

    model_config = ConfigDict(frozen=True)

    rmin: float = Field(ge=0.0)
    rmax: float
    x3min: float = -1.0
    x3max: float = 1.0

    @model_validator(mode="after")
    def _ordered(self) -> "AnnularRegion":
        if not self.rmin < self.rmax:
            raise ValueError("annular region needs rmin < rmax")
        if not self.x3min <= self.x3max:
            raise ValueError("annular region needs x3min <= x3max")
        return self


ScanRegion = Union[Window, AnnularRegion]


class DilatationReport(BaseModel):
    point: Union[complex, Tuple[float, float, float]]
    step: float
    jac: List[List[float]]
    mu_abs: Optional[float] = None
    singular_values: Optional[List[float]] = None
    k_estimate: Optional[float] = None
    seam_distance: float = float("inf")
    reliable: bool = True

    @property
    def flags(self) -> List[str]:
        return [] if self.reliable else ["UNRELIABLE"]


class ScanSummary(BaseModel):
    samples: int
    excluded: int = Field(0, description="samples inside the oscillation zone")
    unreliable: int = 0
    degenerate: int = 0
    max_k: Optional[float] = None
    max_k_point: Optional[Union[complex, Tuple[float, float, float]]] = None
    histogram_edges: List[float] = Field(default_factory=list)
    histogram_counts: List[int] = Field(default_factory=list)
    reports: List[DilatationReport] = Field(default_factory=list)
