from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.maps import MapSpec
from app.models.orbits import Classification, EscapePolicy


class Window(BaseModel):
    """Axis-parallel rectangle [xmin, xmax] x [ymin, ymax]."""

    model_config = ConfigDict(frozen=True)

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @model_validator(mode="after")
    def _nondegenerate(self) -> "Window":
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("window must satisfy xmin < xmax and ymin < ymax")
        return self

    @classmethod
    def around(cls, center: complex, half_width: float, half_height: Optional[float] = None) -> "Window":
        half_height = half_width if half_height is None else half_height
        return cls(
            xmin=center.real - half_width,
            xmax=center.real + half_width,
            ymin=center.imag - half_height,
            ymax=center.imag + half_height,
        )

    def contains(self, z: complex) -> bool:
        return self.xmin <= z.real <= self.xmax and self.ymin <= z.imag <= self.ymax

    def lattice(self, nx: int, ny: int) -> Tuple[np.ndarray, np.ndarray]:
        """Cell centres; the window edges are the outermost centres."""
        xs = self.xmin + np.arange(nx) * ((self.xmax - self.xmin) / (nx - 1))
        ys = self.ymin + np.arange(ny) * ((self.ymax - self.ymin) / (ny - 1))
        return xs, ys

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)


class EscapeGrid(BaseModel):
    """
    Classification of every cell centre of a window.

    `classes`, `escape_iteration` and `iterations` are (ny, nx) arrays; row j
    holds the centres with imaginary part y_j, so row 0 is the bottom edge.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    window: Window
    nx: int = Field(ge=2)
    ny: int = Field(ge=2)
    spec: MapSpec
    policy: EscapePolicy
    classes: np.ndarray
    escape_iteration: np.ndarray
    iterations: np.ndarray

    @model_validator(mode="after")
    def _shapes(self) -> "EscapeGrid":
        for name in ("classes", "escape_iteration", "iterations"):
            if getattr(self, name).shape != (self.ny, self.nx):
                raise ValueError(f"{name} must have shape ({self.ny}, {self.nx})")
        return self

    @property
    def spacing(self) -> Tuple[float, float]:
        w = self.window
        return ((w.xmax - w.xmin) / (self.nx - 1), (w.ymax - w.ymin) / (self.ny - 1))

    def cell_of(self, z: complex) -> Tuple[int, int]:
        """(row, column) of the centre nearest to z."""
        if not self.window.contains(z):
            raise ValueError(f"{z} lies outside the grid window")
        dx, dy = self.spacing
        i = int(round((z.real - self.window.xmin) / dx))
        j = int(round((z.imag - self.window.ymin) / dy))
        return min(j, self.ny - 1), min(i, self.nx - 1)

    def center(self, row: int, col: int) -> complex:
        dx, dy = self.spacing
        return complex(self.window.xmin + col * dx, self.window.ymin + row * dy)

    def classification_at(self, z: complex) -> Classification:
        return Classification.from_code(self.classes[self.cell_of(z)])

    def counts(self) -> Dict[str, int]:
        return {cls.value: int(np.count_nonzero(self.classes == cls.code)) for cls in Classification}


class ComponentReport(BaseModel):
    label: int
    classification: Classification
    cell_count: int
    bounding_box: Window
    touches_window_boundary: bool
    contains: List[complex] = Field(default_factory=list)


class GrowthCurve(BaseModel):
    radii: List[float]
    m_values: List[float]
    ratios: List[float]
    samples: int

    @model_validator(mode="after")
    def _increasing(self) -> "GrowthCurve":
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("radii must be strictly increasing")
        if not len(self.radii) == len(self.m_values) == len(self.ratios):
            raise ValueError("radii, m_values and ratios must have equal length")
        return self


class CoverageWitness(BaseModel):
    target: complex
    preimage: Optional[complex] = None
    residual: Optional[float] = None
    verified: bool = False

    @property
    def status(self) -> str:
        return "FOUND" if self.preimage is not None and self.verified else "NO_PREIMAGE"


class CoverageReport(BaseModel):
    inner_radius: float
    outer_radius: float
    target_radius: float
    witnesses: List[CoverageWitness]

    @property
    def covered(self) -> int:
        return sum(1 for w in self.witnesses if w.status == "FOUND")

    @property
    def fraction(self) -> float:
        return self.covered / len(self.witnesses) if self.witnesses else 0.0


class CoverageSearch(BaseModel):
    """Outcome of the search for the largest fully covered radius."""

    inner_radius: float
    outer_radius: float
    best_radius: Optional[float] = None
    tested: List[Tuple[float, float]] = Field(default_factory=list, description="(radius, covered fraction)")
