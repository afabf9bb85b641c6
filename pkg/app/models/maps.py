import cmath
import math
from enum import Enum
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

from app.core.config import (
    ANNULUS_SLACK,
    C_UPPER_BOUND,
    DEFAULT_C,
    DEFAULT_D,
    DEFAULT_LAMBDA,
)


class MapKind(str, Enum):
    PLANAR_G = "g"
    MOBIUS_L = "L"
    MOBIUS_L_INV = "L_inv"
    PLANAR_H = "h"
    PLANAR_F = "f"
    CYL3D = "f3d"
    IDENTITY = "identity"

    @property
    def is_planar(self) -> bool:
        return self is not MapKind.CYL3D


class Infinity(Enum):
    """The point at infinity of the extended plane."""

    POINT = "inf"

    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = Infinity.POINT

# A planar point is a Python complex; the extended plane adds INFINITY.
ComplexPoint = complex
ExtendedPoint = Union[complex, Infinity]


class MapParams(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    c: float = Field(DEFAULT_C, gt=0.0, lt=C_UPPER_BOUND, description="rotation amplitude (radians)")
    d: float = Field(DEFAULT_D, gt=0.0, lt=1.0, description="perturbation amplitude")
    lambda_: float = Field(DEFAULT_LAMBDA, gt=0.0, alias="lambda", description="radial stretch exponent")


class MapSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: MapKind
    params: MapParams = Field(default_factory=MapParams)
    power: int = Field(1, ge=1, description="number of times the map is composed with itself")

    @classmethod
    def of(cls, kind: Union[MapKind, str], **params) -> "MapSpec":
        return cls(kind=MapKind(kind), params=MapParams(**params))


class MapValue(NamedTuple):
    """Result of a planar evaluation: values plus a per-point saturation flag."""

    value: Union[complex, np.ndarray]
    overflowed: Union[bool, np.ndarray]


class PolarPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0.0)
    t: float

    @field_validator("t")
    @classmethod
    def _principal(cls, t: float) -> float:
        if not -math.pi < t <= math.pi:
            raise ValueError("argument must lie in (-pi, pi]")
        return t

    @classmethod
    def from_complex(cls, z: complex) -> "PolarPoint":
        r, t = cmath.polar(z)
        if t == -math.pi:
            t = math.pi
        return cls(r=r, t=t)

    def to_complex(self) -> complex:
        return cmath.rect(self.r, self.t)


class Annulus(BaseModel):
    """The ring 1 - 1/(n+1/4) < |z| < 1 - 1/(n+3/4)."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)

    @computed_field
    @property
    def rin(self) -> float:
        return 1.0 - 1.0 / (self.n + 0.25)

    @computed_field
    @property
    def rout(self) -> float:
        return 1.0 - 1.0 / (self.n + 0.75)

    def contains(self, z: complex, slack: float = ANNULUS_SLACK) -> bool:
        r = abs(z)
        return self.rin - slack <= r <= self.rout + slack


def annulus_index(z: complex, slack: float = ANNULUS_SLACK) -> Optional[int]:
    """Index m >= 2 of the annulus containing z, or None."""
    r = abs(z)
    if not 0.0 < r < 1.0:
        return None
    m = max(2, math.floor(1.0 / (1.0 - r) - 0.25))
    for candidate in (m - 1, m, m + 1):
        if candidate >= 2 and Annulus(n=candidate).contains(z, slack):
            return candidate
    return None


class CylPoint3(BaseModel):
    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0.0)
    theta: float = 0.0
    x3: float = 0.0

    @field_validator("theta")
    @classmethod
    def _principal(cls, theta: float) -> float:
        if not -math.pi < theta <= math.pi:
            raise ValueError("theta must lie in (-pi, pi]")
        return theta

    @classmethod
    def from_cartesian(cls, x: float, y: float, x3: float) -> "CylPoint3":
        theta = math.atan2(y, x)
        if theta == -math.pi:
            theta = math.pi
        return cls(r=math.hypot(x, y), theta=theta, x3=x3)

    def to_cartesian(self) -> Tuple[float, float, float]:
        return (self.r * math.cos(self.theta), self.r * math.sin(self.theta), self.x3)
