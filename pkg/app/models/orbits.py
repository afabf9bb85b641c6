from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.core.config import DEFAULT_BUDGET, DEFAULT_ESCAPE_RADIUS, DEFAULT_PERSISTENCE


class Classification(str, Enum):
    ESCAPING = "ESCAPING"
    RETURNING = "RETURNING"
    FIXED = "FIXED"
    UNDETERMINED = "UNDETERMINED"

    @property
    def code(self) -> int:
        return CLASSIFICATION_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Classification":
        return CODE_CLASSIFICATIONS[int(code)]


# Compact integer codes used inside grids and batch arrays.
CLASSIFICATION_CODES = {
    Classification.UNDETERMINED: 0,
    Classification.ESCAPING: 1,
    Classification.RETURNING: 2,
    Classification.FIXED: 3,
}
CODE_CLASSIFICATIONS = {code: cls for cls, code in CLASSIFICATION_CODES.items()}


class EscapePolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    escape_radius: float = Field(DEFAULT_ESCAPE_RADIUS, gt=10.0)
    budget: int = Field(DEFAULT_BUDGET, ge=1)
    persistence: int = Field(DEFAULT_PERSISTENCE, ge=1)


class OrbitRecord(BaseModel):
    start: complex
    points: List[complex] = Field(default_factory=list)
    indices: List[int] = Field(default_factory=list, description="iteration index of each stored point")
    classification: Classification = Classification.UNDETERMINED
    iterations_used: int = 0
    returns: int = 0
    escape_iteration: Optional[int] = None
    saturated: bool = False
    sign_flip_index: Optional[int] = None

    @property
    def notes(self) -> List[str]:
        return ["SATURATED"] if self.saturated else []


class RotationCheck(BaseModel):
    point: complex
    annulus: int
    t: float
    image_arg: float
    lower_bound: float
    upper_bound: Optional[float] = None
    passed: bool

    @property
    def lower_margin(self) -> float:
        return self.image_arg - self.lower_bound

    @property
    def upper_margin(self) -> Optional[float]:
        if self.upper_bound is None:
            return None
        return self.upper_bound - self.image_arg


class SignFlipResult(BaseModel):
    start: complex
    annulus: int
    index: Optional[int] = None
    predicted_bound: int
    k_max: int

    @property
    def found(self) -> bool:
        return self.index is not None


class PeriodicOrbitReport(BaseModel):
    period: int
    max_modulus: float
    closure_error: float
    steps: int
