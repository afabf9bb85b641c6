from enum import Enum

from pydantic import BaseModel


class Suite(str, Enum):
    ALL = "all"
    MAPS = "maps"
    ORBITS = "orbits"
    GRIDS = "grids"
    DILATATION = "dilatation"


class CheckResult(BaseModel):
    name: str
    suite: Suite
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"
