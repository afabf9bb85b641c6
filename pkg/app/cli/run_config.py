"""
Run configuration: a flat text document of `key = value` lines.

    # comment
    command = grid
    map = f
    c = 0.5
    window = 0, 3.9921875, -2, 1.9921875
    markers = 2, 3

Values are Python-literal numbers (complex as `-1-1j`), `true`/`false`,
bare words, or comma-separated lists of those. Duplicate keys and lines
without `=` are parse errors; unknown keys are validation errors.
"""
import re
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.config import (
    C_UPPER_BOUND,
    DEFAULT_BUDGET,
    DEFAULT_C,
    DEFAULT_D,
    DEFAULT_ESCAPE_RADIUS,
    DEFAULT_LAMBDA,
    DEFAULT_PERSISTENCE,
)
from app.core.exceptions import ConfigParseError, ConfigValidationError
from app.core.workers import default_workers
from app.models.dilatation import AnnularRegion
from app.models.grids import Window
from app.models.maps import MapKind, MapParams, MapSpec
from app.models.orbits import Classification, EscapePolicy
from app.models.verification import Suite

KEY_PATTERN = re.compile(r"^[a-z][a-z0-9_]*$")


class Command(str, Enum):
    ORBIT = "orbit"
    GRID = "grid"
    COMPONENTS = "components"
    DILATATION = "dilatation"
    GROWTH = "growth"
    COVERAGE = "coverage"
    VERIFY = "verify"


PLANAR_COMMANDS = {Command.ORBIT, Command.GRID, Command.COMPONENTS, Command.COVERAGE}


class ImageFormat(str, Enum):
    P5 = "p5"
    P6 = "p6"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    command: Command
    map: MapKind = MapKind.PLANAR_F
    c: float = Field(DEFAULT_C, gt=0.0, lt=C_UPPER_BOUND)
    d: float = Field(DEFAULT_D, gt=0.0, lt=1.0)
    lambda_: float = Field(DEFAULT_LAMBDA, gt=0.0, alias="lambda")
    power: int = Field(1, ge=1)

    # orbit
    z0: complex = 2 + 0j
    points: List[complex] = Field(default_factory=list)
    sign_flip: bool = False

    # escape policy
    escape_radius: float = Field(DEFAULT_ESCAPE_RADIUS, gt=10.0)
    budget: int = Field(DEFAULT_BUDGET, ge=1)
    persistence: int = Field(DEFAULT_PERSISTENCE, ge=1)

    # grids and components
    window: List[float] = Field(default_factory=lambda: [0.0, 511 / 128, -2.0, 255 / 128])
    nx: int = Field(256, ge=2)
    ny: int = Field(256, ge=2)
    which: Classification = Classification.ESCAPING
    dilate: bool = True
    markers: List[complex] = Field(default_factory=lambda: [2 + 0j])
    image: ImageFormat = ImageFormat.P5

    # dilatation
    rmin: Optional[float] = Field(None, ge=0.0)
    rmax: Optional[float] = None
    samples: int = Field(1024, ge=1)
    step: Optional[float] = Field(None, gt=0.0)

    # growth
    radii: List[float] = Field(default_factory=lambda: [2.0, 2.5, 3.0])
    growth_samples: int = Field(256, ge=16)

    # coverage
    inner: float = Field(1.0, ge=0.0)
    outer: float = 4.0
    target_radius: Optional[float] = Field(None, gt=0.0)
    targets: int = Field(64, ge=1)
    ladder_factor: float = Field(2.0, gt=1.0)
    rungs: int = Field(8, ge=1)

    # verify
    suite: Suite = Suite.ALL

    # run
    seed: int = 0
    workers: int = Field(default_factory=default_workers, ge=1)
    output_dir: str = "output"
    record: Optional[str] = None

    @field_validator("points", "markers", "radii", "window", mode="before")
    @classmethod
    def _listify(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return list(value)
        return [value]

    @field_validator("window")
    @classmethod
    def _window_shape(cls, value: List[float]) -> List[float]:
        if len(value) != 4:
            raise ValueError("window needs four values: xmin, xmax, ymin, ymax")
        Window(xmin=value[0], xmax=value[1], ymin=value[2], ymax=value[3])
        return value

    @field_validator("radii")
    @classmethod
    def _increasing(cls, value: List[float]) -> List[float]:
        if not value or any(r <= 0.0 for r in value) or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("radii must be positive and strictly increasing")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if self.command in PLANAR_COMMANDS and not self.map.is_planar:
            raise ConfigValidationError("map", f"command {self.command.value} needs a planar map")
        if (self.rmin is None) != (self.rmax is None):
            raise ConfigValidationError("rmax" if self.rmax is None else "rmin", "rmin and rmax go together")
        if self.rmin is not None and not self.rmin < self.rmax:
            raise ConfigValidationError("rmax", "rmax must exceed rmin")
        if not self.inner < self.outer:
            raise ConfigValidationError("outer", "outer radius must exceed inner radius")
        return self

    def map_params(self) -> MapParams:
        return MapParams(c=self.c, d=self.d, lambda_=self.lambda_)

    def map_spec(self) -> MapSpec:
        return MapSpec(kind=self.map, params=self.map_params(), power=self.power)

    def policy(self) -> EscapePolicy:
        return EscapePolicy(escape_radius=self.escape_radius, budget=self.budget, persistence=self.persistence)

    def grid_window(self) -> Window:
        xmin, xmax, ymin, ymax = self.window
        return Window(xmin=xmin, xmax=xmax, ymin=ymin, ymax=ymax)

    def scan_region(self):
        if self.rmin is not None:
            return AnnularRegion(rmin=self.rmin, rmax=self.rmax)
        return self.grid_window()

    def render(self) -> str:
        """The materialised configuration in the same `key = value` grammar."""
        lines = []
        for name, field in type(self).model_fields.items():
            value = getattr(self, name)
            if value is None or value == []:
                continue
            lines.append(f"{field.alias or name} = {format_value(value)}")
        return "\n".join(lines)


def config_keys() -> List[str]:
    return [field.alias or name for name, field in RunConfig.model_fields.items()]


# ---------------------------------------------------------------------------
# parsing

def parse_scalar(text: str) -> Any:
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for convert in (int, float):
        try:
            return convert(text)
        except ValueError:
            pass
    if text.endswith("j"):
        try:
            return complex(text.replace(" ", ""))
        except ValueError:
            pass
    return text


def parse_value(text: str) -> Any:
    if "," in text:
        return [parse_scalar(part) for part in text.split(",")]
    return parse_scalar(text)


def format_value(value: Any) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, list):
        return ", ".join(format_value(v) for v in value)
    if value is None:
        return ""
    return str(value)


def parse_document(text: str) -> Dict[str, Any]:
    """Raw key/value pairs of a configuration document."""
    raw: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigParseError(f"expected 'key = value', got {content!r}", number)
        key, value = (part.strip() for part in content.split("=", 1))
        if not KEY_PATTERN.match(key):
            raise ConfigParseError(f"invalid key {key!r}", number)
        if key in raw:
            raise ConfigParseError(f"duplicate key {key!r}", number)
        if not value:
            raise ConfigParseError(f"missing value for {key!r}", number)
        raw[key] = parse_value(value)
    return raw


def build_config(raw: Dict[str, Any]) -> RunConfig:
    """Validate raw values; errors name the offending key."""
    if "command" not in raw:
        raise ConfigValidationError("command", "is required")
    try:
        return RunConfig.model_validate(raw)
    except ConfigValidationError:
        raise
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else "config"
        if key == "lambda_":
            key = "lambda"
        cause = error.get("ctx", {}).get("error")
        if isinstance(cause, ConfigValidationError):
            raise cause from None
        raise ConfigValidationError(key, error["msg"]) from None


def parse_config(text: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    raw = parse_document(text)
    raw.update(overrides or {})
    return build_config(raw)
