import math
from typing import ClassVar, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

# Map parameters
DEFAULT_C = 0.5
DEFAULT_D = 1e-3
DEFAULT_LAMBDA = 1.0
C_UPPER_BOUND = math.pi / 4

# Escape policy
DEFAULT_ESCAPE_RADIUS = 1e3
DEFAULT_PERSISTENCE = 10
DEFAULT_BUDGET = 10_000
FIXED_TOLERANCE = 1e-12

# Orbit storage
EXACT_STORAGE = 1024
THINNING_STRIDE = 16

# Floating-point channels
SATURATION_MODULUS = 1e300
LOG_SATURATION = math.log(SATURATION_MODULUS)
EXP_LOG_THRESHOLD = 500.0
SEAM_SNAP_RTOL = 1e-8
ANNULUS_SLACK = 1e-12

# Finite differences
FD_RELATIVE_STEP = 1e-6
FD_STEP_FLOOR = 1e-9
SEAM_BUFFER_STEPS = 10
OSCILLATION_ZONE = 1e-3


class Settings(BaseSettings):
    PROJECT_NAME: ClassVar[str] = "Escaping Set Toolkit"
    PROJECT_VERSION: ClassVar[str] = "1.0.0"

    # The only value read from the environment.
    OUTPUT_DIR: Optional[str] = None

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


settings = Settings()
