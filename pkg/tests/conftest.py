import numpy as np
import pytest

from app.models.grids import EscapeGrid, Window
from app.models.maps import MapKind, MapParams, MapSpec
from app.models.orbits import Classification, EscapePolicy


@pytest.fixture
def params():
    return MapParams()


@pytest.fixture
def spec_of(params):
    def build(kind: MapKind, **overrides) -> MapSpec:
        return MapSpec(kind=kind, params=params.model_copy(update=overrides))
    return build


@pytest.fixture
def synthetic_grid():
    """7x7 grid on [0, 6]^2 (unit spacing) filled with FIXED; cells are set per test."""
    def build(cells=None, fill: Classification = Classification.FIXED) -> EscapeGrid:
        classes = np.full((7, 7), fill.code, dtype=np.int8)
        for (row, col), cls in (cells or {}).items():
            classes[row, col] = cls.code
        return EscapeGrid(
            window=Window(xmin=0.0, xmax=6.0, ymin=0.0, ymax=6.0),
            nx=7,
            ny=7,
            spec=MapSpec(kind=MapKind.PLANAR_F),
            policy=EscapePolicy(),
            classes=classes,
            escape_iteration=np.full((7, 7), -1, dtype=np.int64),
            iterations=np.ones((7, 7), dtype=np.int64),
        )
    return build
