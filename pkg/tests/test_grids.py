import numpy as np
import pytest

from app.core.exceptions import PreconditionError
from app.models.grids import Window
from app.models.maps import Annulus, MapKind, MapParams
from app.models.orbits import Classification, EscapePolicy
from app.services.grids import (
    component_containing,
    escape_grid,
    label_components,
    refined_resolution,
    ring_containment,
    sample_annulus,
    separation_witness,
)
from app.services.verification import SEPARATION_WINDOW, CheckContext, check_bounded_component

ESC = Classification.ESCAPING
RET = Classification.RETURNING


# ---------------------------------------------------------------------------
# sampling and windows

def test_sample_annulus_bounds_and_determinism():
    annulus = Annulus(n=4)
    z = sample_annulus(4, 500, seed=1)
    assert np.all((np.abs(z) >= annulus.rin) & (np.abs(z) <= annulus.rout))
    assert np.array_equal(z, sample_annulus(4, 500, seed=1))
    assert np.all(sample_annulus(4, 500, seed=1, right_half=True).real >= 0.0)
    with pytest.raises(PreconditionError):
        sample_annulus(4, 0, seed=1)


def test_window_lattice_includes_edges():
    window = Window(xmin=0.0, xmax=511 / 128, ymin=-2.0, ymax=255 / 128)
    xs, ys = window.lattice(512, 512)
    assert xs[0] == 0.0 and xs[-1] == 511 / 128
    assert xs[256] == 2.0
    assert ys[256] == 0.0


def test_window_must_be_nondegenerate():
    with pytest.raises(ValueError):
        Window(xmin=1.0, xmax=1.0, ymin=0.0, ymax=1.0)


def test_ring_containment():
    assert ring_containment(SEPARATION_WINDOW, n=2)
    assert not ring_containment(Window(xmin=0.0, xmax=1.0, ymin=-1.0, ymax=1.0), n=2)


# ---------------------------------------------------------------------------
# escape grids

def test_grid_far_left_is_fixed_under_h(spec_of):
    grid = escape_grid(spec_of(MapKind.PLANAR_H), Window.around(-5 + 0j, 0.1), 4, 4)
    assert np.all(grid.classes == Classification.FIXED.code)
    assert grid.counts()["FIXED"] == 16


def test_grid_cell_at_two_escapes(spec_of):
    window = Window(xmin=1.5, xmax=2.5, ymin=-0.5, ymax=0.5)
    grid = escape_grid(spec_of(MapKind.PLANAR_F), window, 5, 5, EscapePolicy(budget=2000))
    assert grid.cell_of(2 + 0j) == (2, 2)
    assert grid.center(2, 2) == 2 + 0j
    assert grid.classification_at(2 + 0j) is ESC
    assert grid.escape_iteration[2, 2] > 0


def test_grid_rejects_tiny_resolution(spec_of):
    with pytest.raises(PreconditionError):
        escape_grid(spec_of(MapKind.PLANAR_F), Window.around(1 + 0j, 1.0), 1, 4)


def test_grid_does_not_depend_on_bands(spec_of):
    spec = spec_of(MapKind.PLANAR_F)
    window = Window(xmin=0.5, xmax=2.5, ymin=-1.0, ymax=1.0)
    policy = EscapePolicy(budget=300)
    one = escape_grid(spec, window, 12, 10, policy, workers=1, bands=1)
    many = escape_grid(spec, window, 12, 10, policy, workers=1, bands=5)
    assert np.array_equal(one.classes, many.classes)
    assert np.array_equal(one.iterations, many.iterations)


def test_grid_does_not_depend_on_workers(spec_of):
    spec = spec_of(MapKind.PLANAR_F)
    window = Window(xmin=0.5, xmax=2.5, ymin=-1.0, ymax=1.0)
    policy = EscapePolicy(budget=300)
    serial = escape_grid(spec, window, 8, 8, policy, workers=1)
    parallel = escape_grid(spec, window, 8, 8, policy, workers=2)
    assert np.array_equal(serial.classes, parallel.classes)
    assert np.array_equal(serial.escape_iteration, parallel.escape_iteration)


def test_refined_grid_keeps_coarse_cells(spec_of):
    spec = spec_of(MapKind.PLANAR_F)
    window = Window(xmin=0.5, xmax=2.5, ymin=-1.0, ymax=1.0)
    policy = EscapePolicy(budget=200)
    coarse = escape_grid(spec, window, 9, 9, policy)
    nx, ny = refined_resolution(9, 9)
    assert (nx, ny) == (17, 17)
    fine = escape_grid(spec, window, nx, ny, policy)
    assert np.array_equal(fine.classes[::2, ::2], coarse.classes)


# ---------------------------------------------------------------------------
# components

def test_two_blobs_are_two_components(synthetic_grid):
    grid = synthetic_grid({(1, 1): ESC, (1, 2): ESC, (4, 4): ESC})
    components = label_components(grid, ESC, markers=[1 + 1j, 4 + 4j])
    assert [c.cell_count for c in components] == [2, 1]
    assert not any(c.touches_window_boundary for c in components)
    assert components[0].contains == [1 + 1j]
    assert components[1].contains == [4 + 4j]
    box = components[0].bounding_box
    assert (box.xmin, box.xmax) == (1.0, 2.0)


def test_dilation_closes_one_cell_gaps(synthetic_grid):
    grid = synthetic_grid({(3, 1): ESC, (3, 4): ESC})
    assert len(label_components(grid, ESC)) == 2
    merged = label_components(grid, ESC, dilate=True)
    assert len(merged) == 1


def test_uniform_grid_is_one_component_touching_boundary(synthetic_grid):
    components = label_components(synthetic_grid(), Classification.FIXED)
    assert len(components) == 1
    assert components[0].cell_count == 49
    assert components[0].touches_window_boundary


def test_component_containing(synthetic_grid):
    grid = synthetic_grid({(3, 3): ESC, (3, 4): ESC})
    component = component_containing(grid, 3 + 3j)
    assert component is not None and component.cell_count == 2
    assert component_containing(grid, 0j) is None


def _ringed(synthetic_grid, gap=None):
    cells = {(3, 3): ESC}
    for row in range(2, 5):
        for col in range(2, 5):
            if (row, col) != (3, 3):
                cells[(row, col)] = RET
    if gap is not None:
        del cells[gap]
    return synthetic_grid(cells)


def test_separation_witness(synthetic_grid):
    assert separation_witness(_ringed(synthetic_grid), 3 + 3j)
    assert not separation_witness(_ringed(synthetic_grid, gap=(2, 3)), 3 + 3j)
    assert separation_witness(_ringed(synthetic_grid), 2 + 2j)


@pytest.mark.slow
def test_component_of_two_is_bounded():
    passed, detail = check_bounded_component(CheckContext(params=MapParams(), workers=2))
    assert passed, detail
