import time
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from app.core.exceptions import PreconditionError
from app.core.logging import logger
from app.core.workers import run_chunks, split_bands
from app.models.grids import ComponentReport, EscapeGrid, Window
from app.models.maps import Annulus, MapSpec
from app.models.orbits import Classification, EscapePolicy
from app.services.maps import mobius_L_kernel
from app.services.orbits import classify_batch

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def sample_annulus(n: int, count: int, seed: int, right_half: bool = False) -> np.ndarray:
    """
    `count` points uniform (in area) in the annulus A_n, drawn from a
    generator seeded with `seed`. With `right_half` the arguments are drawn
    from (-pi/2, pi/2) so every point has Re z > 0.
    """
    if count < 1:
        raise PreconditionError("count must be at least 1")
    annulus = Annulus(n=n)
    rng = np.random.default_rng(seed)
    u, v = rng.random(count), rng.random(count)
    r = np.sqrt(annulus.rin ** 2 + u * (annulus.rout ** 2 - annulus.rin ** 2))
    if right_half:
        t = np.pi * (v - 0.5)
    else:
        t = np.pi * (2.0 * v - 1.0)
    return r * np.exp(1j * t)


def sample_ring_image(n: int, count: int, seed: int) -> np.ndarray:
    """Points of L(A_n)."""
    return mobius_L_kernel(sample_annulus(n, count, seed))


def ring_containment(window: Window, n: int = 2, count: int = 1000, seed: int = 0) -> bool:
    """True when every sampled point of L(A_n) lies inside the window."""
    ring = sample_ring_image(n, count, seed)
    inside = (
        (ring.real >= window.xmin) & (ring.real <= window.xmax)
        & (ring.imag >= window.ymin) & (ring.imag <= window.ymax)
    )
    return bool(inside.all())


# ---------------------------------------------------------------------------
# escape grids

def _grid_band(task):
    spec, policy, xs, ys = task
    points = (xs[None, :] + 1j * ys[:, None]).reshape(-1)
    result = classify_batch(spec, points, policy)
    shape = (len(ys), len(xs))
    return (
        result.classification.reshape(shape),
        result.escape_iteration.reshape(shape),
        result.iterations.reshape(shape),
    )


def escape_grid(
    spec: MapSpec,
    window: Window,
    nx: int,
    ny: int,
    policy: EscapePolicy = EscapePolicy(),
    workers: Optional[int] = 1,
    bands: Optional[int] = None,
) -> EscapeGrid:
    """
    Classify every cell centre of the window. Rows are split into bands that
    are computed independently and stacked in order, so the result does not
    depend on `workers` or `bands`.
    """
    if nx < 2 or ny < 2:
        raise PreconditionError("grid resolution must be at least 2 x 2")
    xs, ys = window.lattice(nx, ny)
    bands = bands or max(1, (workers or 1) * 4)
    tasks = [(spec, policy, xs, ys[band]) for band in split_bands(ny, bands)]

    started = time.time()
    logger.info(f"Computing {nx}x{ny} escape grid for {spec.kind.value} on {window.as_tuple()}")
    results = run_chunks(_grid_band, tasks, workers)
    grid = EscapeGrid(
        window=window,
        nx=nx,
        ny=ny,
        spec=spec,
        policy=policy,
        classes=np.vstack([r[0] for r in results]),
        escape_iteration=np.vstack([r[1] for r in results]),
        iterations=np.vstack([r[2] for r in results]),
    )
    logger.info(f"Escape grid finished in {time.time() - started:.2f} s: {grid.counts()}")
    return grid


# ---------------------------------------------------------------------------
# components

def _touches_boundary(mask: np.ndarray) -> bool:
    return bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())


def _bounding_box(grid: EscapeGrid, rows: np.ndarray, cols: np.ndarray) -> Window:
    dx, dy = grid.spacing
    w = grid.window
    x0, x1 = w.xmin + cols.min() * dx, w.xmin + cols.max() * dx
    y0, y1 = w.ymin + rows.min() * dy, w.ymin + rows.max() * dy
    # a single-cell component is widened to its cell so the box stays nondegenerate
    if x1 == x0:
        x0, x1 = x0 - dx / 2, x1 + dx / 2
    if y1 == y0:
        y0, y1 = y0 - dy / 2, y1 + dy / 2
    return Window(xmin=x0, xmax=x1, ymin=y0, ymax=y1)


def class_mask(grid: EscapeGrid, which: Classification, dilate: bool = False) -> np.ndarray:
    mask = grid.classes == which.code
    if dilate:
        mask = ndimage.binary_dilation(mask, structure=FOUR_CONNECTED)
    return mask


def label_components(
    grid: EscapeGrid,
    which: Classification,
    dilate: bool = False,
    markers: Iterable[complex] = (),
) -> List[ComponentReport]:
    """
    4-connected components of the cells classified `which`. With `dilate`
    the mask is first grown by one cell, a grid surrogate for the closure.
    """
    labels, count = ndimage.label(class_mask(grid, which, dilate), structure=FOUR_CONNECTED)
    marker_cells = [(z, grid.cell_of(z)) for z in markers]

    reports = []
    for label, (row_slice, col_slice) in enumerate(ndimage.find_objects(labels), start=1):
        rows, cols = np.nonzero(labels[row_slice, col_slice] == label)
        rows, cols = rows + row_slice.start, cols + col_slice.start
        touches = (
            row_slice.start == 0 or col_slice.start == 0
            or row_slice.stop == grid.ny or col_slice.stop == grid.nx
        )
        reports.append(ComponentReport(
            label=label,
            classification=which,
            cell_count=int(rows.size),
            bounding_box=_bounding_box(grid, rows, cols),
            touches_window_boundary=touches,
            contains=[z for z, cell in marker_cells if labels[cell] == label],
        ))
    logger.debug(f"{count} {which.value} components (dilate={dilate})")
    return reports


def component_containing(
    grid: EscapeGrid,
    z: complex,
    which: Classification = Classification.ESCAPING,
    dilate: bool = False,
) -> Optional[ComponentReport]:
    for report in label_components(grid, which, dilate, markers=[z]):
        if report.contains:
            return report
    return None


def separation_witness(grid: EscapeGrid, marker: complex) -> bool:
    """
    True when every 4-connected path of cells from the marker cell to the
    window boundary passes through a RETURNING cell.
    """
    cell = grid.cell_of(marker)
    free = grid.classes != Classification.RETURNING.code
    if not free[cell]:
        return True
    labels, _ = ndimage.label(free, structure=FOUR_CONNECTED)
    return not _touches_boundary(labels == labels[cell])


def refined_resolution(nx: int, ny: int) -> Tuple[int, int]:
    """Resolution whose lattice contains every centre of an (nx, ny) lattice."""
    return 2 * nx - 1, 2 * ny - 1
