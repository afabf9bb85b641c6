import csv
import hashlib
import math
import os
from typing import Iterable, List, Sequence

import numpy as np
from PIL import Image

from app.core.logging import logger
from app.models.dilatation import ScanSummary
from app.models.grids import ComponentReport, CoverageReport, EscapeGrid, GrowthCurve
from app.models.orbits import Classification, OrbitRecord

# Fixed gray levels; ESCAPING cells use a ramp from ESCAPE_DARKEST to 255.
RETURNING_LEVEL = 128
FIXED_LEVEL = 64
UNDETERMINED_LEVEL = 0
ESCAPE_DARKEST = 160


def fmt(value: float) -> str:
    """Shortest round-tripping text form of a float."""
    return repr(float(value))


def escape_levels(escape_iteration: np.ndarray, budget: int) -> np.ndarray:
    """Gray level of an escaping cell: 255 for the earliest escapes, darker later."""
    steps = np.clip(escape_iteration, 1, budget).astype(float)
    scale = math.log(budget) if budget > 1 else 1.0
    ramp = np.log(steps) / scale
    return (255 - np.rint((255 - ESCAPE_DARKEST) * ramp)).astype(np.uint8)


def grid_pixels(grid: EscapeGrid) -> np.ndarray:
    """(ny, nx) uint8 gray levels with image row 0 at the top edge ymax."""
    levels = np.full(grid.classes.shape, UNDETERMINED_LEVEL, dtype=np.uint8)
    levels[grid.classes == Classification.RETURNING.code] = RETURNING_LEVEL
    levels[grid.classes == Classification.FIXED.code] = FIXED_LEVEL
    escaping = grid.classes == Classification.ESCAPING.code
    levels[escaping] = escape_levels(grid.escape_iteration[escaping], grid.policy.budget)
    return np.flipud(levels)


def grid_colors(grid: EscapeGrid) -> np.ndarray:
    """(ny, nx, 3) colours: escaping cells ramp from orange to white, the rest gray."""
    gray = grid_pixels(grid)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    escaping = np.flipud(grid.classes == Classification.ESCAPING.code)
    level = gray[escaping].astype(np.int16)
    rgb[escaping, 0] = 255
    rgb[escaping, 1] = level
    rgb[escaping, 2] = np.clip(2 * level - 255, 0, 255)
    return rgb


class OutputWriter:
    """Writes the artifacts of one run into a directory and digests them."""

    def __init__(self, directory: str):
        self.directory = directory
        self.written: List[str] = []

    def _path(self, name: str) -> str:
        os.makedirs(self.directory, exist_ok=True)
        path = os.path.join(self.directory, name)
        self.written.append(path)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        path = self._path(name)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\r\n")
            writer.writerow(header)
            writer.writerows(rows)
        logger.info(f"Wrote {path}")
        return path

    def write_image(self, name: str, pixels: np.ndarray) -> str:
        """P5 for (h, w) arrays, P6 for (h, w, 3) arrays."""
        path = self._path(name)
        Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path, format="PPM")
        logger.info(f"Wrote {path}")
        return path

    def digest(self) -> str:
        sha = hashlib.sha256()
        for path in self.written:
            sha.update(os.path.basename(path).encode("utf-8"))
            with open(path, "rb") as f:
                sha.update(f.read())
        return sha.hexdigest()

    def remove_all(self):
        for path in self.written:
            try:
                if os.path.exists(path):
                    os.remove(path)
            except OSError as e:
                logger.error(f"Could not remove partial output {path}: {e}")
        self.written = []


# ---------------------------------------------------------------------------
# CSV rows

ORBIT_HEADER = ["k", "re", "im", "modulus"]


def orbit_rows(record: OrbitRecord):
    for k, z in zip(record.indices, record.points):
        yield [k, fmt(z.real), fmt(z.imag), fmt(abs(z))]


BATCH_HEADER = ["start_re", "start_im", "classification", "iterations", "returns", "escape_iteration", "sign_flip"]


def batch_rows(records: Sequence[OrbitRecord]):
    for r in records:
        yield [
            fmt(r.start.real), fmt(r.start.imag), r.classification.value, r.iterations_used, r.returns,
            "" if r.escape_iteration is None else r.escape_iteration,
            "" if r.sign_flip_index is None else r.sign_flip_index,
        ]


COMPONENT_HEADER = ["label", "classification", "cell_count", "xmin", "xmax", "ymin", "ymax",
                    "touches_window_boundary", "contains"]


def component_rows(reports: Sequence[ComponentReport]):
    for c in reports:
        box = c.bounding_box
        yield [
            c.label, c.classification.value, c.cell_count,
            fmt(box.xmin), fmt(box.xmax), fmt(box.ymin), fmt(box.ymax),
            str(c.touches_window_boundary).lower(),
            " ".join(f"{fmt(z.real)}{'+' if z.imag >= 0 else ''}{fmt(z.imag)}j" for z in c.contains),
        ]


PLANAR_DILATATION_HEADER = ["re", "im", "step", "mu_abs", "k_estimate", "reliability"]
SPATIAL_DILATATION_HEADER = ["x1", "x2", "x3", "step", "sigma1", "sigma2", "sigma3", "k_estimate", "reliability"]


def dilatation_rows(summary: ScanSummary, spatial: bool):
    def optional(value):
        return "" if value is None else fmt(value)

    for report in summary.reports:
        flag = "RELIABLE" if report.reliable else "UNRELIABLE"
        if spatial:
            sv = report.singular_values or [None, None, None]
            yield [*(fmt(v) for v in report.point), fmt(report.step), *(optional(v) for v in sv),
                   optional(report.k_estimate), flag]
        else:
            z = complex(report.point)
            yield [fmt(z.real), fmt(z.imag), fmt(report.step), optional(report.mu_abs),
                   optional(report.k_estimate), flag]


GROWTH_HEADER = ["r", "max_modulus", "ratio"]


def growth_rows(curve: GrowthCurve):
    for r, m, ratio in zip(curve.radii, curve.m_values, curve.ratios):
        yield [fmt(r), fmt(m), fmt(ratio)]


COVERAGE_HEADER = ["target_re", "target_im", "preimage_re", "preimage_im", "residual", "status"]


def coverage_rows(report: CoverageReport):
    for w in report.witnesses:
        if w.preimage is None:
            yield [fmt(w.target.real), fmt(w.target.imag), "", "", "", w.status]
        else:
            yield [fmt(w.target.real), fmt(w.target.imag), fmt(w.preimage.real), fmt(w.preimage.imag),
                   fmt(w.residual), w.status]
