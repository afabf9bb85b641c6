"""
Finite-difference Jacobians, Beltrami coefficients and dilatation estimates.

A planar map is either a MapSpec or a plain vectorised callable taking and
returning complex128 arrays (used for reference maps such as g with c = 0).
Three-space maps are MapSpecs of kind CYL3D or callables on (n, 3) arrays.
"""
import math
import time
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.stats import qmc

from app.core.config import (
    FD_RELATIVE_STEP,
    FD_STEP_FLOOR,
    OSCILLATION_ZONE,
    SEAM_BUFFER_STEPS,
)
from app.core.exceptions import MapDomainError, OrientationError, PreconditionError
from app.core.logging import logger
from app.core.workers import run_chunks, split_bands
from app.models.dilatation import AnnularRegion, DilatationReport, ScanRegion, ScanSummary
from app.models.grids import Window
from app.models.maps import CylPoint3, MapKind, MapSpec
from app.services.maps import evaluate, f3d_cartesian_kernel, seam_distance

MapLike = Union[MapSpec, Callable[[np.ndarray], np.ndarray]]


def fd_step(scale: np.ndarray) -> np.ndarray:
    return np.maximum(FD_RELATIVE_STEP * np.abs(scale), FD_STEP_FLOOR)


def _is_spatial(map_: MapLike) -> bool:
    return isinstance(map_, MapSpec) and map_.kind is MapKind.CYL3D


def _planar_function(map_: MapLike):
    if isinstance(map_, MapSpec):
        if not map_.kind.is_planar:
            raise MapDomainError(f"map {map_.kind.value} is not planar")
        return lambda z: evaluate(map_, z).value
    return map_


def _spatial_function(map_: MapLike):
    if isinstance(map_, MapSpec):
        if map_.kind is not MapKind.CYL3D:
            raise MapDomainError(f"map {map_.kind.value} does not act on three-space")
        lam = map_.params.lambda_
        return lambda xyz: f3d_cartesian_kernel(xyz, lam)
    return map_


def _steps(scale: np.ndarray, step: Optional[float]) -> np.ndarray:
    if step is None:
        return fd_step(scale)
    if not step > 0.0:
        raise PreconditionError(f"finite-difference step must be positive, got {step}")
    return np.full(scale.shape, float(step))


def planar_jacobians(map_: MapLike, z: np.ndarray, step: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference real Jacobians, shape (n, 2, 2), and the steps used."""
    z = np.asarray(z, dtype=np.complex128).reshape(-1)
    h = _steps(z, step)
    fn = _planar_function(map_)
    fx = (fn(z + h) - fn(z - h)) / (2.0 * h)
    fy = (fn(z + 1j * h) - fn(z - 1j * h)) / (2.0 * h)
    jac = np.empty((z.size, 2, 2))
    jac[:, 0, 0], jac[:, 0, 1] = fx.real, fy.real
    jac[:, 1, 0], jac[:, 1, 1] = fx.imag, fy.imag
    return jac, h


def spatial_jacobians(map_: MapLike, xyz: np.ndarray, step: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobians of a map of three-space, shape (n, 3, 3)."""
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    h = _steps(np.linalg.norm(xyz, axis=1), step)
    fn = _spatial_function(map_)
    jac = np.empty((xyz.shape[0], 3, 3))
    for axis in range(3):
        offset = np.zeros_like(xyz)
        offset[:, axis] = h
        jac[:, :, axis] = (fn(xyz + offset) - fn(xyz - offset)) / (2.0 * h[:, None])
    return jac, h


def beltrami_from_jacobian(jac: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|mu|, K and det J from real 2x2 Jacobians. |mu| >= 1 where det J <= 0."""
    fx = jac[..., 0, 0] + 1j * jac[..., 1, 0]
    fy = jac[..., 0, 1] + 1j * jac[..., 1, 1]
    f_z = 0.5 * (fx - 1j * fy)
    f_zbar = 0.5 * (fx + 1j * fy)
    det = np.linalg.det(jac)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_abs = np.abs(f_zbar) / np.abs(f_z)
        k = np.where(det > 0.0, (1.0 + mu_abs) / (1.0 - mu_abs), np.inf)
    return mu_abs, k, det


def dilatation_from_singular_values(sv: np.ndarray) -> np.ndarray:
    """max(outer, inner) dilatation from singular values sorted descending."""
    volume = np.prod(sv, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = sv[..., 0] ** 3 / volume
        inner = volume / sv[..., -1] ** 3
    return np.maximum(outer, inner)


def _planar_seams(map_: MapLike, z: np.ndarray) -> np.ndarray:
    if isinstance(map_, MapSpec):
        return seam_distance(map_, z)
    return np.full(np.shape(z), np.inf)


def _spatial_seams(map_: MapLike, xyz: np.ndarray) -> np.ndarray:
    if isinstance(map_, MapSpec):
        return seam_distance(map_, xyz)
    return np.full(xyz.shape[:-1], np.inf)


def _as_cartesian(p: Union[CylPoint3, Tuple[float, float, float]]) -> np.ndarray:
    if isinstance(p, CylPoint3):
        return np.array([p.to_cartesian()])
    return np.asarray(p, dtype=float).reshape(1, 3)


def jacobian_fd(map_: MapLike, z: Union[complex, CylPoint3], step: Optional[float] = None) -> DilatationReport:
    """
    Central-difference derivative matrix at one point. A point closer to a
    seam than SEAM_BUFFER_STEPS steps is reported UNRELIABLE, not rejected.
    """
    if isinstance(z, CylPoint3) or _is_spatial(map_):
        xyz = _as_cartesian(z)
        jac, h = spatial_jacobians(map_, xyz, step)
        seam = float(_spatial_seams(map_, xyz)[0])
        point = tuple(float(v) for v in xyz[0])
    else:
        point = complex(z)
        jac, h = planar_jacobians(map_, np.array([point]), step)
        seam = float(_planar_seams(map_, np.array([point]))[0])

    reliable = bool(seam >= SEAM_BUFFER_STEPS * h[0])
    if not reliable:
        logger.warning(f"Jacobian at {point} is UNRELIABLE: seam at distance {seam:.3g}, step {h[0]:.3g}")
    return DilatationReport(
        point=point,
        step=float(h[0]),
        jac=jac[0].tolist(),
        seam_distance=seam,
        reliable=reliable,
    )


def beltrami(map_: MapLike, z: complex, step: Optional[float] = None) -> DilatationReport:
    """|mu| = |f_zbar / f_z| and K = (1 + |mu|)/(1 - |mu|) at a planar point."""
    if _is_spatial(map_):
        raise MapDomainError("the Beltrami coefficient is defined for planar maps only")
    report = jacobian_fd(map_, complex(z), step)
    mu_abs, k, det = beltrami_from_jacobian(np.array(report.jac))
    if not det > 0.0:
        raise OrientationError(f"Jacobian determinant {float(det):.3g} at {z} is not positive")
    report.mu_abs = float(mu_abs)
    report.k_estimate = float(k)
    return report


def dilatation_3d(map_: MapLike, p: CylPoint3, step: Optional[float] = None) -> DilatationReport:
    if p.r == 0.0:
        raise PreconditionError("dilatation is not sampled on the axis r = 0")
    report = jacobian_fd(map_, p, step)
    jac = np.array(report.jac)
    det = float(np.linalg.det(jac))
    if not det > 0.0:
        raise OrientationError(f"Jacobian determinant {det:.3g} at {report.point} is not positive")
    sv = np.linalg.svd(jac, compute_uv=False)
    report.singular_values = sv.tolist()
    report.k_estimate = float(dilatation_from_singular_values(sv))
    return report


# ---------------------------------------------------------------------------
# scans

def sample_region(region: ScanRegion, samples: int, seed: int, spatial: bool = False) -> np.ndarray:
    """
    Scrambled Sobol points in the region: complex for planar scans, (n, 3)
    for spatial ones. Annular regions are sampled uniformly in area.
    """
    sobol = qmc.Sobol(d=3 if spatial else 2, scramble=True, seed=seed)
    u = sobol.random_base2(m=max(0, math.ceil(math.log2(samples))))[:samples]

    if isinstance(region, Window):
        x = region.xmin + u[:, 0] * (region.xmax - region.xmin)
        y = region.ymin + u[:, 1] * (region.ymax - region.ymin)
        x3_range = (-1.0, 1.0)
    else:
        r = np.sqrt(region.rmin ** 2 + u[:, 0] * (region.rmax ** 2 - region.rmin ** 2))
        t = -np.pi + 2.0 * np.pi * u[:, 1]
        x, y = r * np.cos(t), r * np.sin(t)
        x3_range = (region.x3min, region.x3max)

    if not spatial:
        return x + 1j * y
    x3 = x3_range[0] + u[:, 2] * (x3_range[1] - x3_range[0])
    return np.stack([x, y, x3], axis=1)


def _jacobian_chunk(task):
    map_, points, step, spatial = task
    if spatial:
        jac, h = spatial_jacobians(map_, points, step)
        seams = _spatial_seams(map_, points)
    else:
        jac, h = planar_jacobians(map_, points, step)
        seams = _planar_seams(map_, points)
    return jac, h, seams


def scan_dilatation(
    map_: MapLike,
    region: ScanRegion,
    samples: int,
    seed: int = 0,
    workers: Optional[int] = 1,
    step: Optional[float] = None,
    bins: int = 20,
) -> ScanSummary:
    """
    Estimate K over a deterministic quasi-random sample of the region.

    Samples within SEAM_BUFFER_STEPS steps of a seam are kept as UNRELIABLE
    reports and left out of the maximum; for g, samples in the oscillation
    zone 1 - OSCILLATION_ZONE < |z| < 1 are excluded altogether.
    """
    if samples < 1:
        raise PreconditionError("samples must be at least 1")
    spatial = _is_spatial(map_)
    points = sample_region(region, samples, seed, spatial)

    excluded = 0
    if isinstance(map_, MapSpec) and map_.kind is MapKind.PLANAR_G:
        r = np.abs(points)
        oscillating = (r > 1.0 - OSCILLATION_ZONE) & (r < 1.0)
        excluded = int(np.count_nonzero(oscillating))
        points = points[~oscillating]

    if not isinstance(map_, MapSpec):
        workers = 1
    started = time.time()
    logger.info(f"Scanning dilatation at {len(points)} points ({excluded} excluded)")

    bands = split_bands(len(points), max(1, workers or 1) * 4) if len(points) else []
    results = run_chunks(_jacobian_chunk, [(map_, points[b], step, spatial) for b in bands], workers)
    if results:
        jac = np.concatenate([res[0] for res in results])
        h = np.concatenate([res[1] for res in results])
        seams = np.concatenate([res[2] for res in results])
    else:
        jac = np.empty((0, 3, 3) if spatial else (0, 2, 2))
        h = seams = np.empty(0)

    reliable = seams >= SEAM_BUFFER_STEPS * h
    det = np.linalg.det(jac) if len(jac) else np.empty(0)
    degenerate = ~(det > 0.0)
    if spatial:
        sv = np.linalg.svd(jac, compute_uv=False) if len(jac) else np.empty((0, 3))
        k = dilatation_from_singular_values(sv)
        mu = None
    else:
        mu, k, _ = beltrami_from_jacobian(jac)
        sv = None

    summary = ScanSummary(
        samples=samples,
        excluded=excluded,
        unreliable=int(np.count_nonzero(~reliable)),
        degenerate=int(np.count_nonzero(reliable & degenerate)),
    )
    valid = reliable & ~degenerate
    if valid.any():
        best = int(np.flatnonzero(valid)[np.argmax(k[valid])])
        summary.max_k = float(k[best])
        summary.max_k_point = _point_value(points[best], spatial)
        counts, edges = np.histogram(k[valid], bins=bins)
        summary.histogram_counts = counts.tolist()
        summary.histogram_edges = edges.tolist()

    reports: List[DilatationReport] = []
    for idx in range(len(points)):
        reports.append(DilatationReport(
            point=_point_value(points[idx], spatial),
            step=float(h[idx]),
            jac=jac[idx].tolist(),
            mu_abs=None if mu is None or degenerate[idx] else float(mu[idx]),
            singular_values=None if sv is None else sv[idx].tolist(),
            k_estimate=None if degenerate[idx] else float(k[idx]),
            seam_distance=float(seams[idx]),
            reliable=bool(reliable[idx]),
        ))
    summary.reports = reports

    if summary.unreliable:
        logger.warning(f"{summary.unreliable} of {len(points)} dilatation samples are UNRELIABLE (near a seam)")
    if summary.degenerate:
        logger.warning(f"{summary.degenerate} samples have a non-positive Jacobian determinant")
    logger.info(f"Dilatation scan finished in {time.time() - started:.2f} s, max K = {summary.max_k}")
    return summary


def _point_value(point, spatial: bool):
    if spatial:
        return tuple(float(v) for v in point)
    return complex(point)
