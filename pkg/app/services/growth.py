"""
Maximum modulus M(r, f), growth curves M(r, f)/r and the search for circles
|y| = L covered by the image of an annulus R < |x| < rho.
"""
import math
import time
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from app.core.exceptions import PreconditionError
from app.core.logging import logger
from app.models.grids import CoverageReport, CoverageSearch, CoverageWitness, GrowthCurve
from app.models.maps import MapKind, MapSpec
from app.services.dilatation import planar_jacobians
from app.services.maps import evaluate, f3d_cartesian_kernel

COVERAGE_TOLERANCE = 1e-9
NEWTON_ITERATIONS = 60
BACKTRACK_STEPS = 30


# ---------------------------------------------------------------------------
# maximum modulus

def _planar_modulus(spec: MapSpec, r: float, theta: np.ndarray) -> np.ndarray:
    value = evaluate(spec, r * np.exp(1j * np.asarray(theta, dtype=float))).value
    return np.abs(value)


def _spatial_modulus(spec: MapSpec, r: float, theta: np.ndarray, latitude: np.ndarray) -> np.ndarray:
    theta, latitude = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(latitude, dtype=float))
    xyz = np.stack([
        r * np.cos(latitude) * np.cos(theta),
        r * np.cos(latitude) * np.sin(theta),
        r * np.sin(latitude),
    ], axis=-1)
    return np.linalg.norm(f3d_cartesian_kernel(xyz, spec.params.lambda_), axis=-1)


def max_modulus(spec: MapSpec, r: float, samples: int = 256) -> float:
    """
    max |f(x)| over |x| = r: the best of `samples` equispaced points, then a
    bounded scalar search between the neighbours of the best sample.
    Three-space maps are sampled on latitude circles that include the equator.
    """
    if samples < 16:
        raise PreconditionError("max_modulus needs at least 16 samples")
    if not r > 0.0:
        raise PreconditionError(f"radius must be positive, got {r}")

    theta = -np.pi + 2.0 * np.pi * np.arange(samples) / samples
    spacing = 2.0 * np.pi / samples

    if spec.kind is MapKind.CYL3D:
        rings = 2 * (samples // 16) + 1
        latitude = np.linspace(-np.pi / 2, np.pi / 2, rings)
        moduli = _spatial_modulus(spec, r, theta[None, :], latitude[:, None])
        ring, column = np.unravel_index(np.argmax(moduli), moduli.shape)
        best = float(moduli[ring, column])
        objective = lambda t: -float(_spatial_modulus(spec, r, t, latitude[ring]))
    else:
        moduli = _planar_modulus(spec, r, theta)
        column = int(np.argmax(moduli))
        best = float(moduli[column])
        objective = lambda t: -float(_planar_modulus(spec, r, np.array([t]))[0])

    center = theta[column]
    refined = minimize_scalar(
        objective,
        bounds=(center - spacing, center + spacing),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if refined.success:
        best = max(best, -float(refined.fun))
    return best


def growth_ratio(spec: MapSpec, radii: Sequence[float], samples: int = 256) -> GrowthCurve:
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must be strictly increasing")
    m_values = [max_modulus(spec, r, samples) for r in radii]
    ratios = [m / r for m, r in zip(m_values, radii)]
    logger.debug(f"Growth of {spec.kind.value}: {list(zip(radii, ratios))}")
    return GrowthCurve(radii=radii, m_values=m_values, ratios=ratios, samples=samples)


# ---------------------------------------------------------------------------
# circle coverage

class AnnulusScan(NamedTuple):
    """Images of a polar lattice of the open annulus R < |x| < rho."""

    points: np.ndarray
    images: np.ndarray


def scan_annulus(spec: MapSpec, inner: float, outer: float, radial: int = 256, angular: int = 1024) -> AnnulusScan:
    if not 0.0 <= inner < outer:
        raise PreconditionError(f"annulus needs 0 <= R < rho, got R={inner}, rho={outer}")
    r = inner + (np.arange(radial) + 0.5) * ((outer - inner) / radial)
    t = -np.pi + (np.arange(angular) + 0.5) * (2.0 * np.pi / angular)
    points = (r[:, None] * np.exp(1j * t[None, :])).reshape(-1)
    images, overflowed = evaluate(spec, points)
    images = np.where(overflowed, np.nan, images)
    return AnnulusScan(points, images)


def _newton(spec: MapSpec, x: np.ndarray, y: np.ndarray, tol: np.ndarray):
    """Damped Newton iteration for f(x) = y with finite-difference Jacobians."""
    x = x.copy()
    residual = np.abs(evaluate(spec, x).value - y)
    active = np.flatnonzero(np.isfinite(residual) & (residual >= tol))

    for _ in range(NEWTON_ITERATIONS):
        if not active.size:
            break
        xa, ya = x[active], y[active]
        error = evaluate(spec, xa).value - ya
        jac, _ = planar_jacobians(spec, xa)
        a, b = jac[:, 0, 0], jac[:, 0, 1]
        c, d = jac[:, 1, 0], jac[:, 1, 1]
        det = a * d - b * c
        solvable = np.isfinite(det) & (det != 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = (d * error.real - b * error.imag) / det
            dy = (-c * error.real + a * error.imag) / det
        delta = np.where(solvable, dx + 1j * dy, 0.0)

        current = residual[active]
        improved = np.zeros(active.size, dtype=bool)
        alpha = 1.0
        for _ in range(BACKTRACK_STEPS):
            pending = np.flatnonzero(~improved & solvable)
            if not pending.size:
                break
            trial = xa[pending] - alpha * delta[pending]
            trial_residual = np.abs(evaluate(spec, trial).value - ya[pending])
            better = np.isfinite(trial_residual) & (trial_residual < current[pending])
            accepted = pending[better]
            x[active[accepted]] = trial[better]
            residual[active[accepted]] = trial_residual[better]
            improved[accepted] = True
            alpha *= 0.5

        keep = improved & (residual[active] >= tol[active])
        active = active[keep]
    return x, residual


def circle_coverage(
    spec: MapSpec,
    inner: float,
    outer: float,
    target_radius: float,
    targets: int = 64,
    candidates: int = 8,
    scan: Optional[AnnulusScan] = None,
    tol: float = COVERAGE_TOLERANCE,
) -> CoverageReport:
    """
    For each of `targets` equispaced points y on |y| = target_radius, look for
    x with inner < |x| < outer and |f(x) - y| < tol * max(1, |y|): the
    `candidates` lattice points whose images lie closest to y seed a damped
    Newton iteration, and the first converged seed inside the annulus is
    kept after re-evaluation. Targets without one are NO_PREIMAGE.
    """
    if not target_radius > 0.0:
        raise PreconditionError("target radius must be positive")
    if targets < 1:
        raise PreconditionError("targets must be at least 1")
    scan = scan or scan_annulus(spec, inner, outer)

    angles = 2.0 * np.pi * np.arange(targets) / targets
    y = target_radius * np.exp(1j * angles)
    k = min(candidates, scan.points.size)
    nearest = np.empty((targets, k), dtype=np.int64)
    for index, target in enumerate(y):
        distance = np.abs(scan.images - target)
        distance[np.isnan(distance)] = np.inf
        closest = np.argpartition(distance, k - 1)[:k]
        nearest[index] = closest[np.argsort(distance[closest], kind="stable")]

    seeds = scan.points[nearest].reshape(-1)
    wanted = np.repeat(y, k)
    tolerance = tol * np.maximum(1.0, np.abs(wanted))
    solutions, residuals = _newton(spec, seeds, wanted, tolerance)

    modulus = np.abs(solutions)
    good = (residuals < tolerance) & (modulus > inner) & (modulus < outer)
    good = good.reshape(targets, k)
    solutions = solutions.reshape(targets, k)

    witnesses = []
    for index in range(targets):
        witness = CoverageWitness(target=complex(y[index]))
        for hit in np.flatnonzero(good[index]):
            x = complex(solutions[index, hit])
            check = evaluate(spec, np.array([x]))
            residual = abs(complex(check.value[0]) - complex(y[index]))
            if not check.overflowed[0] and residual < tol * max(1.0, target_radius):
                witness = CoverageWitness(target=complex(y[index]), preimage=x, residual=residual, verified=True)
                break
        witnesses.append(witness)

    report = CoverageReport(inner_radius=inner, outer_radius=outer, target_radius=target_radius, witnesses=witnesses)
    missing = targets - report.covered
    if missing:
        logger.warning(f"{missing} of {targets} targets on |y| = {target_radius:.6g} have NO_PREIMAGE")
    return report


def max_covered_radius(
    spec: MapSpec,
    inner: float,
    outer: float,
    factor: float = 2.0,
    rungs: int = 8,
    targets: int = 64,
    bisection_steps: int = 8,
) -> CoverageSearch:
    """
    Largest radius L of the ladder outer * factor**k (1 <= k <= rungs) whose
    circle is fully covered, refined by bisection (in log scale) against the
    next rung above it. The ladder starts above outer: targets on |y| = outer
    where f is close to the identity have preimages on the boundary of the
    open annulus.
    """
    if not factor > 1.0:
        raise PreconditionError("ladder factor must exceed 1")
    if rungs < 1:
        raise PreconditionError("the ladder needs at least one rung")
    started = time.time()
    scan = scan_annulus(spec, inner, outer)
    search = CoverageSearch(inner_radius=inner, outer_radius=outer)

    def covered(radius: float) -> bool:
        fraction = circle_coverage(spec, inner, outer, radius, targets, scan=scan).fraction
        search.tested.append((radius, fraction))
        return fraction == 1.0

    ladder = [outer * factor ** k for k in range(1, rungs + 1)]
    full = [covered(radius) for radius in ladder]
    if not any(full):
        logger.warning(f"No circle of the ladder {ladder[0]:.6g} .. {ladder[-1]:.6g} is fully covered")
        return search

    top = max(k for k, ok in enumerate(full) if ok)
    lower = ladder[top]
    upper = ladder[top + 1] if top + 1 < len(ladder) else None

    if upper is not None:
        for _ in range(bisection_steps):
            middle = math.sqrt(lower * upper)
            if covered(middle):
                lower = middle
            else:
                upper = middle

    search.best_radius = lower
    logger.info(f"Largest fully covered radius {lower:.6g} after {len(search.tested)} circles "
                f"in {time.time() - started:.2f} s")
    return search
