"""
The invariant suite behind the `verify` command. Every check is a function of
a CheckContext returning (passed, detail); `run_suite` times the checks and
turns unexpected errors into failed results.
"""
import math
import time
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from app.core.exceptions import EscapeKitError
from app.core.logging import logger
from app.models.dilatation import AnnularRegion
from app.models.grids import Window
from app.models.maps import Annulus, MapKind, MapParams, MapSpec
from app.models.orbits import Classification, EscapePolicy
from app.models.verification import CheckResult, Suite
from app.services.dilatation import beltrami, scan_dilatation
from app.services.grids import (
    component_containing,
    escape_grid,
    ring_containment,
    sample_annulus,
    sample_ring_image,
    separation_witness,
)
from app.services.growth import circle_coverage, growth_ratio, max_covered_radius
from app.services.maps import a_kernel, evaluate, f3d_cartesian_kernel, g_kernel
from app.services.orbits import classify_batch, find_sign_flips, integer_ray_check, verify_rotation_lower

SEAM_EPSILON = 1e-7
SEAM_LIPSCHITZ = 100.0

# Window holding z = 2 and all of L(A_2) whose lattice has spacing exactly 1/128.
SEPARATION_WINDOW = Window(xmin=0.0, xmax=511 / 128, ymin=-2.0, ymax=255 / 128)
SEPARATION_RESOLUTION = 512


class CheckContext(NamedTuple):
    params: MapParams
    seed: int = 0
    workers: Optional[int] = 1

    def spec(self, kind: MapKind) -> MapSpec:
        return MapSpec(kind=kind, params=self.params)


Outcome = Tuple[bool, str]


def seam_jumps(spec: MapSpec, z: np.ndarray, normal: np.ndarray, eps: float = SEAM_EPSILON) -> np.ndarray:
    """|F(z + eps u) - F(z - eps u)| / eps across a seam with unit normal u."""
    plus = evaluate(spec, z + eps * normal).value
    minus = evaluate(spec, z - eps * normal).value
    return np.abs(plus - minus) / eps


# ---------------------------------------------------------------------------
# maps

def check_annulus_march(ctx: CheckContext) -> Outcome:
    worst_slack, worst_law = 0.0, 0.0
    for n in range(2, 21):
        z = sample_annulus(n, 1000, ctx.seed + n)
        image = g_kernel(z, ctx.params.c)
        target = Annulus(n=n + 1)
        modulus = np.abs(image)
        slack = np.maximum(target.rin - modulus, modulus - target.rout).max()
        worst_slack = max(worst_slack, float(slack))
        law = np.abs(modulus - 1.0 / (2.0 - np.abs(z))).max()
        worst_law = max(worst_law, float(law))
    passed = worst_slack <= 1e-12 and worst_law <= 1e-12
    return passed, f"max radius excess {worst_slack:.3g}, max modulus-law error {worst_law:.3g}"


def check_identity_sector(ctx: CheckContext) -> Outcome:
    rng = np.random.default_rng(ctx.seed)
    y = rng.uniform(-3.0, 3.0, 1000)
    x = np.abs(y) + 1.0 + rng.uniform(0.0, 3.0, 1000)
    z = x + 1j * y
    error = float(np.abs(g_kernel(z, ctx.params.c) - z).max())
    return error <= 1e-12, f"max |g(z) - z| = {error:.3g}"


def _g_seams(count: int, rng: np.random.Generator):
    t = rng.uniform(-np.pi, np.pi, count)
    radial = np.exp(1j * t)
    yield "r=1/2", 0.5 * radial, radial
    yield "r=1", radial, radial
    yield "r=2", 2.0 * radial, radial
    # |t| = a(r) is the pair of segments Re z = 1 + |Im z| for 1 <= r <= 2
    r = rng.uniform(1.001, 1.999, count)
    sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    z = r * np.exp(1j * sign * a_kernel(r))
    yield "|t|=a(r)", z, (1.0 - 1j * sign) / math.sqrt(2.0)


def _f_seams(count: int, rng: np.random.Generator):
    y = rng.uniform(1e-3, 0.5, count) * np.where(rng.random(count) < 0.5, -1.0, 1.0)
    normal = (1.0 + 1j * np.sign(y)) / math.sqrt(2.0)
    yield "s=0", -np.abs(y) + 1j * y, normal
    yield "s=-1", -1.0 - np.abs(y) + 1j * y, normal


def check_seam_continuity(ctx: CheckContext) -> Outcome:
    rng = np.random.default_rng(ctx.seed)
    details, passed = [], True
    for spec, seams in ((ctx.spec(MapKind.PLANAR_G), _g_seams), (ctx.spec(MapKind.PLANAR_F), _f_seams)):
        for name, z, normal in seams(1000, rng):
            worst = float(seam_jumps(spec, z, normal).max())
            passed &= worst <= SEAM_LIPSCHITZ
            details.append(f"{spec.kind.value}:{name} {worst:.3g}")
    return passed, "; ".join(details)


def check_cylinder_map(ctx: CheckContext) -> Outcome:
    rng = np.random.default_rng(ctx.seed)
    lam = ctx.params.lambda_
    p = rng.uniform(-1.0, 1.0, (10_000, 3))
    involution = float(np.abs(f3d_cartesian_kernel(f3d_cartesian_kernel(p, lam), lam) - p).max())
    homogeneity = float(np.abs(f3d_cartesian_kernel(2.0 * p, lam) - 2.0 * f3d_cartesian_kernel(p, lam)).max())
    curve = growth_ratio(ctx.spec(MapKind.CYL3D), [1.0, 10.0, 100.0])
    ratio_error = max(abs(q - math.exp(lam)) for q in curve.ratios)
    passed = involution < 1e-12 and homogeneity < 1e-12 and ratio_error <= 1e-9
    return passed, f"involution {involution:.3g}, homogeneity {homogeneity:.3g}, ratio error {ratio_error:.3g}"


# ---------------------------------------------------------------------------
# orbits

def check_integer_ray(ctx: CheckContext) -> Outcome:
    deviation = integer_ray_check(2, 100, ctx.params)
    return deviation < 1e-6, f"max |f^k(2) - (k+2)| = {deviation:.3g}"


def check_rotation_inequalities(ctx: CheckContext) -> Outcome:
    failures, worst = 0, math.inf
    per_annulus = math.ceil(10_000 / 9)
    for n in range(2, 11):
        for z in sample_annulus(n, per_annulus, ctx.seed + n, right_half=True):
            check = verify_rotation_lower(complex(z), ctx.params.c)
            failures += not check.passed
            worst = min(worst, check.lower_margin)
    return failures == 0, f"{failures} failures in {9 * per_annulus} samples, smallest lower margin {worst:.3g}"


def check_sign_flips(ctx: CheckContext) -> Outcome:
    worst, missing = 0, 0
    for n in range(2, 11):
        index = find_sign_flips(sample_annulus(n, 1000, ctx.seed + n, right_half=True), ctx.params.c, 1000)
        missing += int(np.count_nonzero(index < 0))
        worst = max(worst, int(index.max()))
    return missing == 0, f"{missing} NOT_FOUND, largest flip index {worst}"


def check_ring_returns(ctx: CheckContext) -> Outcome:
    spec = ctx.spec(MapKind.PLANAR_F)
    policy = EscapePolicy()
    bad = 0
    fewest = math.inf
    for n in range(2, 11):
        result = classify_batch(spec, sample_ring_image(n, 100, ctx.seed + n), policy)
        returning = result.classification == Classification.RETURNING.code
        bad += int(np.count_nonzero(~returning | (result.returns < 5)))
        fewest = min(fewest, int(result.returns.min()))
    return bad == 0, f"{bad} points not RETURNING with >= 5 returns, fewest returns {fewest}"


# ---------------------------------------------------------------------------
# grids and growth

def check_bounded_component(ctx: CheckContext) -> Outcome:
    window = SEPARATION_WINDOW
    contained = ring_containment(window, 2, 1000, ctx.seed)
    grid = escape_grid(ctx.spec(MapKind.PLANAR_F), window, SEPARATION_RESOLUTION, SEPARATION_RESOLUTION,
                       workers=ctx.workers)
    component = component_containing(grid, 2 + 0j, Classification.ESCAPING, dilate=True)
    bounded = component is not None and not component.touches_window_boundary
    separated = separation_witness(grid, 2 + 0j)
    size = component.cell_count if component else 0
    return (contained and bounded and separated,
            f"ring contained {contained}, component of 2 bounded {bounded} ({size} cells), separated {separated}")


def check_growth(ctx: CheckContext) -> Outcome:
    ratios = growth_ratio(ctx.spec(MapKind.PLANAR_F), [2.0, 2.5, 3.0]).ratios
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    return increasing and ratios[-1] > 1e3, "ratios " + ", ".join(f"{q:.4g}" for q in ratios)


def check_circle_coverage(ctx: CheckContext) -> Outcome:
    identity = MapSpec(kind=MapKind.IDENTITY)
    inside = circle_coverage(identity, 1.0, 4.0, 2.5).fraction
    outside = circle_coverage(identity, 1.0, 4.0, 5.0).fraction
    search = max_covered_radius(ctx.spec(MapKind.PLANAR_F), 1.0, 4.0)
    best = search.best_radius
    passed = inside == 1.0 and outside == 0.0 and best is not None and best > 4.0
    return passed, f"identity {inside:.3g}/{outside:.3g}, f covers up to L* = {best}"


# ---------------------------------------------------------------------------
# dilatation

def check_dilatation(ctx: CheckContext) -> Outcome:
    identity_branch = scan_dilatation(ctx.spec(MapKind.PLANAR_G), AnnularRegion(rmin=2.0, rmax=4.0), 1024,
                                      seed=ctx.seed, workers=ctx.workers)
    z = 0.50002 * complex(math.cos(1.0), math.sin(1.0))
    oracle = (2.0 - abs(z)) / abs(z)
    k_zero = beltrami(lambda w: g_kernel(w, 0.0), z).k_estimate
    spec = MapSpec(kind=MapKind.CYL3D, params=ctx.params.model_copy(update={"lambda_": 0.5}))
    near = scan_dilatation(spec, AnnularRegion(rmin=0.5, rmax=1.0), 1024, seed=ctx.seed, workers=ctx.workers)
    far = scan_dilatation(spec, AnnularRegion(rmin=2.0, rmax=4.0), 1024, seed=ctx.seed, workers=ctx.workers)
    spread = abs(near.max_k - far.max_k) / near.max_k
    passed = identity_branch.max_k <= 1.0 + 1e-6 and abs(k_zero - oracle) <= 1e-3 and spread <= 0.01
    return passed, (f"identity branch max K {identity_branch.max_k:.9g}, c=0 K {k_zero:.6g} vs {oracle:.6g}, "
                    f"3D max K spread {spread:.3g}")


CHECKS: List[Tuple[str, Suite, Callable[[CheckContext], Outcome]]] = [
    ("integer_ray", Suite.ORBITS, check_integer_ray),
    ("annulus_march", Suite.MAPS, check_annulus_march),
    ("identity_sector", Suite.MAPS, check_identity_sector),
    ("seam_continuity", Suite.MAPS, check_seam_continuity),
    ("rotation_inequalities", Suite.ORBITS, check_rotation_inequalities),
    ("sign_flip", Suite.ORBITS, check_sign_flips),
    ("ring_returns", Suite.ORBITS, check_ring_returns),
    ("bounded_component", Suite.GRIDS, check_bounded_component),
    ("cylinder_map", Suite.MAPS, check_cylinder_map),
    ("dilatation", Suite.DILATATION, check_dilatation),
    ("growth", Suite.GRIDS, check_growth),
    ("circle_coverage", Suite.GRIDS, check_circle_coverage),
]


def run_suite(suite: Suite, ctx: CheckContext) -> List[CheckResult]:
    results = []
    for name, check_suite, check in CHECKS:
        if suite is not Suite.ALL and check_suite is not suite:
            continue
        started = time.time()
        logger.info(f"Running check {name}")
        try:
            passed, detail = check(ctx)
        except (EscapeKitError, ValueError, ArithmeticError) as e:
            logger.error(f"Check {name} raised {type(e).__name__}: {e}")
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(CheckResult(name=name, suite=check_suite, passed=bool(passed), detail=detail,
                                   seconds=time.time() - started))
    return results
