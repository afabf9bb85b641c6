import cmath
import math
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np

from app.core.config import EXACT_STORAGE, FIXED_TOLERANCE, THINNING_STRIDE
from app.core.exceptions import MapDomainError, PreconditionError
from app.core.logging import logger
from app.models.maps import CylPoint3, MapKind, MapParams, MapSpec, annulus_index
from app.models.orbits import (
    Classification,
    EscapePolicy,
    OrbitRecord,
    PeriodicOrbitReport,
    RotationCheck,
    SignFlipResult,
)
from app.services.maps import (
    validate_c,
    eval_g,
    evaluate,
    f3d_cartesian_kernel,
    g_kernel,
    h_kernel,
)

UNDETERMINED = Classification.UNDETERMINED.code
ESCAPING = Classification.ESCAPING.code
RETURNING = Classification.RETURNING.code
FIXED = Classification.FIXED.code


class BatchResult(NamedTuple):
    """Per-point orbit outcomes for an array of starting points."""

    classification: np.ndarray  # int8 codes, see Classification.code
    iterations: np.ndarray
    returns: np.ndarray
    escape_iteration: np.ndarray  # -1 when the orbit did not escape
    saturated: np.ndarray
    first_nonpositive: np.ndarray  # first k >= 1 with Re z_k <= 0, or -1


def _require_planar(spec: MapSpec):
    if not spec.kind.is_planar:
        raise MapDomainError(f"map {spec.kind.value} cannot be iterated as a planar map")


def classify_batch(
    spec: MapSpec,
    z0: Union[complex, np.ndarray],
    policy: EscapePolicy,
    trace: Optional[List[Tuple[int, complex]]] = None,
) -> BatchResult:
    """
    Iterate every starting point until it resolves or the budget runs out.

    Step k computes z_k = f(z_{k-1}). A point is FIXED when
    |f(z_{k-1}) - z_{k-1}| < FIXED_TOLERANCE, ESCAPING when |z_k| exceeds the
    escape radius for `persistence` consecutive steps (or the evaluation
    saturates), and RETURNING once `persistence` iterates have landed in the
    closed unit disk after the orbit first left it (z_0 included). `returns`
    counts every iterate z_k, k >= 1, in the disk. Each point is advanced
    independently, so results do not depend on how the starting points are
    batched.
    """
    _require_planar(spec)
    start = np.asarray(z0, dtype=np.complex128).reshape(-1)
    n = start.size

    codes = np.full(n, UNDETERMINED, dtype=np.int8)
    iterations = np.zeros(n, dtype=np.int64)
    returns = np.zeros(n, dtype=np.int64)
    dips = np.zeros(n, dtype=np.int64)
    above = np.zeros(n, dtype=np.int64)
    escape_iteration = np.full(n, -1, dtype=np.int64)
    saturated = np.zeros(n, dtype=bool)
    first_nonpositive = np.full(n, -1, dtype=np.int64)

    z = start.copy()
    exceeded = np.abs(start) > 1.0
    active = np.arange(n)
    if trace is not None and n == 1:
        trace.append((0, complex(start[0])))

    for k in range(1, policy.budget + 1):
        if not active.size:
            break
        current = z[active]
        value, over = evaluate(spec, current)
        iterations[active] = k

        fixed = ~over & (np.abs(value - current) < FIXED_TOLERANCE)
        codes[active[fixed]] = FIXED

        blown = over & ~fixed
        codes[active[blown]] = ESCAPING
        saturated[active[blown]] = True
        escape_iteration[active[blown]] = k

        z[active] = value
        modulus = np.abs(value)
        live = ~(fixed | blown)

        nonpositive = live & (value.real <= 0.0) & (first_nonpositive[active] < 0)
        first_nonpositive[active[nonpositive]] = k

        inside = live & (modulus <= 1.0)
        returns[active[inside]] += 1
        dips[active[inside & exceeded[active]]] += 1
        exceeded[active] |= live & (modulus > 1.0)
        above[active] = np.where(live & (modulus > policy.escape_radius), above[active] + 1, 0)

        escaped = live & (above[active] >= policy.persistence)
        codes[active[escaped]] = ESCAPING
        escape_iteration[active[escaped]] = k - policy.persistence + 1

        returned = live & ~escaped & (dips[active] >= policy.persistence)
        codes[active[returned]] = RETURNING

        if trace is not None and n == 1 and not fixed[0]:
            if k < EXACT_STORAGE or k % THINNING_STRIDE == 0:
                trace.append((k, complex(value[0])))

        resolved = fixed | blown | escaped | returned
        if resolved.any():
            active = active[~resolved]

    return BatchResult(codes, iterations, returns, escape_iteration, saturated, first_nonpositive)


def iterate(
    spec: MapSpec,
    z0: complex,
    policy: EscapePolicy = EscapePolicy(),
    record_sign_flip: bool = False,
) -> OrbitRecord:
    """f^1 = f, f^{n+1} = f o f^n applied to one point, with the orbit stored."""
    trace: List[Tuple[int, complex]] = []
    result = classify_batch(spec, np.array([z0], dtype=np.complex128), policy, trace=trace)
    classification = Classification.from_code(result.classification[0])
    record = OrbitRecord(
        start=complex(z0),
        points=[p for _, p in trace],
        indices=[k for k, _ in trace],
        classification=classification,
        iterations_used=int(result.iterations[0]),
        returns=int(result.returns[0]),
        escape_iteration=int(result.escape_iteration[0]) if result.escape_iteration[0] >= 0 else None,
        saturated=bool(result.saturated[0]),
    )
    if record_sign_flip and result.first_nonpositive[0] >= 0:
        record.sign_flip_index = int(result.first_nonpositive[0])
    if record.saturated:
        logger.warning(f"Orbit of {z0} saturated at iteration {record.escape_iteration}")
    logger.debug(f"Orbit of {z0} under {spec.kind.value}: {classification.value} after {record.iterations_used} steps")
    return record


# ---------------------------------------------------------------------------
# rotation inequalities and the sign-flip lemma

def extra_rotation_floor(c: float, m: int) -> float:
    """c'/(m+1)^2 with c' = c sqrt(2)/2, the least extra turn inside A_m."""
    return c * math.sqrt(2.0) / 2.0 / (m + 1) ** 2


def _right_half_annulus_index(z: complex) -> int:
    m = annulus_index(z)
    if m is None:
        raise PreconditionError(f"{z} does not lie in any annulus A_m, m >= 2")
    t = cmath.phase(z)
    if not -math.pi / 2 < t < math.pi / 2:
        raise PreconditionError(f"{z} does not lie in the right half-plane")
    return m


def verify_rotation_lower(z: complex, c: float) -> RotationCheck:
    """
    Check the two rotation inequalities of g at z in A_m with Re z > 0:
    t + 2c >= arg g(z) >= (1 + 2c/pi) t for 0 < t < pi/2, and
    arg g(z) >= (1 - 2c/pi) t + c'/(m+1)^2 for -pi/2 < t <= 0.
    """
    validate_c(c)
    m = _right_half_annulus_index(z)
    t = cmath.phase(z)
    image_arg = cmath.phase(eval_g(z, c))
    if t > 0.0:
        lower = (1.0 + 2.0 * c / math.pi) * t
        upper = t + 2.0 * c
        passed = upper >= image_arg >= lower
    else:
        lower = (1.0 - 2.0 * c / math.pi) * t + extra_rotation_floor(c, m)
        upper = None
        passed = image_arg >= lower
    return RotationCheck(point=z, annulus=m, t=t, image_arg=image_arg,
                         lower_bound=lower, upper_bound=upper, passed=passed)


def predicted_flip_bound(z: complex, c: float, cap: int = 1_000_000) -> int:
    """
    Number of steps after which the rotation inequalities force Re g^k(z) <= 0.

    Iterates the monotone lower bound u -> (1 + 2c/pi) u + c'/(m+1)^2 (u > 0)
    and u -> (1 - 2c/pi) u + c'/(m+1)^2 (u <= 0), with m the annulus index at
    each step, until u reaches pi/2.
    """
    m = _right_half_annulus_index(z)
    u = cmath.phase(z)
    growth = 1.0 + 2.0 * c / math.pi
    shrink = 1.0 - 2.0 * c / math.pi
    k = 0
    while u < math.pi / 2 and k < cap:
        factor = growth if u > 0.0 else shrink
        u = factor * u + extra_rotation_floor(c, m + k)
        k += 1
    return k


def find_sign_flips(points: np.ndarray, c: float, k_max: int) -> np.ndarray:
    """First k <= k_max with Re g^k(z) <= 0 for every point, -1 when not found."""
    z = np.asarray(points, dtype=np.complex128).reshape(-1).copy()
    index = np.full(z.size, -1, dtype=np.int64)
    active = np.arange(z.size)
    for k in range(1, k_max + 1):
        if not active.size:
            break
        z[active] = g_kernel(z[active], c)
        hit = z[active].real <= 0.0
        index[active[hit]] = k
        active = active[~hit]
    if active.size:
        logger.warning(f"{active.size} of {z.size} points did not reach Re <= 0 within {k_max} steps")
    return index


def find_sign_flip(z: complex, c: float, k_max: int = 1000) -> SignFlipResult:
    validate_c(c)
    m = _right_half_annulus_index(z)
    k = int(find_sign_flips(np.array([z]), c, k_max)[0])
    return SignFlipResult(
        start=z,
        annulus=m,
        index=k if k >= 0 else None,
        predicted_bound=predicted_flip_bound(z, c),
        k_max=k_max,
    )


# ---------------------------------------------------------------------------
# returns, the integer ray and the unit disk

def detect_returns(z0: Union[complex, np.ndarray], c: float, budget: int) -> Union[int, np.ndarray]:
    """
    Count the iterates h^k(z0), 1 <= k <= budget, in the closed unit disk.

    An orbit that reaches a fixed point contributes its remaining steps at
    once: all of them when the fixed point lies in the disk, none otherwise.
    """
    scalar = np.ndim(z0) == 0
    z = np.asarray(z0, dtype=np.complex128).reshape(-1).copy()
    counts = np.zeros(z.size, dtype=np.int64)
    active = np.arange(z.size)
    for k in range(1, budget + 1):
        if not active.size:
            break
        current = z[active]
        value = h_kernel(current, c)
        fixed = np.abs(value - current) < FIXED_TOLERANCE
        inside = np.abs(value) <= 1.0
        counts[active] += inside
        remaining = budget - k
        counts[active[fixed & inside]] += remaining
        z[active] = value
        active = active[~fixed]
    return int(counts[0]) if scalar else counts


def integer_ray_check(n: int, steps: int, params: MapParams = MapParams()) -> float:
    """max_k |f^k(n) - (n + k)| for 1 <= k <= steps."""
    if steps < 1:
        raise PreconditionError("steps must be at least 1")
    spec = MapSpec(kind=MapKind.PLANAR_F, params=params)
    z = np.array([complex(n)])
    deviation = 0.0
    for k in range(1, steps + 1):
        z = evaluate(spec, z).value
        deviation = max(deviation, abs(complex(z[0]) - (n + k)))
    return deviation


def disk_attraction(z: complex, c: float, steps: int) -> np.ndarray:
    """|g^k(z)| for 0 <= k <= steps."""
    moduli = np.empty(steps + 1)
    current = np.array([z], dtype=np.complex128)
    moduli[0] = abs(z)
    for k in range(1, steps + 1):
        current = g_kernel(current, c)
        moduli[k] = abs(current[0])
    return moduli


# ---------------------------------------------------------------------------
# the cylindrical example

def cyl3d_orbit(p: CylPoint3, lam: float, steps: int = 16) -> PeriodicOrbitReport:
    """
    Iterate the cylindrical map. Every orbit is periodic (f^2 is the
    identity), so no point escapes although M(r, f)/r = e^lambda.
    """
    start = np.array(p.to_cartesian())
    scale = 1.0 + float(np.linalg.norm(start))
    current = start.copy()
    max_modulus = float(np.linalg.norm(start))
    period = 0
    closure_error = float("nan")
    for k in range(1, steps + 1):
        current = f3d_cartesian_kernel(current, lam)
        max_modulus = max(max_modulus, float(np.linalg.norm(current)))
        error = float(np.linalg.norm(current - start))
        if k == 2:
            closure_error = error
        if period == 0 and error <= 1e-9 * scale:
            period = k
    return PeriodicOrbitReport(period=period, max_modulus=max_modulus,
                               closure_error=closure_error, steps=steps)
