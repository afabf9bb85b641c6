"""
Evaluation of the explicit maps: the angle function a(r), the rotation map g,
the Moebius pair L / L^-1, the conjugate h = L o g o L^-1, the interpolating
factor phi, the map f with an essential singularity at infinity, and the
cylindrical map of three-space.

Every `*_kernel` function works on numpy arrays of complex128 and is the one
used by the iteration and grid engines; the `eval_*` functions are the
validated scalar entry points built on top of them.
"""
import cmath
import math
from typing import Callable, Union

import numpy as np

from app.core.config import (
    C_UPPER_BOUND,
    EXP_LOG_THRESHOLD,
    LOG_SATURATION,
    SATURATION_MODULUS,
    SEAM_SNAP_RTOL,
)
from app.core.exceptions import MapDomainError
from app.models.maps import (
    INFINITY,
    CylPoint3,
    ExtendedPoint,
    Infinity,
    MapKind,
    MapParams,
    MapSpec,
    MapValue,
)

ArrayLike = Union[complex, float, np.ndarray]

SQRT2_OVER_2 = math.sqrt(2.0) / 2.0


# ---------------------------------------------------------------------------
# helpers

def principal_arg(z: np.ndarray) -> np.ndarray:
    """Argument in (-pi, pi]."""
    t = np.angle(z)
    return np.where(t == -np.pi, np.pi, t)


def _check_finite(z: complex, name: str = "z"):
    if not cmath.isfinite(z):
        raise MapDomainError(f"{name} must be finite, got {z!r}")


def validate_c(c: float):
    if not 0.0 < c < C_UPPER_BOUND:
        raise MapDomainError(f"rotation amplitude c must lie in (0, pi/4), got {c}")


def _as_flat(z: ArrayLike):
    arr = np.asarray(z, dtype=np.complex128)
    return arr.reshape(-1).copy(), arr.shape


# ---------------------------------------------------------------------------
# a(r)

def a_kernel(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = np.clip(SQRT2_OVER_2 / r, -1.0, 1.0)
    return np.maximum(np.pi / 4 - np.arcsin(ratio), 0.0)


def eval_a(r: float) -> float:
    """a(r) = pi/4 - arcsin(sqrt(2)/(2r)) on [1, 2]."""
    if not (math.isfinite(r) and 1.0 <= r <= 2.0):
        raise MapDomainError(f"a(r) is defined for 1 <= r <= 2, got {r}")
    return float(a_kernel(r))


# ---------------------------------------------------------------------------
# g

def oscillation_kernel(r: np.ndarray) -> np.ndarray:
    """
    |sin(pi/(1-r))| for 1/2 <= r < 1.

    Evaluated through the distance of x = 1/(1-r) to the nearest integer; the
    zeros at the integer circles r = 1 - 1/(n+1) are resolved to floating
    resolution (relative tolerance SEAM_SNAP_RTOL on x).
    """
    x = 1.0 / (1.0 - r)
    frac = x - np.round(x)
    value = np.abs(np.sin(np.pi * frac))
    return np.where(np.abs(frac) <= SEAM_SNAP_RTOL * x, 0.0, value)


def g_kernel(z: ArrayLike, c: float) -> np.ndarray:
    """Vectorised g; c = 0 is accepted and gives the purely radial map."""
    flat, shape = _as_flat(z)
    r = np.abs(flat)
    t = principal_arg(flat)
    out = flat.copy()

    inner = np.flatnonzero((r > 0.0) & (r < 0.5))
    if inner.size:
        rr, tt = r[inner], t[inner]
        out[inner] = (4.0 / 3.0) * rr * np.exp(1j * (tt + c * np.abs(np.sin(tt))))

    middle = np.flatnonzero((r >= 0.5) & (r < 1.0))
    if middle.size:
        rr, tt = r[middle], t[middle]
        turn = tt + c * np.abs(np.sin(tt)) + c * (1.0 - rr) ** 2 * oscillation_kernel(rr)
        out[middle] = np.exp(1j * turn) / (2.0 - rr)

    ring = np.flatnonzero((r >= 1.0) & (r <= 2.0))
    if ring.size:
        rr, tt = r[ring], t[ring]
        a = a_kernel(rr)
        rotating = np.abs(tt) > a
        idx = ring[rotating]
        rr, tt, a = rr[rotating], tt[rotating], a[rotating]
        turn = tt + c * (2.0 - rr) * np.sin((np.abs(tt) - a) / (np.pi - a) * np.pi)
        out[idx] = rr * np.exp(1j * turn)

    return out.reshape(shape)


def eval_g(z: complex, c: float) -> complex:
    validate_c(c)
    _check_finite(z)
    return complex(g_kernel(z, c))


# ---------------------------------------------------------------------------
# Moebius pair

def mobius_L_kernel(z: ArrayLike) -> np.ndarray:
    """L(z) = 1/(1-z); the pole z = 1 maps to inf, inf maps to 0."""
    flat, shape = _as_flat(z)
    out = np.empty_like(flat)
    pole = flat == 1.0
    infinite = ~np.isfinite(flat)
    regular = ~(pole | infinite)
    out[regular] = 1.0 / (1.0 - flat[regular])
    out[pole] = complex(np.inf, 0.0)
    out[infinite] = 0.0
    return out.reshape(shape)


def mobius_L_inv_kernel(w: ArrayLike) -> np.ndarray:
    """L^-1(w) = 1 - 1/w; 0 maps to inf, inf maps to 1."""
    flat, shape = _as_flat(w)
    out = np.empty_like(flat)
    zero = flat == 0.0
    infinite = ~np.isfinite(flat)
    regular = ~(zero | infinite)
    with np.errstate(over="ignore"):
        out[regular] = 1.0 - 1.0 / flat[regular]
    out[zero] = complex(np.inf, 0.0)
    out[infinite] = 1.0
    return out.reshape(shape)


def eval_L(z: ExtendedPoint) -> ExtendedPoint:
    if isinstance(z, Infinity):
        return 0j
    z = complex(z)
    _check_finite(z)
    if z == 1.0:
        return INFINITY
    return 1.0 / (1.0 - z)


def eval_L_inv(w: ExtendedPoint) -> ExtendedPoint:
    if isinstance(w, Infinity):
        return 1 + 0j
    w = complex(w)
    _check_finite(w, "w")
    if w == 0.0:
        return INFINITY
    return 1.0 - 1.0 / w


# ---------------------------------------------------------------------------
# h = L o g o L^-1

def h_kernel(z: ArrayLike, c: float) -> np.ndarray:
    """
    Conjugate map. Wherever g fixes L^-1(z) (its identity sectors, and the
    neighbourhood of infinity that corresponds to z = 0) the input is returned
    unchanged instead of being pushed through L o L^-1.
    """
    flat, shape = _as_flat(z)
    out = flat.copy()
    candidates = np.flatnonzero(flat != 0.0)
    if candidates.size:
        w = mobius_L_inv_kernel(flat[candidates])
        finite = np.isfinite(w)
        candidates, w = candidates[finite], w[finite]
        gw = g_kernel(w, c)
        moved = gw != w
        out[candidates[moved]] = mobius_L_kernel(gw[moved])
    return out.reshape(shape)


def eval_h(z: complex, c: float) -> complex:
    validate_c(c)
    _check_finite(z)
    return complex(h_kernel(z, c))


# ---------------------------------------------------------------------------
# phi and f

def quartic_kernel(z: np.ndarray) -> np.ndarray:
    """z^4, falling back to polar form where the direct product overflows."""
    with np.errstate(over="ignore", invalid="ignore"):
        sq = z * z
        w = sq * sq
        bad = ~np.isfinite(w)
        if bad.any():
            rr = np.abs(z[bad]) ** 4
            tt = 4.0 * principal_arg(z[bad])
            re = rr * np.cos(tt)
            im = rr * np.sin(tt)
            re = np.where(np.isnan(re), np.inf, re)
            im = np.where(np.isfinite(im), im, 0.0)
            w[bad] = re + 1j * im
    return w


def scaled_exp_quartic_kernel(z: np.ndarray, coeff: ArrayLike) -> MapValue:
    """
    coeff * exp(z^4) with coeff > 0.

    When Re z^4 exceeds EXP_LOG_THRESHOLD the product is carried as a
    log-modulus plus a phase; results whose modulus would exceed
    SATURATION_MODULUS are returned at that modulus and flagged.
    """
    w = quartic_kernel(z)
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), z.shape)
    out = np.empty_like(z)
    overflowed = np.zeros(z.shape, dtype=bool)

    small = w.real <= EXP_LOG_THRESHOLD
    out[small] = coeff[small] * np.exp(w[small])

    large = np.flatnonzero(~small)
    if large.size:
        with np.errstate(divide="ignore"):
            log_modulus = np.log(coeff[large]) + w.real[large]
        phase = np.exp(1j * w.imag[large])
        saturated = log_modulus > LOG_SATURATION
        out[large[~saturated]] = np.exp(log_modulus[~saturated]) * phase[~saturated]
        out[large[saturated]] = SATURATION_MODULUS * phase[saturated]
        overflowed[large[saturated]] = True
    return MapValue(out, overflowed)


def add_scaled_exp_kernel(z: np.ndarray, coeff: ArrayLike) -> MapValue:
    """z + coeff * exp(z^4); a saturated term swallows z."""
    term, overflowed = scaled_exp_quartic_kernel(z, coeff)
    return MapValue(np.where(overflowed, term, z + term), overflowed)


def strip_coordinate(z: np.ndarray) -> np.ndarray:
    """s = Re z + |Im z|; f switches formula on s = 0 and s = -1."""
    return z.real + np.abs(z.imag)


def eval_phi(z: complex) -> complex:
    """phi(z) = (Re z + |Im z|) exp(z^4) on the strip -1 < Re z + |Im z| < 0."""
    _check_finite(z)
    s = z.real + abs(z.imag)
    if not -1.0 < s < 0.0:
        raise MapDomainError(f"phi is defined for -1 < Re z + |Im z| < 0, got {s}")
    # s < 0 on the strip, so phi = -(|s| exp(z^4))
    term = scaled_exp_quartic_kernel(np.array([z], dtype=np.complex128), abs(s))
    return complex(-term.value[0])


def f_kernel(z: ArrayLike, params: MapParams) -> MapValue:
    flat, shape = _as_flat(z)
    s = strip_coordinate(flat)
    out = np.empty_like(flat)
    overflowed = np.zeros(flat.shape, dtype=bool)

    right = np.flatnonzero(s >= 0.0)
    if right.size:
        out[right] = h_kernel(flat[right], params.c)

    left = np.flatnonzero(s <= -1.0)
    if left.size:
        value, over = add_scaled_exp_kernel(flat[left], params.d)
        out[left], overflowed[left] = value, over

    strip = np.flatnonzero((s < 0.0) & (s > -1.0))
    if strip.size:
        # z - d phi(z) = z + d |s| exp(z^4) because s < 0 on the strip
        value, over = add_scaled_exp_kernel(flat[strip], params.d * np.abs(s[strip]))
        out[strip], overflowed[strip] = value, over

    return MapValue(out.reshape(shape), overflowed.reshape(shape))


def eval_f(z: complex, params: MapParams) -> MapValue:
    _check_finite(z)
    value, overflowed = f_kernel(z, params)
    return MapValue(complex(value), bool(overflowed))


# ---------------------------------------------------------------------------
# cylindrical map of R^3

def wrap_angle(theta: np.ndarray) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


def f3d_cartesian_kernel(xyz: np.ndarray, lam: float) -> np.ndarray:
    """
    (r e^{i theta}, x3) -> (r e^{lam cos theta + i(theta + pi)}, x3) in Cartesian
    form, i.e. (x, y) -> -exp(lam x / r) (x, y). The axis is fixed.
    """
    xyz = np.asarray(xyz, dtype=float)
    out = xyz.copy()
    x, y = xyz[..., 0], xyz[..., 1]
    r = np.hypot(x, y)
    off_axis = r > 0.0
    scale = np.ones_like(r)
    scale[off_axis] = -np.exp(lam * x[off_axis] / r[off_axis])
    out[..., 0] = np.where(off_axis, scale * x, x)
    out[..., 1] = np.where(off_axis, scale * y, y)
    return out


def eval_f3d(p: CylPoint3, lam: float) -> CylPoint3:
    if not lam > 0.0:
        raise MapDomainError(f"lambda must be positive, got {lam}")
    if p.r == 0.0:
        return p
    return CylPoint3(
        r=p.r * math.exp(lam * math.cos(p.theta)),
        theta=float(wrap_angle(p.theta + math.pi)),
        x3=p.x3,
    )


# ---------------------------------------------------------------------------
# dispatch

def planar_kernel(spec: MapSpec) -> Callable[[np.ndarray], MapValue]:
    """One application of a planar map as an array function."""
    kind, params = spec.kind, spec.params

    def lift(fn):
        def apply(z):
            value = fn(z)
            over = ~np.isfinite(value)
            if np.any(over):
                value = np.where(over, SATURATION_MODULUS + 0j, value)
            return MapValue(value, over)
        return apply

    if kind is MapKind.PLANAR_G:
        return lift(lambda z: g_kernel(z, params.c))
    if kind is MapKind.PLANAR_H:
        return lift(lambda z: h_kernel(z, params.c))
    if kind is MapKind.MOBIUS_L:
        return lift(mobius_L_kernel)
    if kind is MapKind.MOBIUS_L_INV:
        return lift(mobius_L_inv_kernel)
    if kind is MapKind.IDENTITY:
        return lift(lambda z: np.array(z, dtype=np.complex128, copy=True))
    if kind is MapKind.PLANAR_F:
        return lambda z: f_kernel(z, params)
    raise MapDomainError(f"map {kind.value} is not a planar map")


def evaluate(spec: MapSpec, z: ArrayLike) -> MapValue:
    """Apply `spec` (composed `spec.power` times) to an array of points."""
    step = planar_kernel(spec)
    flat, shape = _as_flat(z)
    overflowed = np.zeros(flat.shape, dtype=bool)
    for _ in range(spec.power):
        live = np.flatnonzero(~overflowed)
        if not live.size:
            break
        value, over = step(flat[live])
        flat[live] = value
        overflowed[live] = over
    return MapValue(flat.reshape(shape), overflowed.reshape(shape))


# ---------------------------------------------------------------------------
# seams

def _g_seam_distance(w: np.ndarray) -> np.ndarray:
    r = np.abs(w)
    dist = np.minimum.reduce([r, np.abs(r - 0.5), np.abs(r - 1.0), np.abs(r - 2.0)])
    # |sin t| and |t| have kinks on the real axis inside the rotating region
    dist = np.where(r <= 2.0, np.minimum(dist, np.abs(w.imag)), dist)
    # |sin(pi/(1-r))| has kinks on the circles r = 1 - 1/k, k >= 2
    oscillating = (r >= 0.5) & (r < 1.0)
    if oscillating.any():
        x = 1.0 / (1.0 - r[oscillating])
        below = np.maximum(np.floor(x), 2.0)
        circles = np.minimum(np.abs(r[oscillating] - (1.0 - 1.0 / below)),
                             np.abs(r[oscillating] - (1.0 - 1.0 / (below + 1.0))))
        dist[oscillating] = np.minimum(dist[oscillating], circles)
    # the sector boundary |t| = a(r) is the pair of segments Re w = 1 + |Im w|
    line = np.abs(w.real - np.abs(w.imag) - 1.0) / math.sqrt(2.0)
    near_ring = (r >= 0.9) & (r <= 2.1)
    return np.where(near_ring, np.minimum(dist, line), dist)


def seam_distance(spec: MapSpec, z: ArrayLike) -> np.ndarray:
    """
    Distance from each point to the nearest set where the map is continuous
    but not smooth. Seams of h are the Moebius images of the seams of g,
    measured to first order through |d L^-1 / dz| = 1/|z|^2.
    """
    kind = spec.kind
    if kind is MapKind.CYL3D:
        xyz = np.asarray(z, dtype=float)
        return np.hypot(xyz[..., 0], xyz[..., 1])

    flat, shape = _as_flat(z)
    if kind is MapKind.IDENTITY:
        dist = np.full(flat.shape, np.inf)
    elif kind is MapKind.MOBIUS_L:
        dist = np.abs(flat - 1.0)
    elif kind is MapKind.MOBIUS_L_INV:
        dist = np.abs(flat)
    elif kind is MapKind.PLANAR_G:
        dist = _g_seam_distance(flat)
    else:
        dist = _h_seam_distance(flat)
        if kind is MapKind.PLANAR_F:
            s = strip_coordinate(flat)
            dist = np.where(s >= -1e-3, dist, np.inf)
            dist = np.minimum.reduce([
                dist,
                np.abs(s) / math.sqrt(2.0),
                np.abs(s + 1.0) / math.sqrt(2.0),
            ])
            kinked = (flat.real < 0.0) & (s > -1.0) & (s < 0.0)
            dist = np.where(kinked, np.minimum(dist, np.abs(flat.imag)), dist)

    if spec.power > 1:
        current = flat
        for _ in range(spec.power - 1):
            current = evaluate(spec.model_copy(update={"power": 1}), current).value
            dist = np.minimum(dist, seam_distance(spec.model_copy(update={"power": 1}), current))
    return dist.reshape(shape)


def _h_seam_distance(z: np.ndarray) -> np.ndarray:
    dist = np.full(z.shape, np.inf)
    nonzero = z != 0.0
    w = mobius_L_inv_kernel(z[nonzero])
    finite = np.isfinite(w)
    local = np.full(w.shape, np.inf)
    local[finite] = _g_seam_distance(w[finite]) * np.abs(z[nonzero][finite]) ** 2
    dist[nonzero] = local
    return dist
