import cmath
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import MapDomainError
from app.models.maps import (
    INFINITY,
    Annulus,
    CylPoint3,
    MapKind,
    MapParams,
    MapSpec,
    PolarPoint,
    annulus_index,
)
from app.services.grids import sample_annulus, sample_ring_image
from app.services.maps import (
    a_kernel,
    eval_a,
    eval_f,
    eval_f3d,
    eval_g,
    eval_h,
    eval_L,
    eval_L_inv,
    eval_phi,
    evaluate,
    f3d_cartesian_kernel,
    g_kernel,
    mobius_L_inv_kernel,
    mobius_L_kernel,
    planar_kernel,
    seam_distance,
)
from app.services.verification import CheckContext, check_seam_continuity

C = 0.5


# ---------------------------------------------------------------------------
# a(r)

def test_angle_function_values():
    assert eval_a(1.0) == 0.0
    assert eval_a(math.sqrt(2.0)) == pytest.approx(math.pi / 12, abs=1e-15)
    assert eval_a(2.0) == pytest.approx(0.42403, abs=1e-5)


@pytest.mark.parametrize("r", [0.5, 2.5, float("nan")])
def test_angle_function_domain(r):
    with pytest.raises(MapDomainError):
        eval_a(r)


def test_angle_function_traces_sector_boundary():
    r = np.linspace(1.0, 2.0, 101)
    z = r * np.exp(1j * a_kernel(r))
    assert np.allclose(z.real, 1.0 + np.abs(z.imag), atol=1e-12)


# ---------------------------------------------------------------------------
# g

def test_g_examples():
    assert eval_g(3 + 0j, C) == 3 + 0j
    assert eval_g(0.5 + 0j, C) == pytest.approx(2 / 3, abs=1e-15)
    assert eval_g(0.25 + 0j, C) == pytest.approx(1 / 3, abs=1e-15)
    assert eval_g(0j, C) == 0j


def test_g_rejects_bad_input():
    with pytest.raises(MapDomainError):
        eval_g(0.5 + 0j, 1.0)
    with pytest.raises(MapDomainError):
        eval_g(0.5 + 0j, 0.0)
    with pytest.raises(MapDomainError):
        eval_g(complex(float("inf"), 0.0), C)


def test_g_modulus_law():
    rng = np.random.default_rng(7)
    r = rng.uniform(0.0, 3.0, 2000)
    z = r * np.exp(1j * rng.uniform(-np.pi, np.pi, 2000))
    image = np.abs(g_kernel(z, C))
    expected = np.where(r < 0.5, 4.0 * r / 3.0, np.where(r < 1.0, 1.0 / (2.0 - r), r))
    assert np.allclose(image, expected, rtol=0.0, atol=1e-12)


def test_g_keeps_unit_disk():
    rng = np.random.default_rng(3)
    z = np.sqrt(rng.random(1000)) * np.exp(1j * rng.uniform(-np.pi, np.pi, 1000)) * 0.999
    assert np.all(np.abs(g_kernel(z, C)) < 1.0)


def test_g_identity_sector():
    rng = np.random.default_rng(11)
    y = rng.uniform(-2.0, 2.0, 500)
    z = (np.abs(y) + 1.0 + rng.uniform(0.0, 2.0, 500)) + 1j * y
    assert np.max(np.abs(g_kernel(z, C) - z)) <= 1e-12


@pytest.mark.parametrize("n", range(2, 13))
def test_g_marches_annuli(n):
    z = sample_annulus(n, 200, seed=n)
    image = g_kernel(z, C)
    target = Annulus(n=n + 1)
    assert all(target.contains(complex(w)) for w in image), f"g(A_{n}) left A_{n + 1}"


def test_seam_continuity_check_passes(params):
    passed, detail = check_seam_continuity(CheckContext(params=params))
    assert passed, detail


# ---------------------------------------------------------------------------
# Moebius pair and h

def test_mobius_special_points():
    assert eval_L(0j) == 1 + 0j
    assert eval_L(1 + 0j) is INFINITY
    assert eval_L(INFINITY) == 0j
    assert eval_L(2 + 0j) == -1 + 0j
    assert eval_L_inv(0j) is INFINITY
    assert eval_L_inv(INFINITY) == 1 + 0j
    assert eval_L_inv(-1 + 0j) == 2 + 0j


def test_mobius_round_trip():
    rng = np.random.default_rng(5)
    z = rng.normal(size=500) + 1j * rng.normal(size=500)
    assert np.allclose(mobius_L_kernel(mobius_L_inv_kernel(z)), z, rtol=1e-12, atol=1e-12)


def test_mobius_kernel_handles_pole_and_infinity():
    out = mobius_L_kernel(np.array([1.0, np.inf, 0.0], dtype=np.complex128))
    assert not np.isfinite(out[0])
    assert out[1] == 0j
    assert out[2] == 1 + 0j


@pytest.mark.parametrize("n", [2, 3, 5, 10])
def test_ring_images_lie_in_right_half_plane(n):
    assert sample_ring_image(n, 500, seed=n).real.min() > 0.0


def test_h_examples():
    assert eval_h(2 + 0j, C) == pytest.approx(3 + 0j, abs=1e-12)
    assert eval_h(-5 + 0j, C) == -5 + 0j
    assert eval_h(-1 - 1j, C) == pytest.approx(-1 - 1j, abs=1e-12)
    assert eval_h(0j, C) == 0j


def test_h_walks_the_integer_ray():
    for n in range(1, 101):
        assert eval_h(complex(n + 1), C) == pytest.approx(n + 2, rel=1e-9)


# ---------------------------------------------------------------------------
# phi and f

def test_phi_examples():
    assert eval_phi(-0.5 + 0j) == pytest.approx(-0.5 * math.exp(0.0625), rel=1e-14)
    z = -0.5 + 0.25j
    assert eval_phi(z) == pytest.approx(-0.25 * cmath.exp(z ** 4), rel=1e-12)


@pytest.mark.parametrize("z", [0.5 + 0j, -1.5 + 0j, -0.2 + 0.5j])
def test_phi_outside_strip(z):
    with pytest.raises(MapDomainError):
        eval_phi(z)


def test_f_examples(params):
    value, overflowed = eval_f(2 + 0j, params)
    assert value == pytest.approx(3 + 0j, abs=1e-12)
    assert not overflowed

    value, overflowed = eval_f(-2 + 0j, params)
    assert value == pytest.approx(-2.0 + 1e-3 * math.exp(16.0), rel=1e-12)
    assert not overflowed


def test_f_fixes_the_line_s_zero(params):
    z = -0.3 + 0.3j
    assert eval_f(z, params).value == pytest.approx(z, abs=1e-12)


def test_f_large_exponent_goes_through_log_channel(params):
    value, overflowed = eval_f(-5 + 0j, params)
    assert not overflowed
    assert math.log(abs(value)) == pytest.approx(625.0 + math.log(1e-3), rel=1e-12)


def test_f_saturates(params):
    value, overflowed = eval_f(-6 + 0j, params)
    assert overflowed
    assert abs(value) == pytest.approx(1e300, rel=1e-12)


def test_f_rejects_non_finite(params):
    with pytest.raises(MapDomainError):
        eval_f(complex(float("nan"), 0.0), params)


def test_parameters_are_validated():
    with pytest.raises(ValidationError):
        MapParams(c=1.0)
    with pytest.raises(ValidationError):
        MapParams(d=0.0)
    with pytest.raises(ValidationError):
        MapParams(lambda_=-1.0)
    assert MapParams(**{"lambda": 2.0}).lambda_ == 2.0


# ---------------------------------------------------------------------------
# cylindrical map

def test_f3d_examples():
    image = eval_f3d(CylPoint3(r=1.0, theta=0.0, x3=0.5), 1.0)
    assert image.r == pytest.approx(math.e, rel=1e-15)
    assert image.theta == pytest.approx(math.pi, abs=1e-15)
    assert image.x3 == 0.5

    axis = CylPoint3(r=0.0, theta=0.0, x3=2.0)
    assert eval_f3d(axis, 1.0) == axis


def test_f3d_is_an_involution():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = CylPoint3(r=rng.uniform(0.1, 5.0), theta=rng.uniform(-3.0, 3.0), x3=rng.uniform(-1.0, 1.0))
        back = eval_f3d(eval_f3d(p, 0.7), 0.7)
        assert back.r == pytest.approx(p.r, rel=1e-12)
        assert back.theta == pytest.approx(p.theta, abs=1e-12)


def test_f3d_cartesian_form():
    out = f3d_cartesian_kernel(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 3.0]]), 1.0)
    assert np.allclose(out[0], [-math.e, 0.0, 0.0], rtol=1e-15)
    assert np.array_equal(out[1], [0.0, 0.0, 3.0])

    p = np.random.default_rng(4).uniform(-1.0, 1.0, (100, 3))
    assert np.allclose(f3d_cartesian_kernel(3.0 * p, 1.0), 3.0 * f3d_cartesian_kernel(p, 1.0), atol=1e-12)


def test_f3d_requires_positive_lambda():
    with pytest.raises(MapDomainError):
        eval_f3d(CylPoint3(r=1.0), 0.0)


# ---------------------------------------------------------------------------
# dispatch, seams and annuli

def test_evaluate_composes_powers():
    spec = MapSpec(kind=MapKind.PLANAR_H, power=2)
    assert complex(evaluate(spec, 2 + 0j).value) == pytest.approx(4 + 0j, abs=1e-12)


def test_planar_kernel_rejects_spatial_map():
    with pytest.raises(MapDomainError):
        planar_kernel(MapSpec(kind=MapKind.CYL3D))


def test_seam_distance():
    g = MapSpec(kind=MapKind.PLANAR_G)
    assert float(seam_distance(g, 0.5 + 0j)) == 0.0
    assert float(seam_distance(g, 3 + 0j)) == pytest.approx(1.0)
    assert float(seam_distance(MapSpec(kind=MapKind.IDENTITY), 1 + 1j)) == math.inf
    assert float(seam_distance(MapSpec(kind=MapKind.CYL3D), np.array([3.0, 4.0, 1.0]))) == 5.0


def test_oscillation_circles_are_seams():
    g = MapSpec(kind=MapKind.PLANAR_G)
    for k in (3, 4, 10):
        w = (1.0 - 1.0 / k) * cmath.exp(0.4j)
        assert float(seam_distance(g, w)) < 1e-12
    assert float(seam_distance(g, 0.7 * cmath.exp(0.4j))) == pytest.approx(0.7 - 2 / 3, abs=1e-12)
    h = MapSpec(kind=MapKind.PLANAR_H)
    z = complex(mobius_L_kernel((2 / 3) * cmath.exp(0.4j)))
    assert float(seam_distance(h, z)) < 1e-9


def test_annulus_bounds_and_index():
    a2 = Annulus(n=2)
    assert a2.rin == pytest.approx(1 - 1 / 2.25)
    assert a2.rout == pytest.approx(1 - 1 / 2.75)
    assert annulus_index(0.6 + 0j) == 2
    assert annulus_index(0.3 + 0j) is None
    assert annulus_index(2 + 0j) is None
    with pytest.raises(ValidationError):
        Annulus(n=1)


def test_polar_point_uses_principal_argument():
    assert PolarPoint.from_complex(-1 + 0j).t == math.pi
    with pytest.raises(ValidationError):
        PolarPoint(r=1.0, t=-math.pi)
