import cmath
import math

import numpy as np
import pytest

from app.core.exceptions import MapDomainError, PreconditionError
from app.models.maps import Annulus, CylPoint3, MapKind, annulus_index
from app.models.orbits import Classification, EscapePolicy
from app.services.grids import sample_annulus, sample_ring_image
from app.services.orbits import (
    classify_batch,
    cyl3d_orbit,
    detect_returns,
    disk_attraction,
    extra_rotation_floor,
    find_sign_flip,
    find_sign_flips,
    integer_ray_check,
    iterate,
    predicted_flip_bound,
    verify_rotation_lower,
)
from app.services.maps import g_kernel

C = 0.5


def _in_annulus(n: int, t: float) -> complex:
    annulus = Annulus(n=n)
    return cmath.rect((annulus.rin + annulus.rout) / 2, t)


# ---------------------------------------------------------------------------
# iterate

def test_integer_ray_escapes(spec_of):
    record = iterate(spec_of(MapKind.PLANAR_F), 2 + 0j, EscapePolicy(escape_radius=1000.5))

    assert record.classification is Classification.ESCAPING
    assert record.escape_iteration == 999
    assert not record.saturated
    assert record.indices[:5] == [0, 1, 2, 3, 4]
    for k in range(200):
        assert record.points[k] == pytest.approx(k + 2, abs=1e-6), f"iterate {k} left the integer ray"


def test_fixed_points(spec_of):
    assert iterate(spec_of(MapKind.PLANAR_H), -1 - 1j).classification is Classification.FIXED
    assert iterate(spec_of(MapKind.PLANAR_G), 0j).classification is Classification.FIXED
    record = iterate(spec_of(MapKind.PLANAR_F), -0.3 + 0.3j)
    assert record.classification is Classification.FIXED
    assert record.iterations_used == 1


def test_saturated_orbit_is_escaping(spec_of):
    record = iterate(spec_of(MapKind.PLANAR_F), -6 + 0j)
    assert record.classification is Classification.ESCAPING
    assert record.saturated
    assert record.notes == ["SATURATED"]
    assert record.escape_iteration == 1


def test_iterate_rejects_spatial_map(spec_of):
    with pytest.raises(MapDomainError):
        iterate(spec_of(MapKind.CYL3D), 1 + 0j)


def test_iterate_is_deterministic(spec_of):
    spec = spec_of(MapKind.PLANAR_F)
    policy = EscapePolicy(budget=500)
    assert iterate(spec, 0.7 + 0.4j, policy) == iterate(spec, 0.7 + 0.4j, policy)


def test_batch_matches_single_orbits(spec_of):
    spec = spec_of(MapKind.PLANAR_F)
    policy = EscapePolicy(budget=1500)
    starts = np.array([2 + 0j, -5 + 0j, 0.5 + 0.5j, 1.2 - 0.3j, -0.3 + 0.3j, 0.9 + 0j])
    batch = classify_batch(spec, starts, policy)
    for index, z in enumerate(starts):
        record = iterate(spec, complex(z), policy)
        assert Classification.from_code(batch.classification[index]) is record.classification
        assert batch.iterations[index] == record.iterations_used
        assert batch.returns[index] == record.returns


def test_long_orbits_are_thinned(spec_of):
    policy = EscapePolicy(escape_radius=1e6, budget=3000)
    record = iterate(spec_of(MapKind.PLANAR_F), 2 + 0j, policy)
    assert record.classification is Classification.UNDETERMINED
    assert record.iterations_used == 3000
    assert record.indices[:1024] == list(range(1024))
    assert all(k % 16 == 0 for k in record.indices[1024:])
    assert record.indices[-1] == 2992
    assert len(record.points) == len(record.indices)


@pytest.mark.parametrize("n", [2, 3])
def test_ring_images_return(spec_of, n):
    result = classify_batch(spec_of(MapKind.PLANAR_F), sample_ring_image(n, 50, seed=n), EscapePolicy())
    assert np.all(result.classification == Classification.RETURNING.code)
    assert result.returns.min() >= 5


def test_orbit_that_never_leaves_the_disk_is_undetermined(spec_of):
    record = iterate(spec_of(MapKind.PLANAR_G), 0.25 + 0j, EscapePolicy(budget=200))
    assert record.classification is Classification.UNDETERMINED
    assert record.returns == 200
    assert max(abs(p) for p in record.points) < 1.0


def test_ring_points_starting_in_the_disk_still_return(spec_of):
    points = sample_ring_image(2, 200, seed=7)
    inside = points[np.abs(points) <= 1.0]
    assert inside.size > 0
    result = classify_batch(spec_of(MapKind.PLANAR_F), inside, EscapePolicy())
    assert np.all(result.classification == Classification.RETURNING.code)


# ---------------------------------------------------------------------------
# rotation inequalities and sign flips

def test_extra_rotation_floor():
    assert extra_rotation_floor(0.5, 5) == pytest.approx(0.5 * math.sqrt(2) / 2 / 36)


@pytest.mark.parametrize("n, t, c", [(5, 0.3, 0.5), (5, 0.0, 0.5), (10, -0.4, 0.3), (2, 1.5, 0.7)])
def test_rotation_inequalities_hold(n, t, c):
    check = verify_rotation_lower(_in_annulus(n, t), c)
    assert check.annulus == n
    assert check.passed, f"margin {check.lower_margin}"
    assert check.lower_margin >= 0.0


def test_rotation_floor_at_zero_argument():
    check = verify_rotation_lower(_in_annulus(5, 0.0), C)
    assert check.image_arg >= extra_rotation_floor(C, 5)
    assert check.upper_bound is None


@pytest.mark.parametrize("n", range(2, 8))
def test_rotation_inequalities_on_samples(n):
    for z in sample_annulus(n, 200, seed=100 + n, right_half=True):
        assert verify_rotation_lower(complex(z), C).passed


@pytest.mark.parametrize("z", [0.3 + 0j, -0.6 + 0.1j, 0.6j])
def test_rotation_preconditions(z):
    with pytest.raises(PreconditionError):
        verify_rotation_lower(z, C)


def test_sign_flip_found_within_bound():
    result = find_sign_flip(_in_annulus(2, 1.0), C)
    assert result.found
    assert 1 <= result.index <= result.predicted_bound


def test_sign_flip_past_the_imaginary_axis():
    index = find_sign_flips(np.array([_in_annulus(2, math.pi / 2 + 0.01)]), C, 10)
    assert index.tolist() == [1]


def test_sign_flips_on_samples():
    index = find_sign_flips(sample_annulus(3, 1000, seed=9, right_half=True), C, 1000)
    assert np.all(index >= 1)
    assert index.max() <= 500


def test_predicted_bound_dominates_actual_flip():
    for n in range(2, 7):
        z = sample_annulus(n, 40, seed=n, right_half=True)
        actual = find_sign_flips(z, C, 1000)
        for point, k in zip(z, actual):
            assert 0 < k <= predicted_flip_bound(complex(point), C)


def test_sign_flip_reports_not_found():
    result = find_sign_flip(_in_annulus(4, -1.0), 0.1, k_max=1)
    assert not result.found
    assert result.index is None


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_argument_bounds_hold_along_orbits(n):
    growth = 1.0 + 2.0 * C / math.pi
    shrink = 1.0 - 2.0 * C / math.pi
    z = sample_annulus(n, 100, seed=200 + n, right_half=True)
    steps = 0
    for k in range(1000):
        z = z[z.real > 0.0]
        if not z.size:
            break
        t = np.angle(z)
        image = g_kernel(z, C)
        t_next = np.angle(image)
        assert all(annulus_index(complex(w)) == n + k for w in z)
        positive = t > 0.0
        assert np.all(t_next[positive] >= growth * t[positive] - 1e-12)
        floor = shrink * t[~positive] + extra_rotation_floor(C, n + k)
        assert np.all(t_next[~positive] >= floor - 1e-12)
        z = image
        steps += 1
    assert z.size == 0, f"{z.size} orbits still in the right half-plane after {steps} steps"


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_orbits_march_through_annuli(n):
    z = sample_annulus(n, 20, seed=n)
    for k in range(1, 31):
        z = g_kernel(z, C)
        assert all(annulus_index(complex(w)) == n + k for w in z)


# ---------------------------------------------------------------------------
# returns, the integer ray and the unit disk

def test_detect_returns():
    z0 = complex(sample_ring_image(3, 1, seed=1)[0])
    assert detect_returns(z0, C, 500) >= 5
    assert detect_returns(2 + 0j, C, 500) == 0
    assert detect_returns(-5 + 0j, C, 100) == 0
    assert detect_returns(0.5 + 0j, C, 100) == 100
    assert detect_returns(np.array([2 + 0j, 0.5 + 0j]), C, 50).tolist() == [0, 50]


@pytest.mark.parametrize("n, steps, tolerance", [(2, 100, 1e-6), (2, 1, 1e-12), (50, 50, 1e-6)])
def test_integer_ray_check(n, steps, tolerance):
    assert integer_ray_check(n, steps) < tolerance


def test_integer_ray_check_needs_steps():
    with pytest.raises(PreconditionError):
        integer_ray_check(2, 0)


def test_disk_attraction():
    moduli = disk_attraction(0.5 + 0j, C, 20)
    expected = 1.0 - 1.0 / (np.arange(21) + 2)
    assert np.allclose(moduli, expected, atol=1e-12)
    assert np.all(np.diff(moduli) >= 0.0)
    assert np.all(moduli < 1.0)


# ---------------------------------------------------------------------------
# the cylindrical example

def test_cylinder_orbits_have_period_two():
    p = CylPoint3(r=1.5, theta=0.3, x3=0.2)
    report = cyl3d_orbit(p, 1.0)
    assert report.period == 2
    assert report.closure_error < 1e-12
    assert report.max_modulus == pytest.approx(math.hypot(1.5 * math.exp(math.cos(0.3)), 0.2), rel=1e-12)


def test_cylinder_axis_is_fixed():
    report = cyl3d_orbit(CylPoint3(r=0.0, x3=3.0), 1.0)
    assert report.period == 1
    assert report.closure_error == 0.0
