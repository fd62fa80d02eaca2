import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracgrad.errors import ValidationError
from fracgrad.grid import GridSpec, ScalarField, box_mask, field_from_function
from fracgrad.holder import estimate_holder, fit_exponent, local_oscillation, sample_centers

from conftest import band_limited


def test_local_oscillation_examples():
    spec = GridSpec(1, 256)
    assert local_oscillation(ScalarField.constant(spec, 4.0), (10,), 0.05) == 0
    x = field_from_function(spec, lambda x: x)
    # a lattice ball of radius r spans 2 h floor(r / h); within h of 2r when r / h
    # has fractional part at most 1/2 (in general the gap is below 2h)
    for k in (3, 10.5, 25, 40.25):
        r = k * spec.h
        assert abs(local_oscillation(x, (128,), r) - 2 * r) <= spec.h
    assert abs(local_oscillation(x, (128,), 12.8 * spec.h) - 2 * 12.8 * spec.h) < 2 * spec.h
    with pytest.raises(ValidationError):
        local_oscillation(x, (128,), spec.h / 2)
    with pytest.raises(ValidationError):
        local_oscillation(x, (128,), 0.5)


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0.016, 0.2), r2=st.floats(0.016, 0.2), c=st.integers(0, 63))
def test_local_oscillation_monotone(r1, r2, c):
    spec = GridSpec(1, 64)
    f = band_limited(spec, np.random.default_rng(1))
    lo, hi = sorted((r1, r2))
    assert local_oscillation(f, (c,), lo) <= local_oscillation(f, (c,), hi)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.05, 1.95), r0=st.floats(0.01, 1.0), scale=st.floats(1e-3, 1e3))
def test_fit_recovers_exact_power_law(alpha, r0, scale):
    radii = [r0 / 2**j for j in range(5)]
    slope, r2 = fit_exponent(radii, [scale * r**alpha for r in radii])
    assert abs(slope - alpha) <= 1e-12
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_example_point_seven():
    radii = [0.1 / 2**j for j in range(4)]
    slope, _ = fit_exponent(radii, [r**0.7 for r in radii])
    assert abs(slope - 0.7) <= 1e-12


def test_synthetic_half_exponent():
    spec = GridSpec(1, 512)
    f = field_from_function(spec, lambda x: np.abs(np.sin(np.pi * (x - 0.5))) ** 0.5)
    region = box_mask(spec, [[0.47, 0.53]])
    est = estimate_holder(f, region, [1 / 32, 1 / 64, 1 / 128, 1 / 256])
    assert 0.45 <= est.alpha <= 0.55


def test_smooth_field_is_lipschitz(rng):
    spec = GridSpec(1, 512)
    f = band_limited(spec, rng, 3)
    est = estimate_holder(f, box_mask(spec, [[0.3, 0.7]]), [1 / 32, 1 / 64, 1 / 128, 1 / 256])
    assert est.alpha >= 0.95


def test_constant_field_sentinel():
    spec = GridSpec(1, 128)
    est = estimate_holder(ScalarField.constant(spec, 1.0), box_mask(spec, [[0.3, 0.7]]), [1 / 8, 1 / 16, 1 / 32, 1 / 64])
    assert est.alpha == 2.0 and "constant" in est.note


@pytest.mark.parametrize(
    "radii",
    [
        [0.1, 0.05, 0.025],  # too few
        [0.1, 0.04, 0.02, 0.01],  # not dyadic
        [0.02, 0.01, 0.005, 0.0025],  # below 2h
    ],
)
def test_radius_validation(radii):
    spec = GridSpec(1, 256)
    with pytest.raises(ValidationError):
        estimate_holder(ScalarField.zeros(spec), box_mask(spec, [[0.4, 0.6]]), radii)


def test_domain_margin_enforced():
    spec = GridSpec(1, 128)
    with pytest.raises(ValidationError):
        estimate_holder(
            ScalarField.zeros(spec),
            box_mask(spec, [[0.3, 0.7]]),
            [1 / 4, 1 / 8, 1 / 16, 1 / 32],
            domain=box_mask(spec, [[0.25, 0.75]]),
        )


def test_sample_centers_deterministic():
    spec = GridSpec(2, 32)
    region = box_mask(spec, [[0.2, 0.8], [0.2, 0.8]])
    a, b = sample_centers(region), sample_centers(region)
    assert len(a) == 50 and np.array_equal(a, b)
    assert all(region[tuple(c)] for c in a)


def test_shift_equivariance_and_scale(rng):
    spec = GridSpec(2, 64)
    f = band_limited(spec, rng)
    region = box_mask(spec, [[0.3, 0.7], [0.3, 0.7]])
    radii = [16 * spec.h / 2**j for j in range(4)]
    base = estimate_holder(f, region, radii)
    shifted = estimate_holder(f.roll((9, -4)), np.roll(region, (9, -4), axis=(0, 1)), radii)
    assert shifted.alpha == base.alpha
    assert estimate_holder(f * -7.5, region, radii).alpha == pytest.approx(base.alpha, abs=1e-12)
    assert 0 <= base.fit_quality <= 1
