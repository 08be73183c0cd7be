from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retinoscopy.errors import Singularity, ZeroPower, ZeroRatio
from retinoscopy.optics import (
    Movement,
    NetPower,
    OpticalSetup,
    Prescription,
    RefractiveClass,
    classify,
    estimate_power,
    far_point,
    forward_ratio,
    forward_ratio_composed,
    gross_to_net,
    movement_direction,
    net_meridional_power,
    operating_curve,
)


def exact_ratio(p, u, d):
    # rational-arithmetic evaluation of u f / ((f - d)(u + d)) with f = -1/P
    p, u, d = Fraction(p), Fraction(u), Fraction(d)
    f = -1 / p
    return u * f / ((f - d) * (u + d))


@pytest.fixture
def s44():
    return OpticalSetup(u=0.4, d=0.4)


def test_setup_validation():
    with pytest.raises(ValueError):
        OpticalSetup(u=0.0)
    with pytest.raises(ValueError):
        OpticalSetup(d=-0.1)


def test_focal_length_consistent_with_camera():
    s = OpticalSetup.from_camera(4.4e-3, 5.6e-3, 4.2e-3, 3840, 2160)
    assert s.focal_length_px == pytest.approx(4.4e-3 / (5.6e-3 / 3840), rel=1e-3)
    assert s.focal_length_px == pytest.approx(3017.14, abs=0.01)


@pytest.mark.parametrize("p, f", [(-2.0, 0.5), (2.0, -0.5)])
def test_far_point(p, f):
    assert far_point(NetPower(p)) == pytest.approx(f)


def test_far_point_zero_power():
    with pytest.raises(ZeroPower):
        far_point(0.0)


@pytest.mark.parametrize("p, r", [(0.0, 0.5), (-2.0, 2.5), (-4.0, -0.8333), (2.0, 0.2778)])
def test_forward_ratio_examples(s44, p, r):
    assert forward_ratio(p, s44).r == pytest.approx(r, abs=1e-4)


@pytest.mark.parametrize("p", [-2.0, -4.0, 2.0, 0.5, -1.25])
def test_forward_ratio_matches_rational_oracle(s44, p):
    want = float(exact_ratio(p, Fraction(2, 5), Fraction(2, 5)))
    assert forward_ratio(p, s44).r == pytest.approx(want, rel=1e-14)
    assert forward_ratio_composed(p, s44).r == pytest.approx(want, rel=1e-14)


def test_forward_ratio_singularity(s44):
    with pytest.raises(Singularity):
        forward_ratio(-2.5, s44)


@pytest.mark.parametrize("r, p", [(0.5, 0.0), (2.5, -2.0)])
def test_estimate_power_examples(s44, r, p):
    assert estimate_power(r, s44).value == pytest.approx(p, abs=1e-12)


def test_estimate_power_against(s44):
    assert estimate_power(-0.8333, s44).value == pytest.approx(-4.0, abs=1e-3)


def test_estimate_power_zero_ratio(s44):
    with pytest.raises(ZeroRatio):
        estimate_power(0.0, s44)


@pytest.mark.parametrize("pg, d, net", [(2.5, 0.4, 0.0), (0.0, 0.5, -2.0), (1.0, 1.0, 0.0)])
def test_gross_to_net(pg, d, net):
    assert gross_to_net(pg, d) == pytest.approx(net, abs=1e-12)


@pytest.mark.parametrize(
    "rx, want",
    [((-1.0, -0.5, 90.0), -1.5), ((-1.0, -0.5, 0.0), -1.0), ((2.0, -1.0, 30.0), 1.75)],
)
def test_net_meridional_power(rx, want):
    assert net_meridional_power(Prescription(*rx), 0.0).value == pytest.approx(want, abs=1e-12)


@given(sph=st.floats(-10, 10), meridian=st.floats(0, 179.99))
def test_meridional_power_without_cylinder_is_sphere(sph, meridian):
    assert net_meridional_power(Prescription(sph, 0.0, 0.0), meridian).value == pytest.approx(sph)


def test_prescription_axis_range():
    with pytest.raises(ValueError):
        Prescription(0.0, -1.0, 180.0)


@pytest.mark.parametrize("r, want", [(2.5, Movement.WITH), (-0.83, Movement.AGAINST), (120.0, Movement.NEUTRAL)])
def test_movement_direction(r, want):
    assert movement_direction(r, 50.0) is want


def test_movement_direction_zero():
    with pytest.raises(ZeroRatio):
        movement_direction(0.0)


@pytest.mark.parametrize(
    "p, label, refer",
    [
        (0.0, RefractiveClass.NORMAL, False),
        (-6.25, RefractiveClass.HIGH_MYOPIA, True),
        (3.23, RefractiveClass.MODERATE_HYPEROPIA, True),
        (-4.0, RefractiveClass.MODERATE_MYOPIA, True),
        (4.0, RefractiveClass.MODERATE_HYPEROPIA, True),
        (1.0, RefractiveClass.NORMAL, False),
        (-1.0, RefractiveClass.NORMAL, False),
    ],
)
def test_classify_examples(p, label, refer):
    c = classify(p)
    assert c.label is label and c.refer is refer


@given(st.floats(-20, 20))
def test_refer_iff_not_normal(p):
    c = classify(p)
    assert c.refer == (c.label is not RefractiveClass.NORMAL)


@settings(max_examples=300)
@given(
    u=st.sampled_from([0.3, 0.4, 0.5]),
    d=st.sampled_from([0.2, 0.35, 0.4, 0.66]),
    p=st.floats(-10, 10),
)
def test_roundtrip_property(u, d, p):
    s = OpticalSetup(u=u, d=d)
    if abs(p + 1 / d) < 0.05:
        return
    assert estimate_power(forward_ratio(p, s), s).value == pytest.approx(p, abs=1e-9)


@pytest.mark.parametrize("d", [0.2, 0.35, 0.4, 0.66])
def test_sign_structure(d):
    s = OpticalSetup(u=0.4, d=d)
    for p in np.linspace(-10, 10, 401):
        if abs(p + 1 / d) < 0.05:
            continue
        r = forward_ratio(float(p), s).r
        assert (r > 0) == (p > -1 / d)


@pytest.mark.parametrize("d, p_star", [(0.4, -2.5), (0.2, -5.0)])
def test_operating_curve_singularity(d, p_star):
    c = operating_curve(OpticalSetup(u=0.4, d=d), -6, 3, 901)
    assert c.singularity == pytest.approx(p_star)
    assert all(abs(p - p_star) <= 0.05 + 1e-9 for p in c.excluded)
    assert any(abs(p - p_star) < 1e-9 for p in c.excluded)
    # the closed band drops the same number of samples on both sides
    assert sum(p < p_star for p in c.excluded) == sum(p > p_star for p in c.excluded) == 5


def test_operating_curve_value():
    c = operating_curve(OpticalSetup(u=0.4, d=0.66), -1, 1, 3)
    assert c.samples[1].power == 0.0
    assert c.samples[1].ratio == pytest.approx(0.4 / 1.06, abs=1e-12)
    assert round(c.samples[1].ratio, 4) == 0.3774


def test_singularity_more_negative_for_shorter_distance():
    ps = [operating_curve(OpticalSetup(u=0.4, d=d), -6, 3, 10).singularity for d in (0.2, 0.4, 0.66)]
    assert ps[0] < ps[1] < ps[2]
