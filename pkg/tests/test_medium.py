import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layered_isp.errors import InvalidConfigError, InvalidDimensionError, OutsideApertureError
from layered_isp.medium import (Direction, Medium, aperture_contains, critical_angle, mirror,
                                observation_angle, reflection_H, transmission_T,
                                transmitted_direction)


def test_critical_angle_equal_speeds_is_zero():
    assert critical_angle(Medium(2, 2)) == 0.0


def test_critical_angle_matches_oracle(oracle, ref_medium):
    assert critical_angle(Medium(2, 1)) == pytest.approx(oracle["theta_c_2_1"], abs=1e-15)
    assert critical_angle(Medium(2, 1)) == pytest.approx(math.pi / 3, abs=1e-15)
    assert critical_angle(ref_medium) == pytest.approx(oracle["theta_c_ref"], rel=1e-12)


def test_critical_angle_slower_lower_medium():
    assert critical_angle(Medium(1, 2)) == 0.0


@pytest.mark.parametrize("c_minus, c_plus", [(0, 1), (1, -1), (float("inf"), 1)])
def test_medium_rejects_bad_speeds(c_minus, c_plus):
    with pytest.raises(InvalidConfigError):
        Medium(c_minus, c_plus)


def test_aperture_examples(ref_medium):
    assert aperture_contains(ref_medium, 2, math.pi / 2)
    assert aperture_contains(ref_medium, 3, math.pi / 2)
    assert not aperture_contains(Medium(2, 1), 2, 0.5)
    tc = ref_medium.theta_c
    assert not aperture_contains(ref_medium, 2, tc)
    assert not aperture_contains(ref_medium, 2, math.pi - tc)
    assert not aperture_contains(ref_medium, 3, math.pi / 2 + 1e-9)


def test_aperture_bad_dimension(ref_medium):
    with pytest.raises(InvalidDimensionError):
        aperture_contains(ref_medium, 4, 1.0)


def test_aperture_vectorised(ref_medium):
    got = aperture_contains(ref_medium, 2, np.array([0.0, 1.0, 3.1]))
    assert got.tolist() == [False, True, False]


def test_transmitted_direction_examples():
    m = Medium(2, 1.3)
    assert transmitted_direction(m, Direction.from_angles(2, math.pi / 2)).vector == pytest.approx((0, 1), abs=1e-15)
    same = Medium(2, 2)
    d = Direction.from_angles(2, 0.7)
    assert transmitted_direction(same, d).vector == pytest.approx(d.vector, abs=1e-15)
    edge = transmitted_direction(Medium(2, 1), Direction.from_angles(2, math.pi / 3))
    assert edge.vector == pytest.approx((1, 0), abs=1e-7)


def test_transmitted_direction_outside_aperture():
    with pytest.raises(OutsideApertureError):
        transmitted_direction(Medium(2, 1), Direction.from_angles(2, 0.3))


def test_transmitted_direction_3d_keeps_azimuth(ref_medium):
    d = Direction.from_angles(3, 0.9, 1.1)
    t = transmitted_direction(ref_medium, d)
    v = np.array(t.vector)
    assert np.linalg.norm(v) == pytest.approx(1, abs=1e-12)
    assert math.atan2(v[1], v[0]) == pytest.approx(1.1, abs=1e-12)


def test_T_H_examples(oracle):
    assert transmission_T(Medium(2, 2), math.pi / 4) == pytest.approx(1, abs=1e-15)
    T, H = oracle["T_H_2_1_half_pi"]
    assert transmission_T(Medium(2, 1), math.pi / 2) == pytest.approx(4 / 3, abs=1e-15)
    assert transmission_T(Medium(2, 1), math.pi / 2) == pytest.approx(T, abs=1e-15)
    assert reflection_H(Medium(2, 1), math.pi / 2) == pytest.approx(H, abs=1e-15)
    assert reflection_H(Medium(2, 2), 1.2) == pytest.approx(0, abs=1e-15)


def test_T_equal_speeds_grazing_limit():
    assert transmission_T(Medium(2, 2), 0.0) == 1.0
    assert transmission_T(Medium(2, 2), 1e-300) == pytest.approx(1.0)


def test_T_H_match_mpmath(oracle, ref_medium):
    for angle, (T, H) in oracle["T_H_ref"].items():
        assert transmission_T(ref_medium, float(angle)) == pytest.approx(T, rel=1e-13)
        assert reflection_H(ref_medium, float(angle)) == pytest.approx(H, rel=1e-12, abs=1e-15)


def test_T_at_aperture_boundary(ref_medium):
    tc = ref_medium.theta_c
    assert transmission_T(ref_medium, tc) == pytest.approx(2, abs=1e-6)
    assert reflection_H(ref_medium, tc) == pytest.approx(1, abs=1e-6)


def test_T_outside_aperture(ref_medium):
    with pytest.raises(OutsideApertureError):
        transmission_T(ref_medium, 0.01)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.06, math.pi - 0.06), st.floats(1.0, 3.0), st.floats(0.3, 1.0))
def test_T_equals_one_plus_H(theta, c_minus, ratio):
    m = Medium(c_minus, c_minus * ratio)
    if not aperture_contains(m, 2, theta):
        return
    T, H = transmission_T(m, theta), reflection_H(m, theta)
    assert abs(T - 1 - H) <= 1e-12
    assert 0 < T <= 2 and abs(H) <= 1


@settings(max_examples=100, deadline=None)
@given(st.floats(0.06, math.pi / 2), st.floats(-math.pi, math.pi))
def test_transmitted_direction_unit_and_upward(theta, phi):
    m = Medium(2.0, 2.0 - math.pi / 1000)
    if not aperture_contains(m, 3, theta):
        return
    v = np.array(transmitted_direction(m, Direction.from_angles(3, theta, phi)).vector)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    assert v[-1] >= 0


def test_critical_angle_monotone_in_c_plus():
    angles = [critical_angle(Medium(2, cp)) for cp in np.linspace(0.5, 3, 40)]
    assert all(a >= b for a, b in zip(angles, angles[1:]))


def test_mirror_involution():
    x = np.array([[0.3, -0.2, -0.7], [1, 2, 3]])
    assert np.array_equal(mirror(mirror(x)), x)
    assert mirror(x)[0, -1] == 0.7


def test_direction_forms_agree():
    d = Direction.from_angles(3, 0.4, -2.0)
    e = Direction.from_vector(d.vector)
    assert e.theta == pytest.approx(0.4) and e.phi == pytest.approx(-2.0)
    assert np.linalg.norm(d.as_array()) == pytest.approx(1, abs=1e-12)
    with pytest.raises(InvalidDimensionError):
        Direction.from_angles(4, 0.1)


def test_observation_angle_inverts_transmitted_direction(ref_medium):
    h = np.linspace(-1, 1, 11)
    theta = observation_angle(ref_medium, h)
    for hi, th in zip(h, theta):
        t = transmitted_direction(ref_medium, Direction.from_angles(2, th))
        assert t.vector[0] == pytest.approx(hi, abs=1e-12)
    assert math.isnan(observation_angle(Medium(1, 2), 0.9))
