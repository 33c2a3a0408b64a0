"""Rigid-transform algebra: composition, inversion, and angle wrapping."""

import math

from hypothesis import given, strategies as st

from inspectsim.geometry import Pose2D, Transform2D, wrap_angle

coords = st.floats(-100.0, 100.0, allow_nan=False)
angles = st.floats(-10.0, 10.0, allow_nan=False)
transforms = st.builds(Transform2D, coords, coords, angles)


def close(a: Transform2D, b: Transform2D, tol: float = 1e-9) -> bool:
    return (
        abs(a.x - b.x) < tol
        and abs(a.y - b.y) < tol
        and abs(wrap_angle(a.theta - b.theta)) < tol
    )


def test_wrap_angle_range_and_fixed_points():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi  # interval is (-pi, pi]
    assert abs(wrap_angle(2.0 * math.pi)) < 1e-12
    assert abs(wrap_angle(3.0 * math.pi) - math.pi) < 1e-12


@given(st.floats(-1000.0, 1000.0, allow_nan=False))
def test_wrap_angle_always_in_interval(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    # same angle modulo 2*pi
    assert abs(math.sin(w) - math.sin(theta)) < 1e-9
    assert abs(math.cos(w) - math.cos(theta)) < 1e-9


def test_identity_is_neutral():
    t = Transform2D(3.0, -2.0, 0.7)
    assert close(t.compose(Transform2D.identity()), t)
    assert close(Transform2D.identity().compose(t), t)


@given(transforms)
def test_inverse_composes_to_identity(t):
    assert close(t.compose(t.inverse()), Transform2D.identity(), tol=1e-6)
    assert close(t.inverse().compose(t), Transform2D.identity(), tol=1e-6)


@given(transforms, transforms, transforms)
def test_composition_is_associative(a, b, c):
    assert close(a.compose(b).compose(c), a.compose(b.compose(c)), tol=1e-6)


@given(transforms, coords, coords)
def test_apply_matches_compose(t, x, y):
    # applying a transform to a point equals composing with a pure translation
    px, py = t.apply(x, y)
    composed = t.compose(Transform2D(x, y, 0.0))
    assert abs(composed.x - px) < 1e-9
    assert abs(composed.y - py) < 1e-9


@given(transforms, coords, coords)
def test_apply_inverse_round_trip(t, x, y):
    px, py = t.apply(x, y)
    bx, by = t.inverse().apply(px, py)
    assert abs(bx - x) < 1e-6
    assert abs(by - y) < 1e-6


@given(transforms, transforms)
def test_delta_to_recovers_target(a, b):
    # a.compose(a.delta_to(b)) == b by definition of a relative pose
    assert close(a.compose(a.delta_to(b)), b, tol=1e-6)


def test_apply_rotation_hand_case():
    quarter = Transform2D(0.0, 0.0, math.pi / 2.0)
    x, y = quarter.apply(1.0, 0.0)
    assert abs(x) < 1e-12 and abs(y - 1.0) < 1e-12


def test_pose_alias():
    assert Pose2D is Transform2D
