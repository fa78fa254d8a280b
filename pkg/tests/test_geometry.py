import math

import numpy as np
import pytest

from pgprune.geometry import (
    Pose2,
    compose_jacobians,
    inverse_jacobian,
    normalize_angle,
    pose_compose,
    pose_inverse,
    relative_pose,
)

from oracles import compose_via_matrices, finite_difference_jacobian


def test_identity_composition():
    out = pose_compose(Pose2(0, 0, 0), Pose2(1, 0, 0))
    assert out.to_vec() == pytest.approx([1, 0, 0])


def test_quarter_turn_maps_x_to_y():
    out = pose_compose(Pose2(0, 0, math.pi / 2), Pose2(1, 0, 0))
    assert out.to_vec() == pytest.approx([0, 1, math.pi / 2], abs=1e-15)


def test_compose_matches_matrix_product_oracle():
    a, b = Pose2(1, 2, 0.3), Pose2(0.5, -0.2, 0.1)
    expected = compose_via_matrices(a.to_vec(), b.to_vec())
    assert pose_compose(a, b).to_vec() == pytest.approx(expected, abs=1e-14)


def test_inverse_trivial_cases():
    assert pose_inverse(Pose2(0, 0, 0)).to_vec() == pytest.approx([0, 0, 0])
    assert pose_inverse(Pose2(1, 0, 0)).to_vec() == pytest.approx([-1, 0, 0])


def test_inverse_roundtrip():
    a = Pose2(1, 2, 0.3)
    assert pose_compose(a, pose_inverse(a)).to_vec() == pytest.approx([0, 0, 0], abs=1e-12)


def test_composition_associative():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b, c = (Pose2(*rng.uniform(-5, 5, 2), rng.uniform(-4, 4)) for _ in range(3))
        left = pose_compose(pose_compose(a, b), c).to_vec()
        right = pose_compose(a, pose_compose(b, c)).to_vec()
        assert np.abs(left - right).max() < 1e-10


def test_angle_always_in_half_open_interval():
    for raw in (-math.pi, math.pi, 3 * math.pi, -3 * math.pi, 7.5, -11.2, 0.0):
        wrapped = normalize_angle(raw)
        assert -math.pi < wrapped <= math.pi
        # wrapping preserves the angle modulo 2*pi
        assert math.isclose(math.sin(wrapped), math.sin(raw), abs_tol=1e-12)
        assert math.isclose(math.cos(wrapped), math.cos(raw), abs_tol=1e-12)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)


def test_relative_pose_inverts_composition():
    a, b = Pose2(0.3, -1.2, 2.1), Pose2(-0.5, 0.8, -2.9)
    rel = relative_pose(a, b)
    assert pose_compose(a, rel).to_vec() == pytest.approx(b.to_vec(), abs=1e-12)


def test_compose_jacobians_match_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(25):
        av, bv = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        a, b = Pose2(*av), Pose2(*bv)
        ja, jb = compose_jacobians(a, b)
        fa = finite_difference_jacobian(lambda v: pose_compose(Pose2(*v), b).to_vec(), a.to_vec())
        fb = finite_difference_jacobian(lambda v: pose_compose(a, Pose2(*v)).to_vec(), b.to_vec())
        assert np.abs(ja - fa).max() < 1e-5
        assert np.abs(jb - fb).max() < 1e-5


def test_inverse_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(25):
        av = rng.uniform(-2, 2, 3)
        j = inverse_jacobian(Pose2(*av))
        f = finite_difference_jacobian(lambda v: Pose2(*v).inverse().to_vec(), av)
        assert np.abs(j - f).max() < 1e-5
