import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pfslam.geometry import (
    Point2D,
    Pose2D,
    RigidTransform2D,
    apply,
    apply_to_points,
    compose,
    inverse,
    normalize_angle,
    normalize_angles,
    polar_to_cartesian,
)

# Independent oracle: 3x3 homogeneous matrices. Everything here is checked
# against plain matrix algebra rather than the angle-based implementation.


def to_matrix(t: RigidTransform2D) -> np.ndarray:
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    return np.array([[c, -s, t.tx], [s, c, t.ty], [0.0, 0.0, 1.0]])


def matrix_apply(m: np.ndarray, p: Point2D) -> np.ndarray:
    return (m @ np.array([p.x, p.y, 1.0]))[:2]


def random_transform(rng) -> RigidTransform2D:
    return RigidTransform2D(
        rng.uniform(-math.pi, math.pi), rng.uniform(-50, 50), rng.uniform(-50, 50)
    )


finite_angle = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


class TestNormalizeAngle:
    def test_zero(self):
        assert normalize_angle(0.0) == 0.0

    def test_odd_pi_multiple(self):
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi, abs=1e-12)

    def test_pi_maps_to_pi(self):
        # the convention is (-pi, pi]: both endpoints land on +pi
        assert normalize_angle(math.pi) == math.pi
        assert normalize_angle(-math.pi) == math.pi

    def test_minus_seven_point_five(self):
        # oracle: add/subtract 2*pi until in range
        theta = -7.5
        expected = theta
        while expected <= -math.pi:
            expected += math.tau
        assert expected == pytest.approx(-1.2168146928204138)
        assert normalize_angle(theta) == pytest.approx(expected, abs=1e-12)

    @given(finite_angle)
    def test_range_and_congruence(self, theta):
        w = normalize_angle(theta)
        assert -math.pi < w <= math.pi
        # fmod is exact, so w differs from theta by an exact multiple of 2*pi
        k = round((theta - w) / math.tau)
        assert theta - w == pytest.approx(k * math.tau, abs=1e-9 * max(1.0, abs(theta)))

    @given(st.floats(min_value=-1000, max_value=1000))
    def test_matches_repeated_shift_oracle(self, theta):
        # the shift oracle loses ~ulp per subtraction, so keep |theta| small
        expected = theta
        while expected > math.pi:
            expected -= math.tau
        while expected <= -math.pi:
            expected += math.tau
        assert normalize_angle(theta) == pytest.approx(expected, abs=1e-9)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            normalize_angle(float("nan"))

    def test_array_version_matches_scalar(self):
        rng = np.random.default_rng(7)
        thetas = rng.uniform(-100, 100, size=200)
        vec = normalize_angles(thetas)
        for t, w in zip(thetas, vec):
            assert w == normalize_angle(t)


class TestCompose:
    def test_identity(self):
        t = RigidTransform2D(0.4, 1.0, -2.0)
        assert compose(RigidTransform2D.identity(), t) == t

    def test_quarter_turn_then_translate(self):
        # rotate 90deg after translating (1,0): origin ends up at (0,1)
        t = compose(RigidTransform2D(math.pi / 2, 0.0, 0.0), RigidTransform2D(0.0, 1.0, 0.0))
        p = apply(t, Point2D(0.0, 0.0))
        assert p.x == pytest.approx(0.0, abs=1e-12)
        assert p.y == pytest.approx(1.0, abs=1e-12)

    def test_associativity_against_matrix_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            a, b, c = (random_transform(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            oracle = to_matrix(a) @ to_matrix(b) @ to_matrix(c)
            for t in (left, right):
                m = to_matrix(t)
                assert np.allclose(m, oracle, atol=1e-12)


class TestApply:
    def test_identity(self):
        assert apply(RigidTransform2D.identity(), Point2D(1.0, 0.0)) == Point2D(1.0, 0.0)

    def test_half_turn(self):
        p = apply(RigidTransform2D(math.pi, 0.0, 0.0), Point2D(1.0, 0.0))
        assert p.x == pytest.approx(-1.0, abs=1e-12)
        assert p.y == pytest.approx(0.0, abs=1e-12)

    def test_rotate_and_translate(self):
        # hand-computed: R(pi/2) @ (1,0) + (2,3) = (2,4)
        p = apply(RigidTransform2D(math.pi / 2, 2.0, 3.0), Point2D(1.0, 0.0))
        oracle = matrix_apply(to_matrix(RigidTransform2D(math.pi / 2, 2.0, 3.0)), Point2D(1.0, 0.0))
        assert p.x == pytest.approx(2.0, abs=1e-12)
        assert p.y == pytest.approx(4.0, abs=1e-12)
        assert np.allclose([p.x, p.y], oracle, atol=1e-12)

    def test_apply_matches_composed_application(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = random_transform(rng), random_transform(rng)
            p = Point2D(rng.uniform(-10, 10), rng.uniform(-10, 10))
            via_compose = apply(compose(a, b), p)
            via_chain = apply(a, apply(b, p))
            assert via_compose.x == pytest.approx(via_chain.x, abs=1e-10)
            assert via_compose.y == pytest.approx(via_chain.y, abs=1e-10)

    def test_isometry(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            t = random_transform(rng)
            p = Point2D(rng.uniform(-10, 10), rng.uniform(-10, 10))
            q = Point2D(rng.uniform(-10, 10), rng.uniform(-10, 10))
            tp, tq = apply(t, p), apply(t, q)
            assert math.dist((tp.x, tp.y), (tq.x, tq.y)) == pytest.approx(
                math.dist((p.x, p.y), (q.x, q.y)), abs=1e-10
            )

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            t = random_transform(rng)
            ident = compose(t, inverse(t))
            assert ident.rotation == pytest.approx(0.0, abs=1e-10)
            assert ident.tx == pytest.approx(0.0, abs=1e-10)
            assert ident.ty == pytest.approx(0.0, abs=1e-10)

    def test_array_apply_matches_scalar(self):
        rng = np.random.default_rng(23)
        t = random_transform(rng)
        pts = rng.uniform(-5, 5, size=(40, 2))
        out = apply_to_points(t, pts)
        for row_in, row_out in zip(pts, out):
            p = apply(t, Point2D(*row_in))
            assert row_out[0] == pytest.approx(p.x, abs=1e-12)
            assert row_out[1] == pytest.approx(p.y, abs=1e-12)


class TestPolar:
    def test_axis_cases(self):
        p = polar_to_cartesian(1.0, 0.0)
        assert (p.x, p.y) == (1.0, 0.0)
        p = polar_to_cartesian(2.0, math.pi / 2)
        assert p.x == pytest.approx(0.0, abs=1e-12)
        assert p.y == pytest.approx(2.0, abs=1e-12)

    def test_diagonal(self):
        p = polar_to_cartesian(5.0, math.pi / 4)
        assert p.x == pytest.approx(5 / math.sqrt(2), abs=1e-12)
        assert p.y == pytest.approx(5 / math.sqrt(2), abs=1e-12)

    def test_negative_range_rejected(self):
        with pytest.raises(ValueError):
            polar_to_cartesian(-0.1, 0.0)

    @given(
        st.floats(min_value=1e-6, max_value=1e4),
        st.floats(min_value=-math.pi + 1e-9, max_value=math.pi),
    )
    def test_roundtrip(self, r, a):
        p = polar_to_cartesian(r, a)
        assert math.hypot(p.x, p.y) == pytest.approx(r, abs=1e-10 * max(1.0, r))
        assert normalize_angle(math.atan2(p.y, p.x) - a) == pytest.approx(0.0, abs=1e-7)


class TestTypes:
    def test_pose_normalizes_theta(self):
        assert Pose2D(0.0, 0.0, 3 * math.pi).theta == pytest.approx(math.pi)

    def test_pose_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Pose2D(float("inf"), 0.0, 0.0)
        with pytest.raises(ValueError):
            Point2D(0.0, float("nan"))

    def test_pose_transform_roundtrip(self):
        pose = Pose2D(1.0, -2.0, 0.7)
        assert RigidTransform2D.from_pose(pose).to_pose() == pose
