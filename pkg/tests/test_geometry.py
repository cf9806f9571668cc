import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcreg.geometry import (
    RigidTransform,
    axis_angle_to_rotation,
    compose,
    invert,
    rotation_accuracy,
    rotation_to_axis_angle,
    sample_rotation_vector,
)


def random_rotation(rng):
    v = rng.uniform(-1, 1, 3)
    v *= rng.uniform(0, math.pi - 1e-3) / np.linalg.norm(v)
    return axis_angle_to_rotation(v)


class TestAxisAngle:
    def test_zero_vector_is_identity(self):
        assert np.allclose(axis_angle_to_rotation([0, 0, 0]), np.eye(3))

    def test_quarter_turn_about_z(self):
        R = axis_angle_to_rotation([0, 0, math.pi / 2])
        expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        assert np.allclose(R, expected, atol=1e-15)

    def test_identity_maps_to_zero(self):
        assert np.allclose(rotation_to_axis_angle(np.eye(3)), np.zeros(3))

    def test_quarter_turn_inverse(self):
        R = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        assert np.allclose(rotation_to_axis_angle(R), [0, 0, math.pi / 2], atol=1e-12)

    def test_round_trip_1000_random_vectors(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            v = rng.uniform(-1, 1, 3)
            norm = np.linalg.norm(v)
            v *= rng.uniform(1e-6, math.pi - 1e-6) / norm
            back = rotation_to_axis_angle(axis_angle_to_rotation(v))
            assert np.abs(back - v).max() < 1e-10

    def test_angle_pi_axis_sign_convention(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            R = axis_angle_to_rotation(axis * math.pi)
            v = rotation_to_axis_angle(R)
            # largest-magnitude component is positive
            assert v[int(np.argmax(np.abs(v)))] > 0
            # reconstruction agrees regardless of the sign choice
            assert np.abs(axis_angle_to_rotation(v) - R).max() < 1e-9

    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            rotation_to_axis_angle(np.diag([1.0, 1.0, 2.0]))

    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
            lambda v: 1e-3 < np.linalg.norm(v) <= 1.0
        ),
        st.floats(1e-3, math.pi - 1e-3),
    )
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, direction, angle):
        v = np.array(direction) / np.linalg.norm(direction) * angle
        R = axis_angle_to_rotation(v)
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(R) - 1) < 1e-9
        assert np.abs(rotation_to_axis_angle(R) - v).max() < 1e-9


class TestRigidTransform:
    def test_identity_apply(self):
        t = RigidTransform.identity()
        p = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(t.apply(p), p)

    def test_pure_translation(self):
        t = RigidTransform(np.eye(3), [1, 2, 3])
        assert np.allclose(t.apply([0, 0, 0]), [1, 2, 3])

    def test_apply_invert_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            t = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
            p = rng.uniform(-1, 1, 3)
            assert np.abs(compose(t, invert(t)).apply(p) - p).max() < 1e-12

    def test_compose_with_identity(self):
        rng = np.random.default_rng(4)
        t = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        c = compose(t, RigidTransform.identity())
        assert np.allclose(c.rotation, t.rotation)
        assert np.allclose(c.translation, t.translation)

    def test_invert_identity(self):
        inv = invert(RigidTransform.identity())
        assert np.allclose(inv.matrix(), np.eye(4))

    def test_group_axiom(self):
        rng = np.random.default_rng(5)
        t = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        near_id = compose(invert(t), t).matrix()
        assert np.abs(near_id - np.eye(4)).max() < 1e-12

    def test_compose_matches_sequential_application(self):
        rng = np.random.default_rng(6)
        a = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        b = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        p = rng.uniform(-1, 1, (10, 3))
        assert np.allclose(compose(a, b).apply(p), a.apply(b.apply(p)), atol=1e-12)

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(8)
        t = RigidTransform(random_rotation(rng), rng.uniform(-1, 1, 3))
        back = RigidTransform.from_matrix(t.matrix())
        assert np.array_equal(back.rotation, t.rotation)
        assert np.array_equal(back.translation, t.translation)

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


class TestSampleRotationVector:
    def test_small_mode_bounds(self):
        for seed in range(20):
            v = sample_rotation_vector("small", seed)
            assert (v >= -math.pi / 8).all() and (v < math.pi / 8).all()

    def test_large_mode_bounds(self):
        for seed in range(20):
            v = sample_rotation_vector("large", seed)
            assert (v >= -math.pi / 2).all() and (v < math.pi / 2).all()

    def test_fixed_seed_reproducible(self):
        a = sample_rotation_vector("small", 1234)
        b = sample_rotation_vector("small", 1234)
        assert np.array_equal(a, b)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            sample_rotation_vector("medium", 0)


class TestRotationAccuracy:
    def test_zero_for_equal_rotations(self):
        rng = np.random.default_rng(9)
        R = random_rotation(rng)
        assert rotation_accuracy(R, R) < 1e-14

    def test_half_turn_about_x(self):
        R = np.diag([1.0, -1.0, -1.0])
        assert abs(rotation_accuracy(np.eye(3), R) - math.sqrt(8)) < 1e-12

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            a, b = random_rotation(rng), random_rotation(rng)
            rel = b @ a.T
            brute = math.sqrt(sum((float(i == j) - rel[i, j]) ** 2 for i in range(3) for j in range(3)))
            assert abs(rotation_accuracy(a, b) - brute) < 1e-12

    def test_symmetry_and_left_invariance(self):
        rng = np.random.default_rng(12)
        a, b, q = random_rotation(rng), random_rotation(rng), random_rotation(rng)
        assert abs(rotation_accuracy(a, b) - rotation_accuracy(b, a)) < 1e-12
        assert abs(rotation_accuracy(q @ a, q @ b) - rotation_accuracy(a, b)) < 1e-12
