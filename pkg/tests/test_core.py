"""Domain type invariants and the warp/rigid algebra."""

import numpy as np
import pytest

from partflow.core import (
    FlowField,
    PartLabels,
    PointCloud,
    RigidTransform,
    Skeleton,
    SoftCorrespondence,
    compose_rigid,
    rigid_to_flow,
    warp,
)
from partflow.bodyparts import DEFAULT_BONES, DEFAULT_JOINT_NAMES, make_skeleton


def random_rotation(rng):
    # QR of a Gaussian matrix, sign-fixed to det +1
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def template_joints():
    joints = np.zeros((15, 3))
    joints[:, 2] = np.linspace(0.0, 1.4, 15)
    joints[:, 0] = np.linspace(-0.3, 0.3, 15)
    return joints


class TestPointCloud:
    def test_holds_points(self):
        cloud = PointCloud([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        assert len(cloud) == 2
        assert cloud.points.shape == (2, 3)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((0, 3)))

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((4, 2)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PointCloud([[0.0, 0.0, np.nan]])

    def test_timestamps_must_align(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((3, 3)), timestamps=[0.0, 1.0])

    def test_points_frozen(self):
        cloud = PointCloud(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 1.0


class TestFlowField:
    def test_length_checked_against_source(self):
        with pytest.raises(ValueError):
            FlowField(np.zeros((3, 3)), source_length=4)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            FlowField([[np.inf, 0.0, 0.0]])


class TestSkeleton:
    def test_default_topology(self):
        skel = make_skeleton(template_joints())
        assert len(skel.names) == 15
        assert skel.num_parts == 14
        assert len(set(skel.names)) == 15

    def test_wrong_joint_count_rejected(self):
        with pytest.raises(ValueError):
            Skeleton(np.zeros((14, 3)), DEFAULT_JOINT_NAMES[:14], DEFAULT_BONES)

    def test_bone_index_out_of_range_rejected(self):
        joints = template_joints()
        with pytest.raises(ValueError):
            Skeleton(joints, DEFAULT_JOINT_NAMES, ((0, 15),))

    def test_degenerate_bone_rejected(self):
        joints = template_joints()
        joints[1] = joints[0]
        with pytest.raises(ValueError):
            Skeleton(joints, DEFAULT_JOINT_NAMES, ((0, 1),))

    def test_bone_endpoints_shapes(self):
        skel = make_skeleton(template_joints())
        a, b = skel.bone_endpoints()
        assert a.shape == (14, 3) and b.shape == (14, 3)


class TestPartLabels:
    def test_range_checked(self):
        with pytest.raises(ValueError):
            PartLabels([0, 3], num_parts=3)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            PartLabels([-1], num_parts=3)

    def test_soft_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            PartLabels([0], num_parts=2, soft=[[0.6, 0.6]])

    def test_hard_must_match_soft_argmax(self):
        with pytest.raises(ValueError):
            PartLabels([0], num_parts=2, soft=[[0.25, 0.75]])

    def test_valid_soft_accepted(self):
        labels = PartLabels([1], num_parts=2, soft=[[0.25, 0.75]])
        assert labels.hard[0] == 1


class TestRigidTransform:
    def test_identity(self):
        t = RigidTransform(np.eye(3), np.zeros(3))
        pts = np.array([[1.0, 2.0, 3.0]])
        assert np.allclose(t.apply(pts), pts)

    def test_rejects_reflection(self):
        mirror = np.diag([-1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            RigidTransform(mirror, np.zeros(3))

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            RigidTransform(np.eye(3) * 2.0, np.zeros(3))

    def test_pure_translation(self):
        t = RigidTransform(np.eye(3), [0.0, 0.0, 1.0])
        cloud = PointCloud([[1.0, 1.0, 1.0]])
        assert np.allclose(compose_rigid(t, cloud).points, [[1.0, 1.0, 2.0]])

    def test_quarter_turn_about_z(self):
        c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        t = RigidTransform(rot, np.zeros(3))
        cloud = PointCloud([[1.0, 0.0, 0.0]])
        assert np.allclose(
            compose_rigid(t, cloud).points, [[0.0, 1.0, 0.0]], atol=1e-12
        )


class TestSoftCorrespondence:
    def test_rows_must_be_stochastic(self):
        with pytest.raises(ValueError):
            SoftCorrespondence([[0.5, 0.4]])

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            SoftCorrespondence([[1.5, -0.5]])


class TestWarp:
    def test_single_point(self):
        out = warp(PointCloud([[0.0, 0.0, 0.0]]), FlowField([[1.0, 2.0, 3.0]]))
        assert np.allclose(out.points, [[1.0, 2.0, 3.0]])

    def test_zero_flow_identity(self):
        rng = np.random.default_rng(3)
        cloud = PointCloud(rng.normal(size=(20, 3)))
        out = warp(cloud, FlowField(np.zeros((20, 3))))
        assert np.array_equal(out.points, cloud.points)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            warp(PointCloud(np.zeros((2, 3))), FlowField(np.zeros((3, 3))))

    def test_rigid_flow_equals_compose(self):
        # warp with a rigid-derived flow must land exactly on the
        # rigidly transformed cloud
        rng = np.random.default_rng(11)
        cloud = PointCloud(rng.normal(size=(512, 3)))
        transform = RigidTransform(random_rotation(rng), rng.normal(size=3))
        via_flow = warp(cloud, rigid_to_flow(transform, cloud))
        direct = compose_rigid(transform, cloud)
        assert np.abs(via_flow.points - direct.points).max() < 1e-12

    def test_warp_compose_property_random_transforms(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            cloud = PointCloud(rng.normal(size=(33, 3)))
            transform = RigidTransform(
                random_rotation(rng), rng.normal(size=3)
            )
            via_flow = warp(cloud, rigid_to_flow(transform, cloud))
            direct = compose_rigid(transform, cloud)
            assert np.abs(via_flow.points - direct.points).max() < 1e-12
