"""Descriptors, soft correspondence, and correspondence-derived flow."""

import numpy as np
import pytest

from partflow.core import Descriptor, PartLabels, PointCloud
from partflow.correspond import (
    CorrespondenceConfig,
    flow_from_correspondence,
    handcrafted_descriptor,
    load_external_descriptor,
    soft_correspondence,
)


def descriptor_for(points, labels, num_parts, radius=0.25):
    return handcrafted_descriptor(
        PointCloud(points), PartLabels(labels, num_parts), None, radius
    )


class TestConfig:
    def test_temperature_clamped_to_floor(self):
        cfg = CorrespondenceConfig(temperature=0.001)
        assert cfg.temperature == pytest.approx(0.02)

    def test_floor_must_be_positive(self):
        with pytest.raises(ValueError):
            CorrespondenceConfig(temperature_floor=0.0)

    def test_unknown_provider_rejected(self):
        with pytest.raises(ValueError, match="provider"):
            CorrespondenceConfig(descriptor_provider="learned")

    def test_external_requires_path(self):
        with pytest.raises(ValueError, match="descriptor_path"):
            CorrespondenceConfig(descriptor_provider="external")


class TestHandcraftedDescriptor:
    def test_single_point_degenerate(self):
        desc = descriptor_for([[3.0, 2.0, 1.0]], [4], num_parts=14)
        row = desc.values[0]
        assert desc.dim == 7 + 14
        assert row[0] == 0.0                      # height above centroid
        assert np.allclose(row[1:4], 0.0)         # part offset
        assert np.allclose(row[4:7], 0.0)         # eigenvalues
        onehot = row[7:]
        assert onehot[4] == 1.0 and onehot.sum() == 1.0

    def test_translation_invariance(self):
        rng = np.random.default_rng(10)
        pts = rng.normal(size=(60, 3))
        labels = rng.integers(0, 14, size=60)
        base = descriptor_for(pts, labels, 14)
        moved = descriptor_for(pts + [10.0, -4.0, 2.5], labels, 14)
        assert np.abs(base.values - moved.values).max() < 1e-9

    def test_eigenvalues_sorted_nonnegative(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(scale=0.1, size=(100, 3))
        desc = descriptor_for(pts, np.zeros(100, dtype=int), 3)
        eig = desc.values[:, 4:7]
        assert (eig >= 0.0).all()
        assert (np.diff(eig, axis=1) <= 1e-15).all()

    def test_matched_points_closer_than_random_pairs(self):
        # same sampled geometry in two frames, one rigidly shifted:
        # a point and its true match should be nearer in descriptor
        # space than the median random pairing for most points
        rng = np.random.default_rng(12)
        pts = rng.normal(size=(150, 3)) * [0.2, 0.2, 0.6]
        labels = (pts[:, 2] > 0).astype(int)
        a = descriptor_for(pts, labels, 2)
        b = descriptor_for(pts + [0.4, 0.1, 0.0], labels, 2)
        matched = np.linalg.norm(a.values - b.values, axis=1)
        sample = rng.integers(0, 150, size=(400, 2))
        random_d = np.linalg.norm(
            a.values[sample[:, 0]] - b.values[sample[:, 1]], axis=1
        )
        frac = (matched < np.median(random_d)).mean()
        assert frac >= 0.8

    def test_labels_length_checked(self):
        with pytest.raises(ValueError):
            descriptor_for(np.zeros((3, 3)) + np.arange(3)[:, None], [0, 1], 2)


class TestSoftCorrespondence:
    def test_hand_softmax_values(self):
        # distances (0.1, 0.2) at temperature 0.1 -> softmax(-1, -2)
        src = Descriptor(np.array([[0.0]]))
        dst = Descriptor(np.array([[0.1], [0.2]]))
        cfg = CorrespondenceConfig(temperature=0.1)
        matrix = soft_correspondence(src, dst, cfg).matrix
        assert matrix[0, 0] == pytest.approx(0.7311, abs=1e-4)
        assert matrix[0, 1] == pytest.approx(0.2689, abs=1e-4)

    def test_identical_target_rows_give_uniform(self):
        src = Descriptor(np.array([[1.0, 2.0]]))
        dst = Descriptor(np.tile([0.5, 0.5], (5, 1)))
        matrix = soft_correspondence(
            src, dst, CorrespondenceConfig()
        ).matrix
        assert np.allclose(matrix, 0.2)

    def test_exact_match_dominates_at_floor(self):
        rng = np.random.default_rng(13)
        dst_values = rng.normal(size=(12, 6))
        src = Descriptor(dst_values[3:4].copy())
        cfg = CorrespondenceConfig(temperature=1e-6)  # clamps to 0.02
        matrix = soft_correspondence(
            src, Descriptor(dst_values), cfg
        ).matrix
        assert matrix[0, 3] > 0.99

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(14)
        src = Descriptor(rng.normal(size=(30, 5)))
        dst = Descriptor(rng.normal(size=(40, 5)))
        matrix = soft_correspondence(src, dst, CorrespondenceConfig()).matrix
        assert np.abs(matrix.sum(axis=1) - 1.0).max() < 1e-6

    def test_monotone_in_descriptor_distance(self):
        src = Descriptor(np.array([[0.0, 0.0]]))
        dst = Descriptor(np.array([[0.5, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        matrix = soft_correspondence(src, dst, CorrespondenceConfig()).matrix
        assert matrix[0, 0] > matrix[0, 1] > matrix[0, 2]

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            soft_correspondence(
                Descriptor(np.zeros((2, 3))),
                Descriptor(np.zeros((2, 4))),
                CorrespondenceConfig(),
            )

    def test_lower_temperature_sharpens(self):
        src = Descriptor(np.array([[0.0]]))
        dst = Descriptor(np.array([[0.1], [0.3]]))
        warm = soft_correspondence(
            src, dst, CorrespondenceConfig(temperature=0.5)
        ).matrix
        cold = soft_correspondence(
            src, dst, CorrespondenceConfig(temperature=0.05)
        ).matrix
        assert cold[0, 0] > warm[0, 0]


class TestFlowFromCorrespondence:
    def test_identity_correspondence_zero_flow(self):
        rng = np.random.default_rng(15)
        pts = rng.normal(size=(8, 3))
        cloud = PointCloud(pts)
        from partflow.core import SoftCorrespondence

        matrix = SoftCorrespondence(np.eye(8))
        flow = flow_from_correspondence(matrix, cloud, cloud)
        assert np.abs(flow.vectors).max() < 1e-15

    def test_even_split_hand_case(self):
        from partflow.core import SoftCorrespondence

        matrix = SoftCorrespondence(np.array([[0.5, 0.5]]))
        flow = flow_from_correspondence(
            matrix,
            PointCloud([[0.0, 0.0, 0.0]]),
            PointCloud([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
        )
        assert np.allclose(flow.vectors, [[1.0, 0.0, 0.0]])

    def test_matches_matrix_product_oracle(self):
        from partflow.core import SoftCorrespondence

        rng = np.random.default_rng(16)
        for _ in range(25):
            n = int(rng.integers(1, 17))
            m = int(rng.integers(1, 17))
            raw = rng.uniform(0.1, 1.0, size=(n, m))
            raw /= raw.sum(axis=1, keepdims=True)
            p = rng.normal(size=(n, 3))
            q = rng.normal(size=(m, 3))
            flow = flow_from_correspondence(
                SoftCorrespondence(raw), PointCloud(p), PointCloud(q)
            )
            want = raw @ q - p
            assert np.abs(flow.vectors - want).max() < 1e-12

    def test_warped_points_inside_target_bbox(self):
        from partflow.core import SoftCorrespondence

        rng = np.random.default_rng(17)
        raw = rng.uniform(0.01, 1.0, size=(20, 9))
        raw /= raw.sum(axis=1, keepdims=True)
        p = rng.normal(size=(20, 3))
        q = rng.normal(size=(9, 3))
        flow = flow_from_correspondence(
            SoftCorrespondence(raw), PointCloud(p), PointCloud(q)
        )
        warped = p + flow.vectors
        assert (warped >= q.min(axis=0) - 1e-12).all()
        assert (warped <= q.max(axis=0) + 1e-12).all()

    def test_column_permutation_invariance(self):
        from partflow.core import SoftCorrespondence

        rng = np.random.default_rng(18)
        raw = rng.uniform(0.1, 1.0, size=(6, 7))
        raw /= raw.sum(axis=1, keepdims=True)
        p = rng.normal(size=(6, 3))
        q = rng.normal(size=(7, 3))
        perm = rng.permutation(7)
        base = flow_from_correspondence(
            SoftCorrespondence(raw), PointCloud(p), PointCloud(q)
        )
        shuffled = flow_from_correspondence(
            SoftCorrespondence(raw[:, perm]), PointCloud(p), PointCloud(q[perm])
        )
        assert np.abs(base.vectors - shuffled.vectors).max() < 1e-12

    def test_shape_mismatch_rejected(self):
        from partflow.core import SoftCorrespondence

        matrix = SoftCorrespondence(np.full((2, 2), 0.5))
        with pytest.raises(ValueError):
            flow_from_correspondence(
                matrix, PointCloud(np.zeros((3, 3))), PointCloud(np.zeros((2, 3)))
            )


class TestExternalDescriptors:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(19)
        values = rng.normal(size=(5, 8))
        path = tmp_path / "desc.npy"
        np.save(path, values)
        cloud = PointCloud(rng.normal(size=(5, 3)))
        desc = load_external_descriptor(str(path), cloud)
        assert np.array_equal(desc.values, values)

    def test_row_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "desc.npy"
        np.save(path, np.zeros((4, 8)))
        with pytest.raises(ValueError, match="4"):
            load_external_descriptor(
                str(path), PointCloud(np.zeros((5, 3)) + np.arange(5)[:, None])
            )
