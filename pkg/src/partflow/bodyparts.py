"""Body part labeling from a skeleton, and label transfer between frames.

A point's part is the bone segment it is closest to; when a frame has no
skeleton, labels are carried over from a labeled frame by k-NN majority vote.
"""

from __future__ import annotations

import numpy as np

from .core import PartLabels, PointCloud, Skeleton
from .spatial import NeighborIndex

__all__ = [
    "DEFAULT_JOINT_NAMES",
    "DEFAULT_BONES",
    "make_skeleton",
    "point_segment_distance",
    "segment_distances",
    "assign_labels",
    "transfer_labels",
]

DEFAULT_JOINT_NAMES = (
    "pelvis",
    "neck",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

# 14 bone segments over the 15 joints above; the bone order defines the part
# indices used everywhere else.
DEFAULT_BONES = (
    (2, 1),  # head - neck
    (1, 0),  # torso: neck - pelvis
    (1, 3),  # neck - left shoulder
    (1, 4),  # neck - right shoulder
    (3, 5),  # left upper arm
    (4, 6),  # right upper arm
    (5, 7),  # left forearm
    (6, 8),  # right forearm
    (0, 9),  # pelvis - left hip
    (0, 10),  # pelvis - right hip
    (9, 11),  # left thigh
    (10, 12),  # right thigh
    (11, 13),  # left shin
    (12, 14),  # right shin
)


def make_skeleton(joints: np.ndarray, bones=DEFAULT_BONES) -> Skeleton:
    """Build a skeleton over the standard 15-joint set."""
    return Skeleton(joints, DEFAULT_JOINT_NAMES, tuple(bones))


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point ``p`` to the closed segment [a, b]."""
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ab = b - a
    denom = float(ab @ ab)
    if denom <= 0.0:
        raise ValueError("segment endpoints coincide")
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def segment_distances(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray) -> np.ndarray:
    """(n, K) distances from each point to each closed segment.

    ``seg_a`` and ``seg_b`` are (K, 3) segment endpoint arrays.
    """
    points = np.asarray(points, dtype=np.float64)
    ab = seg_b - seg_a  # (K, 3)
    denom = np.einsum("kd,kd->k", ab, ab)
    if np.any(denom <= 0.0):
        raise ValueError("degenerate segment with coincident endpoints")
    ap = points[:, None, :] - seg_a[None, :, :]  # (n, K, 3)
    t = np.clip(np.einsum("nkd,kd->nk", ap, ab) / denom, 0.0, 1.0)
    closest = seg_a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=2)


def assign_labels(cloud: PointCloud, skeleton: Skeleton) -> PartLabels:
    """Label each point with its nearest bone segment (ties -> lower bone index)."""
    seg_a, seg_b = skeleton.bone_endpoints()
    dists = segment_distances(cloud.points, seg_a, seg_b)
    return PartLabels(np.argmin(dists, axis=1), skeleton.num_parts)


def transfer_labels(
    src: PointCloud, src_labels: PartLabels, dst: PointCloud, k: int
) -> PartLabels:
    """Carry labels from a labeled cloud onto an unlabeled one.

    Each destination point takes the majority hard label among its ``k``
    nearest source points; the soft row records the vote fractions. Majority
    ties go to the lowest part index.
    """
    if len(src_labels) != len(src):
        raise ValueError("source labels do not align with the source cloud")
    if k < 1:
        raise ValueError("k must be at least 1")
    k = min(k, len(src))
    index = NeighborIndex(src)
    neighbor_idx, _ = index.knn_batch(dst.points, k)
    votes = src_labels.hard[neighbor_idx]  # (m, k)
    num_parts = src_labels.num_parts
    counts = np.zeros((len(dst), num_parts), dtype=np.float64)
    rows = np.repeat(np.arange(len(dst)), k)
    np.add.at(counts, (rows, votes.ravel()), 1.0)
    soft = counts / k
    return PartLabels(np.argmax(soft, axis=1), num_parts, soft)
