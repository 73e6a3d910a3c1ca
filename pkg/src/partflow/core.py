"""Shared value types for sparse human point cloud registration.

All coordinates are meters in a single shared world frame. Every type is an
immutable value: arrays are copied on construction and marked read-only, so
instances are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointCloud",
    "FlowField",
    "Skeleton",
    "PartLabels",
    "RigidTransform",
    "Descriptor",
    "SoftCorrespondence",
    "warp",
    "compose_rigid",
    "rigid_to_flow",
]

ORTHONORMALITY_TOL = 1e-9
ROW_SUM_TOL = 1e-6
MIN_BONE_LENGTH = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


def _as_vectors(name: str, value, width: int = 3) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{name} must have shape (n, {width}), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points (meters, world frame).

    ``timestamps`` (seconds), when present, give the acquisition time of each
    point, aligned index-wise with ``points``.
    """

    points: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        pts = _as_vectors("points", self.points)
        if len(pts) < 1:
            raise ValueError("point cloud must contain at least one point")
        object.__setattr__(self, "points", _freeze(pts))
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=np.float64)
            if ts.shape != (len(pts),):
                raise ValueError(
                    f"timestamps length {ts.shape} does not match {len(pts)} points"
                )
            if not np.isfinite(ts).all():
                raise ValueError("timestamps contain non-finite values")
            object.__setattr__(self, "timestamps", _freeze(ts))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class FlowField:
    """Per-point 3D displacement (meters), aligned index-wise with its source cloud."""

    vectors: np.ndarray
    source_length: int | None = None

    def __post_init__(self):
        vec = _as_vectors("flow vectors", self.vectors)
        expected = len(vec) if self.source_length is None else int(self.source_length)
        if len(vec) != expected:
            raise ValueError(
                f"flow has {len(vec)} vectors but source cloud has {expected} points"
            )
        object.__setattr__(self, "vectors", _freeze(vec))
        object.__setattr__(self, "source_length", expected)

    def __len__(self) -> int:
        return len(self.vectors)

    @classmethod
    def zeros(cls, n: int) -> "FlowField":
        return cls(np.zeros((n, 3)), n)


@dataclass(frozen=True)
class Skeleton:
    """15 named joints plus the bone segments connecting them.

    Each bone is a (joint_index, joint_index) pair; the list of bones defines
    the body parts, in order. Bone endpoints must be distinct by more than
    ``MIN_BONE_LENGTH`` meters.
    """

    joints: np.ndarray
    names: tuple[str, ...]
    bones: tuple[tuple[int, int], ...]

    def __post_init__(self):
        joints = _as_vectors("joints", self.joints)
        names = tuple(str(n) for n in self.names)
        if len(joints) != 15 or len(names) != 15:
            raise ValueError(f"skeleton needs exactly 15 named joints, got {len(joints)}")
        if len(set(names)) != 15:
            raise ValueError("joint names must be unique")
        bones = tuple((int(a), int(b)) for a, b in self.bones)
        if not bones:
            raise ValueError("bone list must be nonempty")
        for a, b in bones:
            if not (0 <= a < 15 and 0 <= b < 15):
                raise ValueError(f"bone ({a}, {b}) references a joint outside 0..14")
            if np.linalg.norm(joints[a] - joints[b]) <= MIN_BONE_LENGTH:
                raise ValueError(f"bone ({a}, {b}) is degenerate (endpoints coincide)")
        object.__setattr__(self, "joints", _freeze(joints))
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "bones", bones)

    @property
    def num_parts(self) -> int:
        return len(self.bones)

    def bone_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """(K, 3) arrays of start and end joint positions, one row per bone."""
        idx = np.asarray(self.bones, dtype=np.intp)
        return self.joints[idx[:, 0]], self.joints[idx[:, 1]]


@dataclass(frozen=True)
class PartLabels:
    """Per-point body part assignment over ``num_parts`` parts.

    ``hard`` holds 0-based part indices. ``soft``, when present, holds one
    probability row per point; rows must sum to 1 and ``hard`` must equal the
    row argmax.
    """

    hard: np.ndarray
    num_parts: int
    soft: np.ndarray | None = None

    def __post_init__(self):
        hard = np.asarray(self.hard)
        if hard.ndim != 1:
            raise ValueError(f"hard labels must be 1-d, got shape {hard.shape}")
        if not np.issubdtype(hard.dtype, np.integer):
            as_int = hard.astype(np.int64)
            if not np.array_equal(as_int, hard):
                raise ValueError("hard labels must be integers")
            hard = as_int
        hard = hard.astype(np.int64)
        k = int(self.num_parts)
        if k < 1:
            raise ValueError("num_parts must be at least 1")
        if len(hard) and (hard.min() < 0 or hard.max() >= k):
            raise ValueError(f"hard labels must lie in 0..{k - 1}")
        object.__setattr__(self, "hard", _freeze(hard))
        object.__setattr__(self, "num_parts", k)
        if self.soft is not None:
            soft = _as_vectors("soft labels", self.soft, width=k)
            if len(soft) != len(hard):
                raise ValueError("soft labels length does not match hard labels")
            if soft.min() < 0:
                raise ValueError("soft labels must be nonnegative")
            sums = soft.sum(axis=1)
            if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
                raise ValueError("each soft label row must sum to 1")
            if not np.array_equal(np.argmax(soft, axis=1), hard):
                raise ValueError("hard labels must equal the argmax of soft labels")
            object.__setattr__(self, "soft", _freeze(soft))

    def __len__(self) -> int:
        return len(self.hard)

    @classmethod
    def from_soft(cls, soft: np.ndarray) -> "PartLabels":
        soft = np.asarray(soft, dtype=np.float64)
        return cls(np.argmax(soft, axis=1), soft.shape[1], soft)

    def one_hot(self) -> np.ndarray:
        """Soft rows if present, else exact one-hot rows built from ``hard``."""
        if self.soft is not None:
            return self.soft
        out = np.zeros((len(self.hard), self.num_parts))
        out[np.arange(len(self.hard)), self.hard] = 1.0
        return out


@dataclass(frozen=True)
class RigidTransform:
    """A proper rigid motion: p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3) or not np.isfinite(rot).all():
            raise ValueError("rotation must be a finite 3x3 matrix")
        if np.abs(rot.T @ rot - np.eye(3)).max() > ORTHONORMALITY_TOL:
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError("rotation matrix must have determinant +1 (no reflections)")
        trans = np.asarray(self.translation, dtype=np.float64)
        if trans.shape != (3,) or not np.isfinite(trans).all():
            raise ValueError("translation must be a finite 3-vector")
        object.__setattr__(self, "rotation", _freeze(rot))
        object.__setattr__(self, "translation", _freeze(trans))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 3) positions through the transform."""
        return points @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Descriptor:
    """Per-point feature vectors of a single fixed dimension."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValueError(f"descriptor values must be 2-d, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("descriptor values contain non-finite entries")
        object.__setattr__(self, "values", _freeze(vals))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SoftCorrespondence:
    """Row-stochastic n x m matching weights from a source onto a target cloud."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError(f"correspondence matrix must be 2-d, got shape {mat.shape}")
        if not np.isfinite(mat).all():
            raise ValueError("correspondence matrix contains non-finite entries")
        if mat.min() < 0 or mat.max() > 1.0 + ROW_SUM_TOL:
            raise ValueError("correspondence entries must lie in [0, 1]")
        if np.abs(mat.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("every correspondence row must sum to 1")
        object.__setattr__(self, "matrix", _freeze(mat))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def warp(cloud: PointCloud, flow: FlowField) -> PointCloud:
    """Displace every point of ``cloud`` by its flow vector."""
    if len(flow) != len(cloud):
        raise ValueError(f"flow length {len(flow)} does not match cloud length {len(cloud)}")
    return PointCloud(cloud.points + flow.vectors, cloud.timestamps)


def compose_rigid(transform: RigidTransform, cloud: PointCloud) -> PointCloud:
    """Apply a rigid transform to every point of ``cloud``."""
    return PointCloud(transform.apply(cloud.points), cloud.timestamps)


def rigid_to_flow(transform: RigidTransform, cloud: PointCloud) -> FlowField:
    """The flow field that carries ``cloud`` onto its rigidly transformed image."""
    return FlowField(transform.apply(cloud.points) - cloud.points, len(cloud))
