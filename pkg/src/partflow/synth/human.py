"""Procedurally animated human bodies for scan simulation.

A body is a capsule per bone over the 15-joint skeleton.  Capsules are
regenerated per frame from the animated bone endpoints with a frame
construction that rotates rigidly with the bone, so each body part moves
rigidly and vertex indices correspond exactly across frames.  A simple
gait (hip/arm swing, knee flex, vertical bob) animates the skeleton
while the root follows a piecewise-linear waypoint path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bodyparts import DEFAULT_BONES, make_skeleton
from ..core import Skeleton

# Joint angle limits (radians) and gait bounds.
HIP_SWING_MAX = 1.2
ARM_SWING_MAX = 1.5
KNEE_FLEX_MAX = 2.0
STEP_FREQUENCY_MAX = 4.0
BOB_MAX = 0.1

# Capsule tessellation: azimuth segments must be even so the left and
# right side of the body mirror exactly.
_AZIMUTH_SEGMENTS = 8
_LENGTH_SEGMENTS = 3
_CAP_SEGMENTS = 2

# Template joint heights and offsets as fractions of a 1.75 m body.
_TEMPLATE_HEIGHT = 1.75

# Bones whose zero-pose direction is near-lateral use the vertical
# reference when building the capsule frame; the rest use the lateral
# axis.  Indexed like DEFAULT_BONES.
_LATERAL_REF_LIMIT = 0.8


@dataclass(frozen=True)
class PoseParams:
    """Gait parameters; angles in radians, frequency in Hz."""

    step_frequency: float = 1.8
    hip_swing: float = 0.5
    arm_swing: float = 0.6
    knee_flex: float = 0.6
    bob_amplitude: float = 0.02
    phase: float = 0.0

    def __post_init__(self) -> None:
        checks = (
            ("step_frequency", self.step_frequency, STEP_FREQUENCY_MAX),
            ("hip_swing", self.hip_swing, HIP_SWING_MAX),
            ("arm_swing", self.arm_swing, ARM_SWING_MAX),
            ("knee_flex", self.knee_flex, KNEE_FLEX_MAX),
            ("bob_amplitude", self.bob_amplitude, BOB_MAX),
        )
        for name, value, limit in checks:
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be a nonnegative finite scalar")
            if value > limit:
                raise ValueError(
                    f"{name}={value} exceeds the limit {limit}"
                )
        if not np.isfinite(self.phase):
            raise ValueError("phase must be finite")


@dataclass(frozen=True)
class AnimatedMesh:
    """Fixed-topology triangle mesh with per-frame vertices and skeletons.

    The constant vertex count gives exact cross-frame correspondence:
    vertex i at frame f and frame f+1 is the same material point.
    """

    vertices: np.ndarray
    faces: np.ndarray
    skeletons: tuple[Skeleton, ...]
    frame_rate: float

    def __post_init__(self) -> None:
        vertices = np.asarray(self.vertices, dtype=float)
        faces = np.asarray(self.faces)
        if vertices.ndim != 3 or vertices.shape[2] != 3:
            raise ValueError(
                f"vertices must have shape (frames, V, 3), got {vertices.shape}"
            )
        if not np.isfinite(vertices).all():
            raise ValueError("vertices must be finite")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError(f"faces must have shape (T, 3), got {faces.shape}")
        if not np.issubdtype(faces.dtype, np.integer):
            raise ValueError("faces must be integers")
        if faces.min(initial=0) < 0 or faces.max(initial=-1) >= vertices.shape[1]:
            raise ValueError("face indices out of vertex range")
        if len(self.skeletons) != vertices.shape[0]:
            raise ValueError(
                f"{len(self.skeletons)} skeletons for {vertices.shape[0]} frames"
            )
        if not np.isfinite(self.frame_rate) or self.frame_rate <= 0.0:
            raise ValueError("frame_rate must be positive")
        vertices = np.ascontiguousarray(vertices)
        vertices.setflags(write=False)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def num_frames(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[1]


def _template_joints(height: float) -> np.ndarray:
    """Zero-pose joint positions; x left-right, y forward, z up."""
    s = height / _TEMPLATE_HEIGHT
    return np.array(
        [
            (0.00, 0.0, 0.95),  # pelvis
            (0.00, 0.0, 1.45),  # neck
            (0.00, 0.0, 1.65),  # head
            (0.20, 0.0, 1.42),  # left shoulder
            (-0.20, 0.0, 1.42),  # right shoulder
            (0.24, 0.0, 1.12),  # left elbow
            (-0.24, 0.0, 1.12),  # right elbow
            (0.26, 0.0, 0.85),  # left wrist
            (-0.26, 0.0, 0.85),  # right wrist
            (0.10, 0.0, 0.92),  # left hip
            (-0.10, 0.0, 0.92),  # right hip
            (0.11, 0.0, 0.50),  # left knee
            (-0.11, 0.0, 0.50),  # right knee
            (0.12, 0.0, 0.08),  # left ankle
            (-0.12, 0.0, 0.08),  # right ankle
        ]
    ) * s


def _bone_radii(height: float) -> np.ndarray:
    """Capsule radius per bone, ordered like DEFAULT_BONES."""
    s = height / _TEMPLATE_HEIGHT
    return np.array(
        [
            0.095,  # head
            0.125,  # torso
            0.045,  # left clavicle
            0.045,  # right clavicle
            0.045,  # left upper arm
            0.045,  # right upper arm
            0.038,  # left forearm
            0.038,  # right forearm
            0.055,  # left pelvis wing
            0.055,  # right pelvis wing
            0.065,  # left thigh
            0.065,  # right thigh
            0.048,  # left shin
            0.048,  # right shin
        ]
    ) * s


def _pitch(angle: float) -> np.ndarray:
    """Rotation about the body's lateral (x) axis; positive swings forward."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([(1.0, 0.0, 0.0), (0.0, c, -s), (0.0, s, c)])


def _yaw(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([(c, -s, 0.0), (s, c, 0.0), (0.0, 0.0, 1.0)])


def _posed_joints(template: np.ndarray, pose: PoseParams, t: float) -> np.ndarray:
    """Body-frame joint positions at time ``t`` of the gait cycle."""
    joints = template.copy()
    cycle = 2.0 * np.pi * pose.step_frequency * t + pose.phase
    leg = pose.hip_swing * np.sin(cycle)
    arm = pose.arm_swing * np.sin(cycle + np.pi)
    # Knee flex peaks once per stride, during each leg's swing.
    knee_left = pose.knee_flex * 0.5 * (1.0 - np.cos(cycle))
    knee_right = pose.knee_flex * 0.5 * (1.0 - np.cos(cycle + np.pi))

    for side, hip_angle, knee_angle in (
        (0, leg, knee_left),
        (1, -leg, knee_right),
    ):
        hip, knee, ankle = 9 + side, 11 + side, 13 + side
        thigh = template[knee] - template[hip]
        shin = template[ankle] - template[knee]
        joints[knee] = joints[hip] + _pitch(hip_angle) @ thigh
        joints[ankle] = joints[knee] + _pitch(hip_angle - knee_angle) @ shin
    for side, arm_angle in ((0, arm), (1, -arm)):
        shoulder, elbow, wrist = 3 + side, 5 + side, 7 + side
        upper = template[elbow] - template[shoulder]
        fore = template[wrist] - template[elbow]
        joints[elbow] = joints[shoulder] + _pitch(arm_angle) @ upper
        joints[wrist] = joints[elbow] + _pitch(arm_angle) @ fore
    return joints


def _capsule_frame(
    axis: np.ndarray, ref: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair spanning the plane normal to a capsule's axis.

    With the body's lateral axis as reference the frame follows the bone
    rigidly under swings about that axis; mirrored bones produce mirrored
    capsules exactly (even azimuth count required).
    """
    e1 = np.cross(axis, ref)
    norm = np.linalg.norm(e1)
    if norm < 1e-12:
        raise ValueError("capsule axis is parallel to its reference")
    e1 /= norm
    return e1, np.cross(axis, e1)


def _capsule_topology() -> tuple[np.ndarray, int]:
    """Face list of one capsule and its vertex count.

    Vertices are ordered: bottom pole, then rings of ``_AZIMUTH_SEGMENTS``
    from the bottom cap over the cylinder to the top cap, then top pole.
    """
    rings = 2 * _CAP_SEGMENTS + _LENGTH_SEGMENTS
    count = 2 + rings * _AZIMUTH_SEGMENTS
    faces = []
    bottom, top = 0, count - 1

    def ring_vertex(ring: int, seg: int) -> int:
        return 1 + ring * _AZIMUTH_SEGMENTS + seg % _AZIMUTH_SEGMENTS

    for seg in range(_AZIMUTH_SEGMENTS):
        faces.append((bottom, ring_vertex(0, seg + 1), ring_vertex(0, seg)))
        faces.append(
            (top, ring_vertex(rings - 1, seg), ring_vertex(rings - 1, seg + 1))
        )
    for ring in range(rings - 1):
        for seg in range(_AZIMUTH_SEGMENTS):
            a = ring_vertex(ring, seg)
            b = ring_vertex(ring, seg + 1)
            c = ring_vertex(ring + 1, seg)
            d = ring_vertex(ring + 1, seg + 1)
            faces.append((a, b, d))
            faces.append((a, d, c))
    return np.asarray(faces, dtype=np.int64), count


def _capsule_vertices(
    a: np.ndarray, b: np.ndarray, radius: float, ref: np.ndarray
) -> np.ndarray:
    """Vertex positions of a capsule from ``a`` to ``b``."""
    axis = b - a
    length = np.linalg.norm(axis)
    axis = axis / length
    e1, e2 = _capsule_frame(axis, ref)
    theta = 2.0 * np.pi * np.arange(_AZIMUTH_SEGMENTS) / _AZIMUTH_SEGMENTS
    circle = np.outer(np.cos(theta), e1) + np.outer(np.sin(theta), e2)

    rows = [a - radius * axis]
    # Bottom hemisphere: polar angle rises from the pole to the equator.
    for i in range(1, _CAP_SEGMENTS + 1):
        psi = 0.5 * np.pi * i / _CAP_SEGMENTS
        rows.append(a + radius * (np.sin(psi) * circle - np.cos(psi) * axis))
    # Cylinder rings between the caps.
    for i in range(1, _LENGTH_SEGMENTS + 1):
        center = a + axis * (length * i / (_LENGTH_SEGMENTS + 1))
        rows.append(center + radius * circle)
    # Top hemisphere: equator down to the pole.
    for i in range(_CAP_SEGMENTS, 0, -1):
        psi = 0.5 * np.pi * i / _CAP_SEGMENTS
        rows.append(b + radius * (np.sin(psi) * circle + np.cos(psi) * axis))
    rows.append(b + radius * axis)
    out = np.empty((2 + (len(rows) - 2) * _AZIMUTH_SEGMENTS, 3))
    out[0] = rows[0]
    out[-1] = rows[-1]
    out[1:-1] = np.concatenate([np.atleast_2d(r) for r in rows[1:-1]])
    return out


_FACES_ONE, _VERTS_ONE = _capsule_topology()


def body_topology(num_bones: int = len(DEFAULT_BONES)) -> np.ndarray:
    """Face list of the whole body (one capsule per bone)."""
    return np.concatenate(
        [_FACES_ONE + k * _VERTS_ONE for k in range(num_bones)]
    )


def generating_bone_ids(num_bones: int = len(DEFAULT_BONES)) -> np.ndarray:
    """Bone that generated each vertex, aligned with the vertex order."""
    return np.repeat(np.arange(num_bones), _VERTS_ONE)


def _body_vertices(
    joints: np.ndarray, radii: np.ndarray, lateral_ref: np.ndarray, yaw: float
) -> np.ndarray:
    """All capsule vertices for one posed skeleton."""
    lateral = _yaw(yaw) @ np.array([1.0, 0.0, 0.0])
    vertical = np.array([0.0, 0.0, 1.0])
    blocks = []
    for k, (a_idx, b_idx) in enumerate(DEFAULT_BONES):
        ref = lateral if lateral_ref[k] else vertical
        blocks.append(
            _capsule_vertices(joints[a_idx], joints[b_idx], radii[k], ref)
        )
    return np.concatenate(blocks)


def _lateral_reference_flags(template: np.ndarray) -> np.ndarray:
    """Choose each bone's frame reference from its zero-pose direction."""
    flags = np.empty(len(DEFAULT_BONES), dtype=bool)
    for k, (a_idx, b_idx) in enumerate(DEFAULT_BONES):
        axis = template[b_idx] - template[a_idx]
        axis = axis / np.linalg.norm(axis)
        flags[k] = abs(axis[0]) < _LATERAL_REF_LIMIT
    return flags


class _WaypointPath:
    """Constant-speed travel along piecewise-linear ground waypoints."""

    def __init__(self, waypoints: np.ndarray) -> None:
        waypoints = np.asarray(waypoints, dtype=float)
        if waypoints.ndim != 2 or waypoints.shape[1] != 2:
            raise ValueError(
                f"waypoints must have shape (W, 2), got {waypoints.shape}"
            )
        if not np.isfinite(waypoints).all():
            raise ValueError("waypoints must be finite")
        self.points = waypoints
        steps = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
        self.cumulative = np.concatenate([[0.0], np.cumsum(steps)])

    def locate(self, distance: float) -> tuple[np.ndarray, float]:
        """Ground position and heading (yaw) after ``distance`` meters.

        The walker stops at the final waypoint; heading 0 faces +y.
        """
        if len(self.points) == 1 or self.cumulative[-1] == 0.0:
            return self.points[0], 0.0
        distance = min(max(distance, 0.0), self.cumulative[-1])
        seg = min(
            int(np.searchsorted(self.cumulative, distance, side="right") - 1),
            len(self.points) - 2,
        )
        length = self.cumulative[seg + 1] - self.cumulative[seg]
        frac = (distance - self.cumulative[seg]) / length
        position = self.points[seg] + frac * (
            self.points[seg + 1] - self.points[seg]
        )
        direction = self.points[seg + 1] - self.points[seg]
        yaw = float(np.arctan2(-direction[0], direction[1]))
        return position, yaw


def procedural_human(
    seed: int,
    pose: PoseParams | None = None,
    *,
    num_frames: int = 2,
    frame_rate: float = 10.0,
    waypoints: np.ndarray | None = None,
    speed: float | None = None,
    height: float | None = None,
) -> AnimatedMesh:
    """Generate a walking capsule-body human, deterministic in ``seed``.

    Unspecified height, walking speed, and gait phase are drawn from the
    seed.  The body follows ``waypoints`` (default: straight ahead along
    +y) at constant speed, stopping at the last waypoint.

    Parameters
    ----------
    seed : int
        Controls every randomized attribute.
    pose : PoseParams, optional
        Gait amplitudes; defaults to a normal walk with a random phase.
    num_frames : int
        Number of animation frames to emit.
    frame_rate : float
        Frames per second.
    waypoints : array (W, 2), optional
        Ground-plane path corners.
    speed : float, optional
        Walking speed in m/s; 0 stands still.
    height : float, optional
        Body height in meters.

    Returns
    -------
    AnimatedMesh
        Per-frame vertices, shared faces, and per-frame skeletons.
    """
    if num_frames < 1:
        raise ValueError("num_frames must be at least 1")
    if not np.isfinite(frame_rate) or frame_rate <= 0.0:
        raise ValueError("frame_rate must be positive")
    rng = np.random.default_rng(seed)
    if height is None:
        height = float(rng.uniform(1.60, 1.90))
    if not 0.5 <= height <= 2.5:
        raise ValueError(f"height {height} m is outside the supported range")
    if speed is None:
        speed = float(rng.uniform(0.8, 1.4))
    if not np.isfinite(speed) or speed < 0.0:
        raise ValueError("speed must be nonnegative")
    if pose is None:
        pose = PoseParams(phase=float(rng.uniform(0.0, 2.0 * np.pi)))
    if waypoints is None:
        waypoints = np.array([(0.0, 0.0), (0.0, 1000.0)])
    path = _WaypointPath(waypoints)

    template = _template_joints(height)
    radii = _bone_radii(height)
    lateral_ref = _lateral_reference_flags(template)

    frames = np.empty(
        (num_frames, len(DEFAULT_BONES) * _VERTS_ONE, 3)
    )
    skeletons = []
    for f in range(num_frames):
        t = f / frame_rate
        ground, yaw = path.locate(speed * t)
        cycle = 2.0 * np.pi * pose.step_frequency * t + pose.phase
        bob = pose.bob_amplitude * 0.5 * (1.0 - np.cos(2.0 * cycle))
        root = np.array([ground[0], ground[1], bob])
        joints = _posed_joints(template, pose, t) @ _yaw(yaw).T + root
        frames[f] = _body_vertices(joints, radii, lateral_ref, yaw)
        skeletons.append(make_skeleton(joints))
    return AnimatedMesh(
        vertices=frames,
        faces=body_topology(),
        skeletons=tuple(skeletons),
        frame_rate=frame_rate,
    )

