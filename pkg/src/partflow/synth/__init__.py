"""Synthetic LiDAR capture of animated human bodies."""

from .human import (
    AnimatedMesh,
    PoseParams,
    body_topology,
    generating_bone_ids,
    procedural_human,
)
from .lidar import LidarSpec, aim_at, rosette_directions
from .raycast import RayHits, barycentric_points, raycast
from .scene import (
    SceneConfig,
    Session,
    SynthFrame,
    generate_session,
    make_corner_lidars,
    scan_frame,
)

__all__ = [
    "AnimatedMesh",
    "LidarSpec",
    "PoseParams",
    "RayHits",
    "SceneConfig",
    "Session",
    "SynthFrame",
    "aim_at",
    "barycentric_points",
    "body_topology",
    "generate_session",
    "generating_bone_ids",
    "make_corner_lidars",
    "procedural_human",
    "raycast",
    "rosette_directions",
    "scan_frame",
]
