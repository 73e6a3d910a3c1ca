"""Scene simulation: walking humans scanned by corner-mounted LiDARs.

A session places scanners at the four corners of a rectangular field,
aims them at the field center, and walks procedurally generated humans
along random waypoint paths.  Each frame, every scanner casts one scan
window of rosette rays against all bodies; per-person returns are merged
into one cloud with exact ground-truth flow to the next frame (the same
barycentric surface point evaluated on the next frame's vertices),
distance-to-bone part labels, and the frame's skeleton.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..bodyparts import assign_labels
from ..core import FlowField, PartLabels, PointCloud, Skeleton
from .human import AnimatedMesh, procedural_human
from .lidar import (
    DEFAULT_FOV_RADIUS,
    DEFAULT_OMEGA,
    DEFAULT_PULSE_RATE,
    LidarSpec,
    aim_at,
    rosette_directions,
)
from .raycast import barycentric_points, raycast

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneConfig:
    """Layout and timing of a simulated capture session."""

    field_width: float = 30.0
    field_depth: float = 15.0
    lidar_height: float = 2.0
    aim_height: float = 1.0
    frame_rate: float = 10.0
    scan_window: float = 0.1
    num_persons: int = 2
    num_frames: int = 8
    seed: int = 0
    noise_sigma: float = 0.0
    fov_radius: float = DEFAULT_FOV_RADIUS
    omega: float = DEFAULT_OMEGA
    pulse_rate: float = DEFAULT_PULSE_RATE
    max_range: float = 60.0

    def __post_init__(self) -> None:
        positive = (
            "field_width",
            "field_depth",
            "lidar_height",
            "aim_height",
            "frame_rate",
            "scan_window",
            "fov_radius",
            "omega",
            "pulse_rate",
            "max_range",
        )
        for name in positive:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be a positive finite scalar")
        if self.num_persons < 1:
            raise ValueError("num_persons must be at least 1")
        if self.num_frames < 1:
            raise ValueError("num_frames must be at least 1")
        if not np.isfinite(self.noise_sigma) or self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class SynthFrame:
    """One person's merged scan at one frame.

    ``flow`` is the exact ground truth to the next frame.  A person that
    received no returns yields an empty frame (all array fields None,
    ``is_empty`` true).
    """

    person_index: int
    frame_index: int
    cloud: PointCloud | None
    labels: PartLabels | None
    skeleton: Skeleton
    flow: FlowField | None
    lidar_ids: np.ndarray | None
    triangle_ids: np.ndarray | None
    barycentric: np.ndarray | None

    def __post_init__(self) -> None:
        if self.cloud is None:
            return
        n = len(self.cloud)
        for name in ("labels", "flow", "lidar_ids", "triangle_ids", "barycentric"):
            value = getattr(self, name)
            if value is None:
                raise ValueError(f"non-empty frame is missing {name}")
        if len(self.flow.vectors) != n or len(self.labels.hard) != n:
            raise ValueError("flow/labels length does not match the cloud")
        if len(self.lidar_ids) != n or len(self.triangle_ids) != n:
            raise ValueError("per-point ids do not match the cloud")
        if self.barycentric.shape != (n, 2):
            raise ValueError("barycentric coordinates must have shape (n, 2)")

    @property
    def is_empty(self) -> bool:
        return self.cloud is None


@dataclass(frozen=True)
class Session:
    """A full simulated capture: bodies, scanners, and per-frame scans.

    ``frames[f][p]`` is person p's scan at frame f.
    """

    config: SceneConfig
    lidars: list[LidarSpec]
    persons: list[AnimatedMesh]
    frames: list[list[SynthFrame]]

    def person_frames(self, person: int) -> list[SynthFrame]:
        """Time-ordered scans of one person."""
        return [row[person] for row in self.frames]


def make_corner_lidars(
    config: SceneConfig, rng: np.random.Generator
) -> list[LidarSpec]:
    """Four scanners at the field corners, aimed at the field center."""
    corners = [
        (0.0, 0.0),
        (config.field_width, 0.0),
        (config.field_width, config.field_depth),
        (0.0, config.field_depth),
    ]
    target = np.array(
        [config.field_width / 2.0, config.field_depth / 2.0, config.aim_height]
    )
    specs = []
    for x, y in corners:
        position = np.array([x, y, config.lidar_height])
        specs.append(
            LidarSpec(
                position=position,
                orientation=aim_at(position, target),
                fov_radius=config.fov_radius,
                omega=config.omega,
                theta0=float(rng.uniform(0.0, 2.0 * np.pi)),
                pulse_rate=config.pulse_rate,
                max_range=config.max_range,
            )
        )
    return specs


def _random_waypoints(
    config: SceneConfig, rng: np.random.Generator
) -> np.ndarray:
    """A 3-corner walking path near the field center."""
    x_half = min(6.0, config.field_width / 2.0 - 1.0)
    y_half = min(3.0, config.field_depth / 2.0 - 1.0)
    center = np.array([config.field_width / 2.0, config.field_depth / 2.0])
    points = [center + rng.uniform((-x_half, -y_half), (x_half, y_half))]
    while len(points) < 3:
        candidate = center + rng.uniform((-x_half, -y_half), (x_half, y_half))
        if np.linalg.norm(candidate - points[-1]) >= 2.0:
            points.append(candidate)
    return np.asarray(points)


def scan_frame(
    meshes: list[AnimatedMesh],
    lidars: list[LidarSpec],
    frame_index: int,
    scan_window: float,
    frame_rate: float,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[SynthFrame]:
    """Scan every body at one frame and attach exact ground-truth flow.

    All scanners share the scan window starting at the frame time; bodies
    are held at their frame-``frame_index`` shape for the whole window.
    Ground-truth flow re-evaluates each hit's barycentric coordinates on
    the next frame's vertices and subtracts the stored (possibly
    range-noised) point, so warping by the ground truth always lands on
    the next frame's surface.
    """
    if scan_window <= 0.0:
        raise ValueError("scan window must be positive")
    for mesh in meshes:
        if frame_index + 1 >= mesh.num_frames:
            raise ValueError(
                f"frame {frame_index} has no successor in a "
                f"{mesh.num_frames}-frame mesh (flow needs frame f+1)"
            )
    if noise_sigma > 0.0 and rng is None:
        raise ValueError("range noise requires a random generator")

    geometry = [(mesh.vertices[frame_index], mesh.faces) for mesh in meshes]
    per_person: dict[int, dict[str, list]] = {
        m: {"points": [], "times": [], "lidar": [], "tri": [], "bary": []}
        for m in range(len(meshes))
    }
    t_start = frame_index / frame_rate
    for lidar_id, spec in enumerate(lidars):
        directions, times = rosette_directions(spec, t_start, scan_window)
        world_dirs = directions @ spec.orientation.T
        hits = raycast(spec.position, world_dirs, geometry, spec.max_range)
        mask = hits.hit_mask
        if not mask.any():
            continue
        distances = hits.distances[mask]
        if noise_sigma > 0.0:
            distances = distances + rng.normal(0.0, noise_sigma, len(distances))
        points = spec.position + distances[:, None] * world_dirs[mask]
        mesh_ids = hits.mesh_ids[mask]
        for m in range(len(meshes)):
            rows = mesh_ids == m
            if not rows.any():
                continue
            bucket = per_person[m]
            bucket["points"].append(points[rows])
            bucket["times"].append(times[mask][rows])
            bucket["lidar"].append(np.full(int(rows.sum()), lidar_id, dtype=np.uint8))
            bucket["tri"].append(hits.triangle_ids[mask][rows])
            bucket["bary"].append(hits.barycentric[mask][rows])

    frames = []
    for m, mesh in enumerate(meshes):
        skeleton = mesh.skeletons[frame_index]
        bucket = per_person[m]
        if not bucket["points"]:
            log.warning(
                "person %d received no returns at frame %d", m, frame_index
            )
            frames.append(
                SynthFrame(
                    person_index=m,
                    frame_index=frame_index,
                    cloud=None,
                    labels=None,
                    skeleton=skeleton,
                    flow=None,
                    lidar_ids=None,
                    triangle_ids=None,
                    barycentric=None,
                )
            )
            continue
        points = np.concatenate(bucket["points"])
        times = np.concatenate(bucket["times"])
        lidar_ids = np.concatenate(bucket["lidar"])
        tri = np.concatenate(bucket["tri"])
        bary = np.concatenate(bucket["bary"])
        cloud = PointCloud(points, timestamps=times)
        next_points = barycentric_points(
            mesh.vertices[frame_index + 1], mesh.faces, tri, bary
        )
        frames.append(
            SynthFrame(
                person_index=m,
                frame_index=frame_index,
                cloud=cloud,
                labels=assign_labels(cloud, skeleton),
                skeleton=skeleton,
                flow=FlowField(next_points - points),
                lidar_ids=lidar_ids,
                triangle_ids=tri,
                barycentric=bary,
            )
        )
    return frames


def generate_session(config: SceneConfig) -> Session:
    """Simulate a full capture session, deterministic in ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    lidars = make_corner_lidars(config, rng)
    persons = []
    for _ in range(config.num_persons):
        person_seed = int(rng.integers(2**62))
        waypoints = _random_waypoints(config, rng)
        persons.append(
            procedural_human(
                person_seed,
                # One extra mesh frame so the last scan still has flow.
                num_frames=config.num_frames + 1,
                frame_rate=config.frame_rate,
                waypoints=waypoints,
            )
        )
    noise_rng = np.random.default_rng(rng.integers(2**63))
    frames = [
        scan_frame(
            persons,
            lidars,
            f,
            config.scan_window,
            config.frame_rate,
            config.noise_sigma,
            noise_rng,
        )
        for f in range(config.num_frames)
    ]
    return Session(config=config, lidars=lidars, persons=persons, frames=frames)
