"""On-disk dataset layout and loading.

Layout under a dataset root::

    manifest.json
    person_000/
        frame_000000.ply    scan: points + flow-to-next + labels + anchors
        frame_000000.skel   skeleton at that frame (JSON)
        mesh_000000.ply     body surface at that frame (double precision)
        ...
        mesh_<N>.ply        one extra mesh past the last scan

Scan points carry the triangle id and barycentric coordinates of the
surface sample they came from, so exact displacement to ANY frame f is
``barycentric_points(mesh at f) - point``.  The manifest records the
frame rate, units, generator config with its hash, scanner specs, and
chronological train/val/test splits that partition the frames 70/20/10.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import PointCloud, Skeleton
from ..synth.raycast import barycentric_points
from ..synth.scene import Session
from .config import (
    config_hash,
    lidar_spec_to_dict,
    read_skeleton,
    scene_config_to_dict,
    write_skeleton,
)
from .ply import CloudRecord, read_cloud, read_mesh, write_cloud, write_mesh

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SPLIT_NAMES = ("train", "val", "test")
# Chronological fractions; train and val are floored, test takes the rest.
SPLIT_FRACTIONS = (0.7, 0.2)

__all__ = [
    "MANIFEST_NAME",
    "SPLIT_NAMES",
    "Dataset",
    "chronological_splits",
    "write_session",
    "load_dataset",
    "gt_flow_to_reference",
]


def _person_dir(index: int) -> str:
    return f"person_{index:03d}"


def _frame_name(index: int) -> str:
    return f"frame_{index:06d}"


def _mesh_name(index: int) -> str:
    return f"mesh_{index:06d}.ply"


def chronological_splits(num_frames: int) -> dict[str, list[int]]:
    """Partition frame indices 0..num_frames-1 into train/val/test.

    Earliest 70% train, next 20% val, remainder test (both leading
    shares floored, so the three lists always cover every frame exactly
    once).
    """
    if num_frames < 0:
        raise ValueError("num_frames must be nonnegative")
    n_train = int(np.floor(SPLIT_FRACTIONS[0] * num_frames))
    n_val = int(np.floor(SPLIT_FRACTIONS[1] * num_frames))
    order = list(range(num_frames))
    return {
        "train": order[:n_train],
        "val": order[n_train : n_train + n_val],
        "test": order[n_train + n_val :],
    }


def write_session(root: str | Path, session: Session) -> Path:
    """Serialize a simulated capture session; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    config = scene_config_to_dict(session.config)
    num_frames = session.config.num_frames

    persons = []
    for m, mesh in enumerate(session.persons):
        person_id = _person_dir(m)
        pdir = root / person_id
        pdir.mkdir(exist_ok=True)
        for f in range(mesh.num_frames):
            write_mesh(pdir / _mesh_name(f), mesh.vertices[f], mesh.faces)
        for frame in session.person_frames(m):
            f = frame.frame_index
            write_skeleton(pdir / f"{_frame_name(f)}.skel", frame.skeleton)
            ply_path = pdir / f"{_frame_name(f)}.ply"
            if frame.is_empty:
                write_cloud(ply_path, np.zeros((0, 3)))
            else:
                write_cloud(
                    ply_path,
                    frame.cloud.points,
                    flow=frame.flow.vectors,
                    labels=frame.labels.hard,
                    lidar_ids=frame.lidar_ids,
                    times=frame.cloud.timestamps,
                    triangle_ids=frame.triangle_ids,
                    barycentric=frame.barycentric,
                )
        persons.append({"id": person_id, "num_frames": num_frames})

    splits = {
        name: [
            [p["id"], f]
            for p in persons
            for f in chronological_splits(p["num_frames"])[name]
        ]
        for name in SPLIT_NAMES
    }
    manifest = {
        "format_version": 1,
        "units": "meters",
        "frame_rate": session.config.frame_rate,
        "config": config,
        "config_hash": config_hash(config),
        "lidars": [lidar_spec_to_dict(spec) for spec in session.lidars],
        "persons": persons,
        "splits": splits,
    }
    path = root / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class Dataset:
    """A loaded dataset: manifest plus file accessors."""

    root: Path
    manifest: dict

    @property
    def frame_rate(self) -> float:
        return float(self.manifest["frame_rate"])

    @property
    def person_ids(self) -> list[str]:
        return [p["id"] for p in self.manifest["persons"]]

    def num_frames(self, person_id: str) -> int:
        for p in self.manifest["persons"]:
            if p["id"] == person_id:
                return int(p["num_frames"])
        raise KeyError(f"person {person_id!r} is not in the manifest")

    def split_frames(self, split: str) -> dict[str, list[int]]:
        """Frames of one split, grouped by person, in time order."""
        if split not in SPLIT_NAMES:
            raise ValueError(
                f"unknown split {split!r}; expected one of {SPLIT_NAMES}"
            )
        grouped: dict[str, list[int]] = {pid: [] for pid in self.person_ids}
        for person_id, frame in self.manifest["splits"][split]:
            grouped[person_id].append(int(frame))
        for frames in grouped.values():
            frames.sort()
        return grouped

    def frame_path(self, person_id: str, frame: int) -> Path:
        return self.root / person_id / f"{_frame_name(frame)}.ply"

    def skeleton_path(self, person_id: str, frame: int) -> Path:
        return self.root / person_id / f"{_frame_name(frame)}.skel"

    def mesh_path(self, person_id: str, frame: int) -> Path:
        return self.root / person_id / _mesh_name(frame)

    def load_frame(self, person_id: str, frame: int) -> CloudRecord:
        path = self.frame_path(person_id, frame)
        if not path.is_file():
            raise FileNotFoundError(f"missing frame file {path}")
        return read_cloud(path)

    def load_skeleton(self, person_id: str, frame: int) -> Skeleton:
        path = self.skeleton_path(person_id, frame)
        if not path.is_file():
            raise FileNotFoundError(f"missing skeleton file {path}")
        return read_skeleton(path)

    def load_mesh(self, person_id: str, frame: int) -> tuple[np.ndarray, np.ndarray]:
        path = self.mesh_path(person_id, frame)
        if not path.is_file():
            raise FileNotFoundError(f"missing mesh file {path}")
        return read_mesh(path)

    def load_cloud(self, person_id: str, frame: int) -> PointCloud:
        record = self.load_frame(person_id, frame)
        if len(record) == 0:
            raise ValueError(
                f"{self.frame_path(person_id, frame)} holds an empty scan"
            )
        return PointCloud(record.points, timestamps=record.times)


def _validate_splits(manifest: dict, path: Path) -> None:
    expected = {
        (p["id"], f)
        for p in manifest["persons"]
        for f in range(int(p["num_frames"]))
    }
    seen: dict[tuple[str, int], str] = {}
    for name in SPLIT_NAMES:
        if name not in manifest["splits"]:
            raise ValueError(f"{path}: manifest lacks split {name!r}")
        for person_id, frame in manifest["splits"][name]:
            key = (person_id, int(frame))
            if key in seen:
                raise ValueError(
                    f"{path}: frame {person_id}/{frame} appears in both "
                    f"{seen[key]!r} and {name!r} splits"
                )
            if key not in expected:
                raise ValueError(
                    f"{path}: split {name!r} references unknown frame "
                    f"{person_id}/{frame}"
                )
            seen[key] = name
    missing = expected - set(seen)
    if missing:
        person_id, frame = sorted(missing)[0]
        raise ValueError(
            f"{path}: frame {person_id}/{frame} belongs to no split"
        )


def load_dataset(root: str | Path) -> Dataset:
    """Open a dataset, checking manifest coherence and file presence."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing manifest file {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    for key in ("frame_rate", "units", "config", "persons", "splits"):
        if key not in manifest:
            raise ValueError(f"{manifest_path}: manifest lacks key {key!r}")
    _validate_splits(manifest, manifest_path)
    dataset = Dataset(root=root, manifest=manifest)
    for person in manifest["persons"]:
        pid = person["id"]
        for f in range(int(person["num_frames"])):
            for path in (
                dataset.frame_path(pid, f),
                dataset.skeleton_path(pid, f),
                dataset.mesh_path(pid, f),
            ):
                if not path.is_file():
                    raise FileNotFoundError(f"missing frame file {path}")
    return dataset


def gt_flow_to_reference(
    dataset: Dataset,
    person_id: str,
    record: CloudRecord,
    reference_frame: int,
    indices: np.ndarray | None = None,
) -> np.ndarray:
    """Exact per-point displacement onto the surface at ``reference_frame``.

    Uses the surface anchors stored with the scan, so it works for any
    source/reference gap, not just adjacent frames.
    """
    if record.triangle_ids is None or record.barycentric is None:
        raise ValueError("scan record lacks surface anchors (tri_id/bary)")
    tri = record.triangle_ids
    bary = record.barycentric
    pts = record.points.astype(float)
    if indices is not None:
        indices = np.asarray(indices)
        tri = tri[indices]
        bary = bary[indices]
        pts = pts[indices]
    vertices, faces = dataset.load_mesh(person_id, reference_frame)
    return barycentric_points(vertices, faces, tri, bary) - pts
