"""Serialization: PLY clouds and meshes, JSON configs, dataset layout."""

from .config import (
    config_hash,
    lidar_spec_from_dict,
    lidar_spec_to_dict,
    read_lidar_overrides,
    read_registration_config,
    read_skeleton,
    registration_config_from_dict,
    registration_config_to_dict,
    scene_config_from_dict,
    scene_config_to_dict,
    skeleton_from_dict,
    skeleton_to_dict,
    write_registration_config,
    write_skeleton,
)
from .dataset import (
    Dataset,
    chronological_splits,
    gt_flow_to_reference,
    load_dataset,
    write_session,
)
from .ply import (
    CloudRecord,
    PlyParseError,
    read_cloud,
    read_mesh,
    write_cloud,
    write_mesh,
)

__all__ = [
    "CloudRecord",
    "Dataset",
    "PlyParseError",
    "chronological_splits",
    "config_hash",
    "gt_flow_to_reference",
    "lidar_spec_from_dict",
    "lidar_spec_to_dict",
    "load_dataset",
    "read_cloud",
    "read_lidar_overrides",
    "read_mesh",
    "read_registration_config",
    "read_skeleton",
    "registration_config_from_dict",
    "registration_config_to_dict",
    "scene_config_from_dict",
    "scene_config_to_dict",
    "skeleton_from_dict",
    "skeleton_to_dict",
    "write_cloud",
    "write_mesh",
    "write_registration_config",
    "write_session",
    "write_skeleton",
]
