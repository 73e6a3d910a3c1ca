"""JSON round-trips for skeletons and engine configuration.

Every loader rejects unknown keys by name so typos fail loudly instead
of silently running with defaults.  Value validation (negative weights,
bone indices outside 0..14, non-orthonormal scanner orientation) is
delegated to the dataclass constructors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..core import Skeleton
from ..correspond import CorrespondenceConfig
from ..losses import LossWeights
from ..register import RegistrationConfig
from ..synth.lidar import LidarSpec
from ..synth.scene import SceneConfig

__all__ = [
    "read_skeleton",
    "write_skeleton",
    "skeleton_to_dict",
    "skeleton_from_dict",
    "registration_config_to_dict",
    "registration_config_from_dict",
    "read_registration_config",
    "write_registration_config",
    "lidar_spec_to_dict",
    "lidar_spec_from_dict",
    "read_lidar_overrides",
    "scene_config_to_dict",
    "scene_config_from_dict",
    "config_hash",
]

# Keys that a scanner-override file for the synth pipeline may set.
LIDAR_OVERRIDE_KEYS = ("fov_radius", "omega", "pulse_rate", "max_range")


def _reject_unknown(mapping: dict, allowed, context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ValueError(
            f"unknown key {unknown[0]!r} in {context} "
            f"(allowed: {', '.join(sorted(allowed))})"
        )


def _dump(path: Path, payload: dict) -> None:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load(path: Path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: expected a JSON object at top level")
    return payload


def skeleton_to_dict(skeleton: Skeleton) -> dict:
    return {
        "names": list(skeleton.names),
        "joints": [[float(v) for v in row] for row in skeleton.joints],
        "bones": [[int(a), int(b)] for a, b in skeleton.bones],
    }


def skeleton_from_dict(payload: dict, context: str = "skeleton") -> Skeleton:
    _reject_unknown(payload, ("names", "joints", "bones"), context)
    for key in ("names", "joints", "bones"):
        if key not in payload:
            raise ValueError(f"{context}: missing required key {key!r}")
    return Skeleton(
        joints=np.asarray(payload["joints"], dtype=float),
        names=tuple(payload["names"]),
        bones=tuple(tuple(pair) for pair in payload["bones"]),
    )


def write_skeleton(path: str | Path, skeleton: Skeleton) -> None:
    _dump(Path(path), skeleton_to_dict(skeleton))


def read_skeleton(path: str | Path) -> Skeleton:
    path = Path(path)
    return skeleton_from_dict(_load(path), context=str(path))


def _weights_from_dict(payload: dict, context: str) -> LossWeights:
    allowed = tuple(asdict(LossWeights()))
    _reject_unknown(payload, allowed, context)
    return LossWeights(**payload)


def _correspondence_from_dict(payload: dict, context: str) -> CorrespondenceConfig:
    allowed = (
        "temperature",
        "temperature_floor",
        "descriptor_provider",
        "neighborhood_radius",
        "descriptor_path",
    )
    _reject_unknown(payload, allowed, context)
    return CorrespondenceConfig(**payload)


def registration_config_to_dict(cfg: RegistrationConfig) -> dict:
    return {
        "weights": dict(asdict(cfg.weights)),
        "correspondence": {
            "temperature": cfg.correspondence.temperature,
            "temperature_floor": cfg.correspondence.temperature_floor,
            "descriptor_provider": cfg.correspondence.descriptor_provider,
            "neighborhood_radius": cfg.correspondence.neighborhood_radius,
            "descriptor_path": cfg.correspondence.descriptor_path,
        },
        "max_outer_iters": cfg.max_outer_iters,
        "inner_grad_steps": cfg.inner_grad_steps,
        "step_size": cfg.step_size,
        "convergence_tol": cfg.convergence_tol,
        "refine_at_end": cfg.refine_at_end,
        "seed": cfg.seed,
    }


def registration_config_from_dict(
    payload: dict, context: str = "registration config"
) -> RegistrationConfig:
    allowed = (
        "weights",
        "correspondence",
        "max_outer_iters",
        "inner_grad_steps",
        "step_size",
        "convergence_tol",
        "refine_at_end",
        "seed",
    )
    _reject_unknown(payload, allowed, context)
    kwargs = dict(payload)
    if "weights" in kwargs:
        kwargs["weights"] = _weights_from_dict(
            kwargs["weights"], f"{context}: weights"
        )
    if "correspondence" in kwargs:
        kwargs["correspondence"] = _correspondence_from_dict(
            kwargs["correspondence"], f"{context}: correspondence"
        )
    return RegistrationConfig(**kwargs)


def write_registration_config(path: str | Path, cfg: RegistrationConfig) -> None:
    _dump(Path(path), registration_config_to_dict(cfg))


def read_registration_config(path: str | Path) -> RegistrationConfig:
    path = Path(path)
    return registration_config_from_dict(_load(path), context=str(path))


def lidar_spec_to_dict(spec: LidarSpec) -> dict:
    return {
        "position": [float(v) for v in spec.position],
        "orientation": [[float(v) for v in row] for row in spec.orientation],
        "fov_radius": spec.fov_radius,
        "omega": spec.omega,
        "theta0": spec.theta0,
        "pulse_rate": spec.pulse_rate,
        "max_range": spec.max_range,
    }


def lidar_spec_from_dict(payload: dict, context: str = "lidar spec") -> LidarSpec:
    allowed = (
        "position",
        "orientation",
        "fov_radius",
        "omega",
        "theta0",
        "pulse_rate",
        "max_range",
    )
    _reject_unknown(payload, allowed, context)
    kwargs = dict(payload)
    kwargs["position"] = np.asarray(kwargs["position"], dtype=float)
    kwargs["orientation"] = np.asarray(kwargs["orientation"], dtype=float)
    return LidarSpec(**kwargs)


def read_lidar_overrides(path: str | Path) -> dict:
    """Read a beam-parameter override file for the synth pipeline.

    Only ``fov_radius``, ``omega``, ``pulse_rate``, ``max_range`` may be
    set; positions and aim are derived from the scene layout.
    """
    path = Path(path)
    payload = _load(path)
    _reject_unknown(payload, LIDAR_OVERRIDE_KEYS, str(path))
    return {key: float(value) for key, value in payload.items()}


def scene_config_to_dict(cfg: SceneConfig) -> dict:
    return dict(asdict(cfg))


def scene_config_from_dict(payload: dict, context: str = "scene config") -> SceneConfig:
    allowed = tuple(asdict(SceneConfig()))
    _reject_unknown(payload, allowed, context)
    return SceneConfig(**payload)


def config_hash(payload: dict) -> str:
    """Stable sha256 over the canonical JSON form of a config mapping."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("ascii")).hexdigest()
