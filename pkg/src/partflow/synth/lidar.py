"""Rosette-pattern LiDAR beam model.

The scanner sweeps a rosette on a virtual image plane: the radial
coordinate oscillates as r0*cos(omega*t + theta0) while the azimuth
precesses at an irrational multiple of omega, so successive sweeps never
retrace each other and coverage densifies over time.  Plane points are
mapped to unit ray directions in the sensor frame (+z optical axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ORTHONORMALITY_TOL

# Half-angle (radians) of the circular field of view.
DEFAULT_FOV_RADIUS = 0.3354
# Radial oscillation rate (rad/s); representative of a fast prism scanner.
DEFAULT_OMEGA = 2.0 * np.pi * 180.0
# Azimuthal precession is omega times the golden ratio, an irrational
# multiple, which makes the pattern non-repetitive.
PRECESSION_RATIO = (1.0 + np.sqrt(5.0)) / 2.0
DEFAULT_PULSE_RATE = 100_000.0
DEFAULT_MAX_RANGE = 100.0


@dataclass(frozen=True)
class LidarSpec:
    """Placement and beam parameters of one scanner.

    ``orientation`` maps sensor-frame directions to world frame; its
    third column is the optical axis.
    """

    position: np.ndarray
    orientation: np.ndarray
    fov_radius: float = DEFAULT_FOV_RADIUS
    omega: float = DEFAULT_OMEGA
    theta0: float = 0.0
    pulse_rate: float = DEFAULT_PULSE_RATE
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self) -> None:
        position = np.asarray(self.position, dtype=float).reshape(3)
        orientation = np.asarray(self.orientation, dtype=float)
        if orientation.shape != (3, 3):
            raise ValueError(
                f"orientation must be a 3x3 rotation, got {orientation.shape}"
            )
        if not np.isfinite(position).all() or not np.isfinite(orientation).all():
            raise ValueError("lidar placement must be finite")
        residual = np.abs(orientation.T @ orientation - np.eye(3)).max()
        if residual > ORTHONORMALITY_TOL:
            raise ValueError(
                f"orientation is not orthonormal (residual {residual:.3g})"
            )
        if np.linalg.det(orientation) < 0.0:
            raise ValueError("orientation must be a proper rotation")
        for name in ("fov_radius", "omega", "pulse_rate", "max_range"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be a positive finite scalar")
        if not np.isfinite(self.theta0):
            raise ValueError("theta0 must be finite")
        position.setflags(write=False)
        orientation = np.ascontiguousarray(orientation)
        orientation.setflags(write=False)
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "orientation", orientation)

    @property
    def axis(self) -> np.ndarray:
        """Optical axis in world frame."""
        return self.orientation[:, 2]


def aim_at(
    position: np.ndarray,
    target: np.ndarray,
    up: np.ndarray = (0.0, 0.0, 1.0),
) -> np.ndarray:
    """Rotation whose optical axis (+z, third column) points at ``target``."""
    position = np.asarray(position, dtype=float).reshape(3)
    target = np.asarray(target, dtype=float).reshape(3)
    axis = target - position
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        raise ValueError("target coincides with the sensor position")
    axis = axis / norm
    up = np.asarray(up, dtype=float).reshape(3)
    right = np.cross(up, axis)
    if np.linalg.norm(right) < 1e-6:
        # Axis parallel to up; fall back to a horizontal reference.
        right = np.cross((1.0, 0.0, 0.0), axis)
    right /= np.linalg.norm(right)
    down = np.cross(axis, right)
    return np.column_stack([right, down, axis])


def rosette_directions(
    spec: LidarSpec, t_start: float, duration: float
) -> tuple[np.ndarray, np.ndarray]:
    """Sensor-frame unit ray directions for one scan window.

    Pulses fire at ``spec.pulse_rate`` from ``t_start`` for ``duration``
    seconds.  The signed radial angle r = fov_radius*cos(omega*t + theta0)
    and precessing azimuth phi trace the rosette; the returned directions
    are (sin r cos phi, sin r sin phi, cos r), all within the field-of-view
    cone.

    Returns
    -------
    (directions, times)
        Directions (N, 3) in the sensor frame and absolute pulse times
        (N,) in seconds.
    """
    if duration <= 0.0:
        raise ValueError("scan duration must be positive")
    count = int(round(duration * spec.pulse_rate))
    times = t_start + np.arange(count) / spec.pulse_rate
    radial = spec.fov_radius * np.cos(spec.omega * times + spec.theta0)
    azimuth = spec.omega * PRECESSION_RATIO * times
    sin_r = np.sin(radial)
    directions = np.column_stack(
        [sin_r * np.cos(azimuth), sin_r * np.sin(azimuth), np.cos(radial)]
    )
    return directions, times
