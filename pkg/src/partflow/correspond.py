"""Point descriptors and soft-correspondence flow estimation.

A descriptor is computed per point from cloud geometry and body-part
labels.  Pairwise descriptor distances between two clouds are turned into
a row-stochastic soft-correspondence matrix via a temperature-scaled
softmax, and the initial flow moves each source point to its
correspondence-weighted target location.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .core import (
    Descriptor,
    FlowField,
    PartLabels,
    PointCloud,
    Skeleton,
    SoftCorrespondence,
)

log = logging.getLogger(__name__)

# Ball radius (meters) for the local-covariance descriptor block; roughly
# one limb segment on an adult human.
DEFAULT_NEIGHBORHOOD_RADIUS = 0.25

DESCRIPTOR_PROVIDERS = ("handcrafted", "external")


@dataclass(frozen=True)
class CorrespondenceConfig:
    """Settings for soft-correspondence estimation.

    ``temperature`` is clamped from below at ``temperature_floor``; lower
    temperatures sharpen correspondence rows toward one-hot.
    """

    temperature: float = 0.1
    temperature_floor: float = 0.02
    descriptor_provider: str = "handcrafted"
    neighborhood_radius: float = DEFAULT_NEIGHBORHOOD_RADIUS
    descriptor_path: str | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.temperature_floor) or self.temperature_floor <= 0.0:
            raise ValueError("temperature_floor must be a positive finite scalar")
        if not np.isfinite(self.temperature) or self.temperature <= 0.0:
            raise ValueError("temperature must be a positive finite scalar")
        if self.temperature < self.temperature_floor:
            object.__setattr__(self, "temperature", float(self.temperature_floor))
        if self.descriptor_provider not in DESCRIPTOR_PROVIDERS:
            raise ValueError(
                f"unknown descriptor provider {self.descriptor_provider!r}; "
                f"expected one of {DESCRIPTOR_PROVIDERS}"
            )
        if self.neighborhood_radius <= 0.0:
            raise ValueError("neighborhood_radius must be positive")
        if self.descriptor_provider == "external" and self.descriptor_path is None:
            raise ValueError("external descriptor provider requires descriptor_path")


def handcrafted_descriptor(
    cloud: PointCloud,
    labels: PartLabels,
    skeleton: Skeleton | None = None,
    neighborhood_radius: float = DEFAULT_NEIGHBORHOOD_RADIUS,
) -> Descriptor:
    """Compute a translation-invariant geometric descriptor per point.

    Each row concatenates: height above the cloud centroid (1), offset
    from the centroid of the point's assigned part (3), eigenvalues of the
    local covariance within ``neighborhood_radius`` sorted descending (3),
    and the one-hot part label (K).  Dimension is ``7 + K``.

    Parameters
    ----------
    cloud : PointCloud
        Source points, shape (n, 3).
    labels : PartLabels
        Hard part assignment for every point.
    skeleton : Skeleton, optional
        Only used to cross-check the part count when supplied.
    neighborhood_radius : float
        Ball radius in meters for the covariance block.

    Returns
    -------
    Descriptor
        Array of shape (n, 7 + K).
    """
    if neighborhood_radius <= 0.0:
        raise ValueError("neighborhood_radius must be positive")
    if len(labels.hard) != len(cloud):
        raise ValueError(
            f"labels cover {len(labels.hard)} points but cloud has {len(cloud)}"
        )
    if skeleton is not None and skeleton.num_parts != labels.num_parts:
        raise ValueError(
            f"skeleton defines {skeleton.num_parts} parts but labels use "
            f"{labels.num_parts}"
        )

    points = cloud.points
    n = len(cloud)
    centroid = points.mean(axis=0)
    height = (points[:, 2] - centroid[2])[:, None]

    part_offset = np.empty((n, 3))
    for part in np.unique(labels.hard):
        mask = labels.hard == part
        part_offset[mask] = points[mask] - points[mask].mean(axis=0)

    eigenvalues = np.zeros((n, 3))
    tree = cKDTree(points)
    neighborhoods = tree.query_ball_point(points, neighborhood_radius)
    lonely = 0
    for i, members in enumerate(neighborhoods):
        if len(members) < 2:
            lonely += 1
            continue
        local = points[members] - points[members].mean(axis=0)
        cov = local.T @ local / len(members)
        vals = np.linalg.eigvalsh(cov)[::-1]
        eigenvalues[i] = np.maximum(vals, 0.0)
    if lonely:
        log.info(
            "%d of %d points had no neighbors within %.3g m; their "
            "eigenvalue block is zero",
            lonely,
            n,
            neighborhood_radius,
        )

    return Descriptor(
        np.hstack([height, part_offset, eigenvalues, labels.one_hot()])
    )


def load_external_descriptor(path: str, cloud: PointCloud) -> Descriptor:
    """Load a precomputed descriptor matrix (.npy) aligned with ``cloud``."""
    values = np.load(path)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(
            f"descriptor file {path!r} must hold a 2-d array, got "
            f"{values.ndim}-d"
        )
    if values.shape[0] != len(cloud):
        raise ValueError(
            f"descriptor file {path!r} has {values.shape[0]} rows but the "
            f"cloud has {len(cloud)} points"
        )
    return Descriptor(values)


def compute_descriptor(
    cloud: PointCloud,
    labels: PartLabels,
    cfg: CorrespondenceConfig,
    skeleton: Skeleton | None = None,
) -> Descriptor:
    """Dispatch to the configured descriptor provider."""
    if cfg.descriptor_provider == "handcrafted":
        return handcrafted_descriptor(
            cloud, labels, skeleton, cfg.neighborhood_radius
        )
    return load_external_descriptor(cfg.descriptor_path, cloud)


def soft_correspondence(
    source: Descriptor,
    target: Descriptor,
    cfg: CorrespondenceConfig,
) -> SoftCorrespondence:
    """Row-softmax of negative descriptor distances scaled by 1/temperature.

    Entry (i, j) grows as the distance between source row i and target row
    j shrinks; each row sums to one.
    """
    if source.dim != target.dim:
        raise ValueError(
            f"descriptor dimensions differ: source {source.dim}, "
            f"target {target.dim}"
        )
    scores = -cdist(source.values, target.values) / cfg.temperature
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=1, keepdims=True)
    return SoftCorrespondence(weights)


def flow_from_correspondence(
    matrix: SoftCorrespondence,
    source: PointCloud,
    target: PointCloud,
) -> FlowField:
    """Flow that carries each source point to its soft-correspondence target.

    The warped position of source point i is the correspondence-weighted
    average of target points, so every warped point lies inside the
    target's convex hull.
    """
    n, m = matrix.shape
    if n != len(source):
        raise ValueError(
            f"correspondence has {n} rows but source has {len(source)} points"
        )
    if m != len(target):
        raise ValueError(
            f"correspondence has {m} columns but target has {len(target)} points"
        )
    return FlowField(matrix.matrix @ target.points - source.points)
