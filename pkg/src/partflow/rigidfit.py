"""Closed-form rigid fitting and per-part flow refinement.

The least-squares rigid transform between index-aligned clouds comes from
the SVD of the cross-covariance (Kabsch/Procrustes with a determinant fix
that forbids reflections).  Per body part, the fitted transforms project
an arbitrary flow field onto the nearest piecewise-rigid one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FlowField, PartLabels, PointCloud, RigidTransform

# A part is fit with rotation only when it has at least this many points.
MIN_ROTATION_POINTS = 3
# Second singular value below this fraction of the first marks the
# cross-covariance rank-deficient (collinear points).
RANK_RATIO_TOL = 1e-9


@dataclass(frozen=True)
class KabschFit:
    """Rigid fit plus a flag marking the translation-only fallback."""

    transform: RigidTransform
    translation_only: bool


@dataclass(frozen=True)
class PartFit:
    """Rigid fit of one body part's flow."""

    part_index: int
    transform: RigidTransform
    point_count: int
    residual: float
    translation_only: bool


def kabsch(src: PointCloud, dst: PointCloud) -> KabschFit:
    """Least-squares rigid transform mapping ``src`` onto ``dst``.

    Correspondence is index-wise.  Centroids are subtracted, the SVD of
    the cross-covariance gives the rotation with a sign fix that keeps
    det(R) = +1 even for reflected targets.  With fewer than
    ``MIN_ROTATION_POINTS`` points, or a rank-deficient covariance
    (collinear points), the fit degrades to translation only and the
    result is flagged.

    Parameters
    ----------
    src, dst : PointCloud
        Equal-length clouds; row i of ``src`` corresponds to row i of
        ``dst``.

    Returns
    -------
    KabschFit
        The transform and whether the translation-only fallback fired.
    """
    if len(src) != len(dst):
        raise ValueError(
            f"source has {len(src)} points, destination {len(dst)}"
        )
    src_centroid = src.points.mean(axis=0)
    dst_centroid = dst.points.mean(axis=0)
    if len(src) < MIN_ROTATION_POINTS:
        return _translation_fit(src_centroid, dst_centroid)

    src_centered = src.points - src_centroid
    dst_centered = dst.points - dst_centroid
    covariance = src_centered.T @ dst_centered
    u, singular, vt = np.linalg.svd(covariance)
    if singular[1] <= RANK_RATIO_TOL * singular[0]:
        return _translation_fit(src_centroid, dst_centroid)

    sign = np.sign(np.linalg.det(vt.T @ u.T))
    rotation = vt.T @ np.diag([1.0, 1.0, sign]) @ u.T
    translation = dst_centroid - rotation @ src_centroid
    return KabschFit(RigidTransform(rotation, translation), False)


def _translation_fit(
    src_centroid: np.ndarray, dst_centroid: np.ndarray
) -> KabschFit:
    return KabschFit(
        RigidTransform(np.eye(3), dst_centroid - src_centroid), True
    )


def fit_parts(
    cloud: PointCloud, flow: FlowField, labels: PartLabels
) -> list[PartFit]:
    """Fit one rigid transform per occupied part to the part's flow.

    Sources are the part's points, destinations the same points displaced
    by their flow vectors.  The residual is the RMS fitting error in
    meters.
    """
    n = len(cloud)
    if len(flow.vectors) != n:
        raise ValueError(
            f"flow covers {len(flow.vectors)} points but cloud has {n}"
        )
    if len(labels.hard) != n:
        raise ValueError(
            f"labels cover {len(labels.hard)} points but cloud has {n}"
        )
    fits = []
    for part in np.unique(labels.hard):
        mask = labels.hard == part
        src = PointCloud(cloud.points[mask])
        dst = PointCloud(cloud.points[mask] + flow.vectors[mask])
        fit = kabsch(src, dst)
        moved = fit.transform.apply(src.points)
        residual = float(
            np.sqrt(((moved - dst.points) ** 2).sum(axis=1).mean())
        )
        fits.append(
            PartFit(
                part_index=int(part),
                transform=fit.transform,
                point_count=int(mask.sum()),
                residual=residual,
                translation_only=fit.translation_only,
            )
        )
    return fits


def fits_by_part(
    fits: list[PartFit], num_parts: int
) -> tuple[RigidTransform | None, ...]:
    """Arrange part fits into a tuple indexed by part id."""
    table: list[RigidTransform | None] = [None] * num_parts
    for fit in fits:
        if fit.part_index >= num_parts:
            raise ValueError(
                f"fit references part {fit.part_index} but only "
                f"{num_parts} parts exist"
            )
        table[fit.part_index] = fit.transform
    return tuple(table)


def refine_flow(
    cloud: PointCloud, flow: FlowField, labels: PartLabels
) -> FlowField:
    """Project a flow field onto per-part rigid motion.

    Each part's flow is replaced by the displacement its fitted rigid
    transform produces: R_k p + t_k - p.  The projection is idempotent
    and never increases the part-rigidity loss.
    """
    refined = np.empty_like(flow.vectors)
    for fit in fit_parts(cloud, flow, labels):
        mask = labels.hard == fit.part_index
        moved = fit.transform.apply(cloud.points[mask])
        refined[mask] = moved - cloud.points[mask]
    return FlowField(refined)
