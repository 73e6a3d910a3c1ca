"""Loss functions for flow and part-label estimation.

All losses are pure evaluations over numpy arrays.  The self-supervised
objective combines four terms (chamfer, smoothness, clustering,
part-rigidity); the supervised pair combines segmentation and flow
regression.  For optimization, nearest-neighbor assignments and per-part
rigid fits can be frozen, which makes the objective smooth in the flow
and admits an analytic gradient.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import FlowField, PartLabels, PointCloud, RigidTransform, warp
from .spatial import NeighborIndex

log = logging.getLogger(__name__)

# Probabilities inside cross-entropy terms are clamped from below.
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights for the supervised and self-supervised objectives."""

    alpha_seg: float = 0.1
    alpha_flow: float = 0.9
    beta_chamfer: float = 1.0
    beta_smooth: float = 1.0
    beta_cluster: float = 0.1
    beta_rigid: float = 10.0
    neighbor_k: int = 5

    def __post_init__(self) -> None:
        for name in (
            "alpha_seg",
            "alpha_flow",
            "beta_chamfer",
            "beta_smooth",
            "beta_cluster",
            "beta_rigid",
        ):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be a nonnegative finite scalar")
        if self.neighbor_k < 1:
            raise ValueError("neighbor_k must be at least 1")


@dataclass(frozen=True)
class SelfSupState:
    """Everything the self-supervised objective reads.

    ``labels`` may be omitted when the clustering weight is zero, and
    ``fits`` when the rigidity weight is zero.
    """

    source: PointCloud
    target: PointCloud
    flow: FlowField
    labels: PartLabels | None = None
    fits: tuple[RigidTransform | None, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.flow.vectors) != len(self.source):
            raise ValueError(
                f"flow covers {len(self.flow.vectors)} points but source has "
                f"{len(self.source)}"
            )
        if self.labels is not None and len(self.labels.hard) != len(self.source):
            raise ValueError(
                f"labels cover {len(self.labels.hard)} points but source has "
                f"{len(self.source)}"
            )


@dataclass(frozen=True)
class FrozenAssignments:
    """Nearest-neighbor assignments pinned at one evaluation point.

    ``target_nn[i]`` is the target index nearest to warped source point i;
    ``source_nn[j]`` the warped-source index nearest to target point j;
    ``smooth_neighbors`` the k-nearest-neighbor graph of the unwarped
    source (self excluded), which never changes during optimization.
    """

    target_nn: np.ndarray
    source_nn: np.ndarray
    smooth_neighbors: np.ndarray


def soft_from_hard(labels: PartLabels) -> PartLabels:
    """Labels with one-hot soft rows; identity when soft rows exist.

    Lets the clustering term run on hard bone assignments: agreeing
    neighbors contribute zero, disagreeing ones the clamp ceiling.
    """
    if labels.soft is not None:
        return labels
    n = len(labels.hard)
    soft = np.zeros((n, labels.num_parts))
    soft[np.arange(n), labels.hard] = 1.0
    return PartLabels(labels.hard, labels.num_parts, soft)


def seg_loss(pred: PartLabels, gt: PartLabels) -> float:
    """Mean cross-entropy of predicted soft labels against hard targets."""
    if pred.soft is None:
        raise ValueError("seg_loss needs soft predicted labels")
    if len(pred.hard) != len(gt.hard):
        raise ValueError(
            f"prediction covers {len(pred.hard)} points, target {len(gt.hard)}"
        )
    probs = pred.soft[np.arange(len(gt.hard)), gt.hard]
    clamped = int((probs < PROB_CLAMP).sum())
    if clamped:
        log.warning(
            "clamped %d zero probabilities in segmentation loss", clamped
        )
    return float(-np.log(np.maximum(probs, PROB_CLAMP)).mean())


def flow_loss(flow: FlowField, gt_flow: FlowField) -> float:
    """Mean squared flow error, (1/n) * sum of squared residual norms."""
    if len(flow.vectors) != len(gt_flow.vectors):
        raise ValueError(
            f"flow has {len(flow.vectors)} vectors, target "
            f"{len(gt_flow.vectors)}"
        )
    diff = flow.vectors - gt_flow.vectors
    return float((diff * diff).sum(axis=1).mean())


def chamfer_loss(warped: PointCloud, target: PointCloud) -> float:
    """Symmetric squared chamfer distance between two clouds."""
    forward = NeighborIndex(target).nearest_batch(warped.points)[1]
    backward = NeighborIndex(warped).nearest_batch(target.points)[1]
    return float((forward**2).mean() + (backward**2).mean())


def smoothness_loss(cloud: PointCloud, flow: FlowField, k: int) -> float:
    """Mean squared flow difference over each point's k nearest neighbors."""
    n = len(cloud)
    if len(flow.vectors) != n:
        raise ValueError(
            f"flow covers {len(flow.vectors)} points but cloud has {n}"
        )
    neighbors = NeighborIndex(cloud).knn_excluding_self(k)
    diff = flow.vectors[:, None, :] - flow.vectors[neighbors]
    return float((diff * diff).sum(axis=2).mean())


def clustering_loss(cloud: PointCloud, labels: PartLabels, k: int) -> float:
    """Cross-entropy between each point's soft labels and its neighbors'.

    For point i with neighbor j the term is -sum_c soft_j[c] *
    log(soft_i[c]); probabilities are clamped at ``PROB_CLAMP``.  Low when
    neighboring points agree on their part distribution.
    """
    if labels.soft is None:
        raise ValueError("clustering_loss needs soft labels")
    n = len(cloud)
    if len(labels.hard) != n:
        raise ValueError(
            f"labels cover {len(labels.hard)} points but cloud has {n}"
        )
    neighbors = NeighborIndex(cloud).knn_excluding_self(k)
    log_probs = np.log(np.maximum(labels.soft, PROB_CLAMP))
    # (n, k) cross-entropies: neighbor distribution against own log-probs.
    terms = -(labels.soft[neighbors] * log_probs[:, None, :]).sum(axis=2)
    return float(terms.mean())


def _check_fits(
    labels: PartLabels, fits: tuple[RigidTransform | None, ...]
) -> None:
    occupied = np.unique(labels.hard)
    for part in occupied:
        if part >= len(fits) or fits[part] is None:
            raise ValueError(f"no rigid transform supplied for part {part}")


def part_rigid_loss(
    cloud: PointCloud,
    flow: FlowField,
    labels: PartLabels,
    fits: tuple[RigidTransform | None, ...],
) -> float:
    """Mean squared deviation of the flow from per-part rigid motion.

    For a point p in part k with fit (R_k, t_k) the residual is
    (R_k - I) p + t_k - f; the loss averages squared residual norms over
    all points.
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
    _check_fits(labels, fits)
    residual = _rigid_flow_residual(cloud, flow, labels, fits)
    return float((residual * residual).sum(axis=1).mean())


def _rigid_flow_residual(
    cloud: PointCloud,
    flow: FlowField,
    labels: PartLabels,
    fits: tuple[RigidTransform | None, ...],
) -> np.ndarray:
    """Per-point (rigid-predicted flow) - (actual flow), shape (n, 3)."""
    predicted = np.empty_like(flow.vectors)
    for part in np.unique(labels.hard):
        mask = labels.hard == part
        fit = fits[part]
        predicted[mask] = (
            cloud.points[mask] @ (fit.rotation - np.eye(3)).T + fit.translation
        )
    return predicted - flow.vectors


def supervised_loss(
    pred: PartLabels,
    gt: PartLabels,
    flow: FlowField,
    gt_flow: FlowField,
    weights: LossWeights,
) -> tuple[float, dict[str, float]]:
    """Weighted sum of segmentation and flow-regression losses."""
    breakdown = {
        "seg": seg_loss(pred, gt),
        "flow": flow_loss(flow, gt_flow),
    }
    total = weights.alpha_seg * breakdown["seg"] + (
        weights.alpha_flow * breakdown["flow"]
    )
    return total, breakdown


def total_selfsup_loss(
    state: SelfSupState, weights: LossWeights
) -> tuple[float, dict[str, float]]:
    """Weighted self-supervised objective with its per-term breakdown.

    Returns ``(total, breakdown)`` where the breakdown holds the raw
    (unweighted) term values.  Terms with zero weight are skipped and
    reported as 0, so states without labels or fits are accepted when the
    corresponding weights are off.
    """
    breakdown = {
        "chamfer": 0.0,
        "smoothness": 0.0,
        "clustering": 0.0,
        "part_rigid": 0.0,
    }
    warped = warp(state.source, state.flow)
    if weights.beta_chamfer > 0.0:
        breakdown["chamfer"] = chamfer_loss(warped, state.target)
    if weights.beta_smooth > 0.0:
        breakdown["smoothness"] = smoothness_loss(
            state.source, state.flow, weights.neighbor_k
        )
    if weights.beta_cluster > 0.0:
        if state.labels is None:
            raise ValueError("clustering term enabled but state has no labels")
        breakdown["clustering"] = clustering_loss(
            state.source, state.labels, weights.neighbor_k
        )
    if weights.beta_rigid > 0.0:
        if state.labels is None or state.fits is None:
            raise ValueError(
                "part-rigidity term enabled but state lacks labels or fits"
            )
        breakdown["part_rigid"] = part_rigid_loss(
            state.source, state.flow, state.labels, state.fits
        )
    total = (
        weights.beta_chamfer * breakdown["chamfer"]
        + weights.beta_smooth * breakdown["smoothness"]
        + weights.beta_cluster * breakdown["clustering"]
        + weights.beta_rigid * breakdown["part_rigid"]
    )
    return total, breakdown


def freeze_assignments(
    state: SelfSupState, weights: LossWeights
) -> FrozenAssignments:
    """Pin nearest-neighbor assignments at the current warped positions."""
    warped = warp(state.source, state.flow)
    target_nn = NeighborIndex(state.target).nearest_batch(warped.points)[0]
    source_nn = NeighborIndex(warped).nearest_batch(state.target.points)[0]
    if weights.beta_smooth > 0.0:
        smooth = NeighborIndex(state.source).knn_excluding_self(
            weights.neighbor_k
        )
    else:
        smooth = np.empty((len(state.source), 0), dtype=np.intp)
    return FrozenAssignments(target_nn, source_nn, smooth)


def frozen_selfsup_loss(
    state: SelfSupState,
    frozen: FrozenAssignments,
    weights: LossWeights,
) -> tuple[float, dict[str, float]]:
    """Self-supervised objective with assignments held fixed.

    Upper-bounds the true objective (which re-minimizes over assignments)
    and coincides with it at the point where the assignments were frozen.
    """
    breakdown = {
        "chamfer": 0.0,
        "smoothness": 0.0,
        "clustering": 0.0,
        "part_rigid": 0.0,
    }
    source = state.source.points
    target = state.target.points
    warped = source + state.flow.vectors
    if weights.beta_chamfer > 0.0:
        forward = warped - target[frozen.target_nn]
        backward = target - warped[frozen.source_nn]
        breakdown["chamfer"] = float(
            (forward * forward).sum(axis=1).mean()
            + (backward * backward).sum(axis=1).mean()
        )
    if weights.beta_smooth > 0.0:
        diff = (
            state.flow.vectors[:, None, :]
            - state.flow.vectors[frozen.smooth_neighbors]
        )
        breakdown["smoothness"] = float((diff * diff).sum(axis=2).mean())
    if weights.beta_cluster > 0.0:
        breakdown["clustering"] = clustering_loss(
            state.source, state.labels, weights.neighbor_k
        )
    if weights.beta_rigid > 0.0:
        residual = _rigid_flow_residual(
            state.source, state.flow, state.labels, state.fits
        )
        breakdown["part_rigid"] = float(
            (residual * residual).sum(axis=1).mean()
        )
    total = (
        weights.beta_chamfer * breakdown["chamfer"]
        + weights.beta_smooth * breakdown["smoothness"]
        + weights.beta_cluster * breakdown["clustering"]
        + weights.beta_rigid * breakdown["part_rigid"]
    )
    return total, breakdown


def grad_selfsup(
    state: SelfSupState,
    frozen: FrozenAssignments,
    weights: LossWeights,
) -> np.ndarray:
    """Analytic gradient of the frozen self-supervised loss w.r.t. the flow.

    The clustering term does not depend on the flow and contributes zero.
    Returns an (n, 3) array.
    """
    source = state.source.points
    target = state.target.points
    flow = state.flow.vectors
    warped = source + flow
    n = len(source)
    m = len(target)
    grad = np.zeros((n, 3))

    if weights.beta_chamfer > 0.0:
        chamfer = (2.0 / n) * (warped - target[frozen.target_nn])
        np.add.at(
            chamfer,
            frozen.source_nn,
            (2.0 / m) * (warped[frozen.source_nn] - target),
        )
        grad += weights.beta_chamfer * chamfer

    if weights.beta_smooth > 0.0 and frozen.smooth_neighbors.shape[1] > 0:
        k = frozen.smooth_neighbors.shape[1]
        diff = flow[:, None, :] - flow[frozen.smooth_neighbors]
        smooth = diff.sum(axis=1)
        np.add.at(
            smooth,
            frozen.smooth_neighbors.ravel(),
            -diff.reshape(-1, 3),
        )
        grad += weights.beta_smooth * (2.0 / (n * k)) * smooth

    if weights.beta_rigid > 0.0:
        residual = _rigid_flow_residual(
            state.source, state.flow, state.labels, state.fits
        )
        grad += weights.beta_rigid * (-2.0 / n) * residual

    return grad
