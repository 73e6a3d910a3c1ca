"""End-to-end pairwise registration of labeled point clouds.

The engine estimates a per-point flow field in three stages: an initial
flow from descriptor soft correspondence, block-coordinate minimization
of the self-supervised objective (nearest-neighbor assignments and
per-part rigid fits frozen while the flow takes normalized gradient
steps, then re-fit and re-assigned), and an optional final projection of
the flow onto per-part rigid motion.  The reported loss trace is
non-increasing: a step is only accepted when it lowers the frozen
objective, which upper-bounds the true one.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import FlowField, PartLabels, PointCloud, warp
from .correspond import (
    CorrespondenceConfig,
    compute_descriptor,
    flow_from_correspondence,
    soft_correspondence,
)
from .losses import (
    FrozenAssignments,
    LossWeights,
    SelfSupState,
    freeze_assignments,
    frozen_selfsup_loss,
    grad_selfsup,
    soft_from_hard,
    total_selfsup_loss,
)
from .rigidfit import PartFit, fit_parts, fits_by_part, refine_flow

log = logging.getLogger(__name__)

# Inner gradient steps stall once the step size halves below this (meters).
STALL_STEP = 1e-8

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max_iters"
STATUS_STALLED = "stalled"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class RegistrationConfig:
    """Hyperparameters of the registration engine.

    ``step_size`` is the largest per-point displacement (meters) of one
    normalized gradient step; it halves whenever a step fails to lower
    the frozen objective.  ``seed`` is recorded for reproducibility; the
    engine itself is deterministic.
    """

    weights: LossWeights = field(default_factory=LossWeights)
    correspondence: CorrespondenceConfig = field(
        default_factory=CorrespondenceConfig
    )
    max_outer_iters: int = 50
    inner_grad_steps: int = 20
    step_size: float = 0.01
    convergence_tol: float = 1e-6
    refine_at_end: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")
        if self.inner_grad_steps < 1:
            raise ValueError("inner_grad_steps must be at least 1")
        if not np.isfinite(self.step_size) or self.step_size <= 0.0:
            raise ValueError("step_size must be a positive finite scalar")
        if not np.isfinite(self.convergence_tol) or self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol must be positive")


@dataclass(frozen=True)
class RegistrationResult:
    """Output of one pairwise registration.

    ``loss_trace`` holds the true self-supervised loss once per outer
    iteration (including the initial value) and is non-increasing.
    ``refined_flow`` equals ``flow`` when refinement was disabled.
    ``error`` is set (with status "failed") when a sequence-level run
    caught an exception for this pair.
    """

    flow: FlowField
    refined_flow: FlowField
    labels_src: PartLabels
    labels_dst: PartLabels
    loss_trace: np.ndarray
    breakdown: dict[str, float]
    fits: list[PartFit]
    status: str
    wall_time: float
    error: str | None = None


def _needs_labels(weights: LossWeights) -> bool:
    return weights.beta_cluster > 0.0 or weights.beta_rigid > 0.0


def _current_fits(
    source: PointCloud,
    flow: FlowField,
    labels: PartLabels,
    weights: LossWeights,
) -> tuple[list[PartFit], tuple | None]:
    if weights.beta_rigid <= 0.0:
        return [], None
    fits = fit_parts(source, flow, labels)
    return fits, fits_by_part(fits, labels.num_parts)


def register_pair(
    source: PointCloud,
    target: PointCloud,
    labels_src: PartLabels,
    labels_dst: PartLabels,
    cfg: RegistrationConfig,
) -> RegistrationResult:
    """Estimate the flow that warps ``source`` onto ``target``.

    Parameters
    ----------
    source, target : PointCloud
        The clouds to align; the flow lives on ``source``.
    labels_src, labels_dst : PartLabels
        Per-point body-part labels for each cloud.
    cfg : RegistrationConfig
        Engine settings.

    Returns
    -------
    RegistrationResult
        Flow, refined flow, per-iteration loss trace, final part fits.
    """
    started = time.perf_counter()
    if len(labels_src.hard) != len(source):
        raise ValueError("source labels do not cover the source cloud")
    if len(labels_dst.hard) != len(target):
        raise ValueError("target labels do not cover the target cloud")

    weights = cfg.weights
    src_descriptor = compute_descriptor(source, labels_src, cfg.correspondence)
    dst_descriptor = compute_descriptor(target, labels_dst, cfg.correspondence)
    matrix = soft_correspondence(
        src_descriptor, dst_descriptor, cfg.correspondence
    )
    flow = flow_from_correspondence(matrix, source, target)

    state_labels = labels_src if _needs_labels(weights) else None
    if state_labels is not None and weights.beta_cluster > 0.0:
        state_labels = soft_from_hard(state_labels)
    fits, fit_table = _current_fits(source, flow, labels_src, weights)
    state = SelfSupState(source, target, flow, state_labels, fit_table)
    loss, breakdown = total_selfsup_loss(state, weights)
    trace = [loss]

    status = STATUS_MAX_ITERS
    for _ in range(cfg.max_outer_iters):
        frozen = freeze_assignments(state, weights)
        vectors, moved = _inner_descent(state, frozen, weights, cfg)
        if not moved:
            status = STATUS_STALLED
            break

        new_flow = FlowField(vectors)
        new_fits, new_table = _current_fits(
            source, new_flow, labels_src, weights
        )
        new_state = SelfSupState(
            source, target, new_flow, state_labels, new_table
        )
        new_loss, new_breakdown = total_selfsup_loss(new_state, weights)
        if new_loss > trace[-1]:
            # Only reachable through rounding; keep the better iterate.
            status = STATUS_STALLED
            break
        flow, fits, state = new_flow, new_fits, new_state
        breakdown = new_breakdown
        trace.append(new_loss)
        previous = trace[-2]
        decrease = previous - new_loss
        if decrease <= cfg.convergence_tol * max(abs(previous), 1e-30):
            status = STATUS_CONVERGED
            break

    if cfg.refine_at_end:
        refined = refine_flow(source, flow, labels_src)
    else:
        refined = flow

    trace_array = np.asarray(trace)
    trace_array.setflags(write=False)
    return RegistrationResult(
        flow=flow,
        refined_flow=refined,
        labels_src=labels_src,
        labels_dst=labels_dst,
        loss_trace=trace_array,
        breakdown=breakdown,
        fits=fits,
        status=status,
        wall_time=time.perf_counter() - started,
    )


def _inner_descent(
    state: SelfSupState,
    frozen: FrozenAssignments,
    weights: LossWeights,
    cfg: RegistrationConfig,
) -> tuple[np.ndarray, bool]:
    """Gradient steps on the frozen objective with halving on non-decrease.

    Each accepted step displaces the worst point by exactly the current
    step size (meters) along the negative gradient; the step starts at
    ``cfg.step_size`` and halves whenever a trial fails to lower the
    loss, stalling below ``STALL_STEP``.  Returns the new flow vectors
    and whether any step was accepted.
    """
    step = cfg.step_size
    vectors = state.flow.vectors.copy()
    current = SelfSupState(
        state.source, state.target, FlowField(vectors), state.labels, state.fits
    )
    loss, _ = frozen_selfsup_loss(current, frozen, weights)
    moved = False
    for _ in range(cfg.inner_grad_steps):
        grad = grad_selfsup(current, frozen, weights)
        largest = float(np.sqrt((grad * grad).sum(axis=1).max()))
        if largest < 1e-15:
            break
        while step >= STALL_STEP:
            candidate = vectors - grad * (step / largest)
            trial = SelfSupState(
                state.source,
                state.target,
                FlowField(candidate),
                state.labels,
                state.fits,
            )
            trial_loss, _ = frozen_selfsup_loss(trial, frozen, weights)
            if trial_loss < loss:
                vectors, current, loss = candidate, trial, trial_loss
                moved = True
                break
            step *= 0.5
        if step < STALL_STEP:
            break
    return vectors, moved


def register_sequence(
    frames: list[PointCloud],
    labels: list[PartLabels],
    reference_index: int,
    cfg: RegistrationConfig,
) -> list[RegistrationResult]:
    """Register every non-reference frame to the reference, pairwise.

    One result per non-reference frame, in frame order.  A pair that
    raises is reported as a failed result (status "failed", zero flow)
    without aborting the remaining pairs.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames to register a sequence")
    if len(labels) != len(frames):
        raise ValueError(
            f"{len(labels)} label sets supplied for {len(frames)} frames"
        )
    if not 0 <= reference_index < len(frames):
        raise ValueError(
            f"reference index {reference_index} out of range for "
            f"{len(frames)} frames"
        )
    reference = frames[reference_index]
    reference_labels = labels[reference_index]
    results = []
    for index, (frame, frame_labels) in enumerate(zip(frames, labels)):
        if index == reference_index:
            continue
        try:
            results.append(
                register_pair(frame, reference, frame_labels, reference_labels, cfg)
            )
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.warning("registration of frame %d failed: %s", index, exc)
            zero = FlowField.zeros(len(frame))
            results.append(
                RegistrationResult(
                    flow=zero,
                    refined_flow=zero,
                    labels_src=frame_labels,
                    labels_dst=reference_labels,
                    loss_trace=np.asarray([np.inf]),
                    breakdown={},
                    fits=[],
                    status=STATUS_FAILED,
                    wall_time=0.0,
                    error=str(exc),
                )
            )
    return results
