"""Flow-quality metrics and the sequence evaluation protocol.

Per-point flow error feeds four statistics: mean end-point error and the
fractions of points under strict accuracy thresholds (5 cm, 10 cm) or
over the outlier threshold (20 cm).  Frames are grouped per person into
disjoint fixed-length windows whose last frame is the registration
reference, and per-pair results aggregate with equal weight per pair,
with spread reported both over pairs and over sequences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import FlowField, PointCloud

log = logging.getLogger(__name__)

ACC_STRICT_THRESHOLD = 0.05
ACC_RELAXED_THRESHOLD = 0.1
OUTLIER_THRESHOLD = 0.2

DEFAULT_SEQUENCE_LENGTH = 4


@dataclass(frozen=True)
class SequenceSummary:
    """Equal-weight-per-pair means over one sequence's registered pairs."""

    person: int
    start_frame: int
    num_pairs: int
    epe3d_mean: float
    accs_pct: float
    accr_pct: float
    outlier_pct: float


@dataclass(frozen=True)
class MetricReport:
    """Flow-error statistics.

    For a single pair ``epe3d_std`` spreads over points; for an
    aggregate it spreads over pairs, and ``epe3d_std_sequences`` (over
    per-sequence means) is filled in as well.  Percentages use strict
    inequalities against the thresholds.
    """

    epe3d_mean: float
    epe3d_std: float
    accs_pct: float
    accr_pct: float
    outlier_pct: float
    num_points: int
    epe3d_std_sequences: float | None = None
    per_sequence: tuple[SequenceSummary, ...] = ()
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        for name in ("accs_pct", "accr_pct", "outlier_pct"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"{name}={value} outside [0, 100]")
        if self.accs_pct > self.accr_pct + 1e-9:
            raise ValueError(
                f"strict accuracy {self.accs_pct} exceeds relaxed "
                f"{self.accr_pct}"
            )
        if self.outlier_pct > 100.0 - self.accs_pct + 1e-9:
            raise ValueError(
                f"outlier fraction {self.outlier_pct} overlaps strict "
                f"accuracy {self.accs_pct}"
            )


def flow_metrics(pred: FlowField, gt: FlowField) -> MetricReport:
    """Per-point error statistics of a predicted flow against ground truth.

    Error is the Euclidean norm of the per-point flow difference.
    Accuracy percentages count errors strictly below 0.05 m / 0.1 m;
    outliers strictly above 0.2 m.
    """
    if len(pred.vectors) != len(gt.vectors):
        raise ValueError(
            f"prediction has {len(pred.vectors)} vectors, ground truth "
            f"{len(gt.vectors)}"
        )
    errors = np.linalg.norm(pred.vectors - gt.vectors, axis=1)
    n = len(errors)
    return MetricReport(
        epe3d_mean=float(errors.mean()),
        epe3d_std=float(errors.std()),
        accs_pct=float((errors < ACC_STRICT_THRESHOLD).mean() * 100.0),
        accr_pct=float((errors < ACC_RELAXED_THRESHOLD).mean() * 100.0),
        outlier_pct=float((errors > OUTLIER_THRESHOLD).mean() * 100.0),
        num_points=n,
    )


@dataclass(frozen=True)
class PairRecord:
    """One registered pair's metrics, keyed by its sequence."""

    person: int
    start_frame: int
    source_frame: int
    metrics: MetricReport


def aggregate_metrics(pairs: list[PairRecord]) -> MetricReport:
    """Combine per-pair metrics with equal weight per pair.

    The headline standard deviation is over pair means;
    ``epe3d_std_sequences`` is over per-sequence means (each sequence
    first averaged over its own pairs).
    """
    if not pairs:
        raise ValueError("no pairs to aggregate")
    epe = np.array([p.metrics.epe3d_mean for p in pairs])
    accs = np.array([p.metrics.accs_pct for p in pairs])
    accr = np.array([p.metrics.accr_pct for p in pairs])
    outlier = np.array([p.metrics.outlier_pct for p in pairs])
    points = sum(p.metrics.num_points for p in pairs)

    summaries = []
    keys = sorted({(p.person, p.start_frame) for p in pairs})
    for person, start in keys:
        rows = [
            p for p in pairs if p.person == person and p.start_frame == start
        ]
        summaries.append(
            SequenceSummary(
                person=person,
                start_frame=start,
                num_pairs=len(rows),
                epe3d_mean=float(
                    np.mean([r.metrics.epe3d_mean for r in rows])
                ),
                accs_pct=float(np.mean([r.metrics.accs_pct for r in rows])),
                accr_pct=float(np.mean([r.metrics.accr_pct for r in rows])),
                outlier_pct=float(
                    np.mean([r.metrics.outlier_pct for r in rows])
                ),
            )
        )
    sequence_means = np.array([s.epe3d_mean for s in summaries])
    return MetricReport(
        epe3d_mean=float(epe.mean()),
        epe3d_std=float(epe.std()),
        accs_pct=float(accs.mean()),
        accr_pct=float(accr.mean()),
        outlier_pct=float(outlier.mean()),
        num_points=points,
        epe3d_std_sequences=float(sequence_means.std()),
        per_sequence=tuple(summaries),
    )


@dataclass(frozen=True)
class SequenceWindow:
    """A window of frame indices for one person; the last is the reference."""

    person: int
    frames: tuple[int, ...]

    @property
    def reference(self) -> int:
        return self.frames[-1]

    @property
    def sources(self) -> tuple[int, ...]:
        return self.frames[:-1]


def build_sequences(
    frame_counts: list[int],
    seq_len: int = DEFAULT_SEQUENCE_LENGTH,
    stride: int | None = None,
) -> list[SequenceWindow]:
    """Group each person's frames into disjoint fixed-length windows.

    Windows start at multiples of ``stride`` (default: ``seq_len``, so
    windows tile the timeline); a trailing partial window is dropped.
    Persons with fewer than ``seq_len`` frames are skipped with a log
    message.  Within each window the last frame is the registration
    reference for the preceding ones.
    """
    if seq_len < 2:
        raise ValueError("sequence length must be at least 2")
    if stride is None:
        stride = seq_len
    if stride < seq_len:
        raise ValueError(
            f"stride {stride} would overlap windows of length {seq_len}"
        )
    windows = []
    for person, count in enumerate(frame_counts):
        if count < seq_len:
            log.info(
                "person %d has %d frames, fewer than %d; skipped",
                person,
                count,
                seq_len,
            )
            continue
        for start in range(0, count - seq_len + 1, stride):
            windows.append(
                SequenceWindow(
                    person=person,
                    frames=tuple(range(start, start + seq_len)),
                )
            )
    return windows


@dataclass(frozen=True)
class SampledCloud:
    """A random subset of a cloud with the index map back into it."""

    cloud: PointCloud
    indices: np.ndarray
    took_all: bool


def sample_points(cloud: PointCloud, target: int, seed: int) -> SampledCloud:
    """Uniform random subset without replacement, deterministic in seed.

    When the cloud has at most ``target`` points the whole cloud is
    returned (``took_all`` set).  Indices come back sorted so the subset
    preserves the original point order, and the same indices applied to
    any per-point companion array (ground-truth flow, labels) keep it
    aligned.
    """
    if target < 1:
        raise ValueError("target must be at least 1")
    n = len(cloud)
    if n <= target:
        indices = np.arange(n)
        if n < target:
            log.info(
                "cloud has %d points, below the %d-point target; "
                "taking all",
                n,
                target,
            )
        return SampledCloud(cloud, indices, True)
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(n, size=target, replace=False))
    timestamps = (
        None if cloud.timestamps is None else cloud.timestamps[indices]
    )
    return SampledCloud(
        PointCloud(cloud.points[indices], timestamps), indices, False
    )
