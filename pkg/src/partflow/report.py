"""Figure rendering for the command-line pipelines.

All figures go through the Agg backend and are written with fixed PNG
metadata so identical inputs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_beam_density_figure",
    "save_loss_trace_figure",
    "save_error_histogram",
]

_PNG_METADATA = {"Software": "partflow"}
_DPI = 120


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def save_beam_density_figure(
    path: str | Path,
    radial_angles: np.ndarray,
    fov_radius: float,
    bins: int = 60,
) -> Path:
    """Plot the radial distribution of beam directions in one scan window.

    Left: raw histogram of |radial angle|.  Right: the same counts
    divided by annulus area, which exposes the characteristic pile-up of
    the rosette pattern at the center and at the rim.
    """
    radial = np.abs(np.asarray(radial_angles, dtype=float))
    edges = np.linspace(0.0, fov_radius, bins + 1)
    counts, _ = np.histogram(radial, bins=edges)
    annulus = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    centers = 0.5 * (edges[1:] + edges[:-1])

    fig, (ax_counts, ax_density) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax_counts.bar(centers, counts, width=edges[1] - edges[0], color="#3465a4")
    ax_counts.set_xlabel("radial angle from axis (rad)")
    ax_counts.set_ylabel("pulses per bin")
    ax_counts.set_title("pulse count")

    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(annulus > 0, counts / annulus, 0.0)
    ax_density.plot(centers, density, color="#a40000")
    ax_density.set_xlabel("radial angle from axis (rad)")
    ax_density.set_ylabel("pulses per unit solid angle")
    ax_density.set_title("areal density (center and rim heavy)")
    fig.tight_layout()
    return _save(fig, path)


def save_loss_trace_figure(
    path: str | Path, traces: dict[str, np.ndarray]
) -> Path:
    """Plot objective-vs-iteration curves, one line per labeled pair."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label in sorted(traces):
        values = np.asarray(traces[label], dtype=float)
        values = values[np.isfinite(values)]
        if len(values) == 0:
            continue
        ax.plot(np.arange(len(values)), values, label=label, linewidth=1.0)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("objective")
    ax.set_yscale("log")
    if traces:
        ax.legend(fontsize=7, ncol=2)
    ax.set_title("registration objective traces")
    fig.tight_layout()
    return _save(fig, path)


def save_error_histogram(
    path: str | Path,
    errors: np.ndarray,
    thresholds: tuple[float, ...] = (0.05, 0.1, 0.2),
) -> Path:
    """Histogram of per-point endpoint errors with threshold markers."""
    errors = np.asarray(errors, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    upper = max(float(errors.max(initial=0.0)), max(thresholds)) * 1.05
    ax.hist(errors, bins=np.linspace(0.0, upper, 61), color="#4e9a06")
    for value in thresholds:
        ax.axvline(value, color="#555555", linestyle="--", linewidth=0.8)
    ax.set_xlabel("endpoint error (m)")
    ax.set_ylabel("points")
    ax.set_title("flow endpoint error")
    fig.tight_layout()
    return _save(fig, path)
