"""Command-line entry point.

Three subcommands wire the library into reproducible batch runs:

``synth``     generate a simulated capture dataset (plus a beam-density
              figure and per-frame point counts).
``register``  run pairwise registration over the evaluation windows of a
              dataset split, writing one prediction PLY and one result
              JSON per pair plus an aggregate CSV, summary, and
              loss-trace figure.
``eval``      score a register output directory against dataset ground
              truth, writing a CSV, a console table, and an error
              histogram figure.

Every subcommand is deterministic for a fixed seed: serialized outputs
carry no wall-clock times, and pair ordering is sorted regardless of
worker scheduling.  Exit code is 0 iff no pair failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core import FlowField, PartLabels, PointCloud
from .io.config import (
    config_hash,
    read_lidar_overrides,
    read_registration_config,
    registration_config_from_dict,
    registration_config_to_dict,
    scene_config_to_dict,
)
from .io.dataset import Dataset, MANIFEST_NAME, gt_flow_to_reference, load_dataset, write_session
from .io.ply import read_cloud, write_cloud
from .metrics import (
    DEFAULT_SEQUENCE_LENGTH,
    PairRecord,
    aggregate_metrics,
    build_sequences,
    flow_metrics,
    sample_points,
)
from .register import RegistrationConfig, STATUS_FAILED, register_pair
from .report import (
    save_beam_density_figure,
    save_error_histogram,
    save_loss_trace_figure,
)
from .synth.lidar import rosette_directions
from .synth.scene import SceneConfig, generate_session

log = logging.getLogger(__name__)

# Env var naming a JSON registration config used when --config is absent.
CONFIG_ENV_VAR = "PARTFLOW_CONFIG"

# --ablate names -> weight fields zeroed by the ablation.
ABLATION_WEIGHTS = {
    "chamfer": "beta_chamfer",
    "smooth": "beta_smooth",
    "cluster": "beta_cluster",
    "rigid": "beta_rigid",
}

PAIRS_CSV_NAME = "pairs.csv"
SUMMARY_NAME = "summary.json"

__all__ = ["main", "CONFIG_ENV_VAR", "ABLATION_WEIGHTS", "PAIRS_CSV_NAME"]


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _pair_stem(person_id: str, source: int, reference: int) -> str:
    return f"{person_id}_src{source:06d}_ref{reference:06d}"


# ---------------------------------------------------------------- synth


def _cmd_synth(args: argparse.Namespace) -> int:
    overrides = {}
    if args.lidar_config is not None:
        overrides = read_lidar_overrides(args.lidar_config)
    config = SceneConfig(
        num_persons=args.persons,
        num_frames=args.frames,
        seed=args.seed,
        noise_sigma=args.noise_sigma,
        **overrides,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    session = generate_session(config)
    manifest_path = write_session(out, session)

    directions, _ = rosette_directions(
        session.lidars[0], 0.0, config.scan_window
    )
    radial = np.arccos(np.clip(directions[:, 2], -1.0, 1.0))
    save_beam_density_figure(
        out / "beam_density.png", radial, session.lidars[0].fov_radius
    )

    counts_path = out / "scan_counts.csv"
    total = 0
    with open(counts_path, "w", newline="") as sink:
        writer = csv.writer(sink)
        writer.writerow(["person", "frame", "points"])
        for m in range(config.num_persons):
            for frame in session.person_frames(m):
                n = 0 if frame.is_empty else len(frame.cloud)
                total += n
                writer.writerow([f"person_{m:03d}", frame.frame_index, n])
    print(
        f"wrote {config.num_persons} persons x {config.num_frames} frames "
        f"({total} points) to {out}"
    )
    print(f"manifest: {manifest_path}")
    return 0


# ------------------------------------------------------------- register


def _load_base_config(path: str | None) -> RegistrationConfig:
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return RegistrationConfig()
    return read_registration_config(path)


def _apply_overrides(
    cfg: RegistrationConfig, ablate: list[str], no_refine: bool
) -> RegistrationConfig:
    payload = registration_config_to_dict(cfg)
    for name in ablate:
        payload["weights"][ABLATION_WEIGHTS[name]] = 0.0
    if no_refine:
        payload["refine_at_end"] = False
    return registration_config_from_dict(payload)


def _parse_ablate(value: str | None) -> list[str]:
    if not value:
        return []
    names = [item.strip() for item in value.split(",") if item.strip()]
    for name in names:
        if name not in ABLATION_WEIGHTS:
            raise ValueError(
                f"unknown loss name {name!r} in --ablate; expected a "
                f"comma-separated subset of "
                f"{', '.join(sorted(ABLATION_WEIGHTS))}"
            )
    return names


def _pair_seed(base: int, parts: tuple[int, ...]) -> int:
    return int(np.random.SeedSequence((base,) + parts).generate_state(1)[0])


def _run_pair(task: tuple) -> dict:
    """Register one (source, reference) pair; returns a picklable record.

    Runs in worker processes under --jobs, so everything it needs
    travels in the task tuple and everything it returns is plain data.
    """
    (
        root,
        person_id,
        person_index,
        start_frame,
        source_frame,
        reference_frame,
        points_arg,
        cfg_payload,
    ) = task
    dataset = Dataset(
        root=Path(root),
        manifest=json.loads((Path(root) / MANIFEST_NAME).read_text()),
    )
    cfg = registration_config_from_dict(cfg_payload)
    record = {
        "person": person_id,
        "start_frame": start_frame,
        "source_frame": source_frame,
        "reference_frame": reference_frame,
        "status": STATUS_FAILED,
        "num_points": 0,
        "iterations": 0,
        "final_loss": float("inf"),
        "loss_trace": [],
        "breakdown": {},
        "error": None,
        "points": None,
        "flow": None,
        "indices": None,
    }
    try:
        rec_src = dataset.load_frame(person_id, source_frame)
        rec_ref = dataset.load_frame(person_id, reference_frame)
        if len(rec_src) == 0 or len(rec_ref) == 0:
            raise ValueError("pair includes an empty scan")
        if rec_src.labels is None or rec_ref.labels is None:
            raise ValueError("scan files lack part labels")
        num_parts = dataset.load_skeleton(person_id, source_frame).num_parts

        src_cloud = PointCloud(rec_src.points)
        ref_cloud = PointCloud(rec_ref.points)
        if points_arg == "all":
            src_idx = np.arange(len(src_cloud))
            ref_idx = np.arange(len(ref_cloud))
        else:
            target = int(points_arg)
            key = (person_index, source_frame, reference_frame)
            src_idx = sample_points(
                src_cloud, target, _pair_seed(cfg.seed, key + (0,))
            ).indices
            ref_idx = sample_points(
                ref_cloud, target, _pair_seed(cfg.seed, key + (1,))
            ).indices
        source = PointCloud(rec_src.points[src_idx])
        reference = PointCloud(rec_ref.points[ref_idx])
        labels_src = PartLabels(
            rec_src.labels[src_idx].astype(np.int64), num_parts
        )
        labels_ref = PartLabels(
            rec_ref.labels[ref_idx].astype(np.int64), num_parts
        )

        result = register_pair(source, reference, labels_src, labels_ref, cfg)
        record.update(
            status=result.status,
            num_points=len(source),
            iterations=len(result.loss_trace),
            final_loss=float(result.loss_trace[-1]),
            loss_trace=[float(v) for v in result.loss_trace],
            breakdown={k: float(v) for k, v in result.breakdown.items()},
            error=result.error,
            points=np.asarray(source.points, dtype=np.float32),
            flow=np.asarray(result.refined_flow.vectors, dtype=np.float32),
            indices=np.asarray(src_idx, dtype=np.int64),
        )
    except (ValueError, np.linalg.LinAlgError, FileNotFoundError) as exc:
        record["error"] = str(exc)
    return record


def _cmd_register(args: argparse.Namespace) -> int:
    try:
        ablate = _parse_ablate(args.ablate)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cfg = _apply_overrides(_load_base_config(args.config), ablate, args.no_refine)
    cfg_payload = registration_config_to_dict(cfg)

    dataset = load_dataset(args.dataset)
    person_ids = dataset.person_ids
    if args.split == "all":
        grouped = {pid: list(range(dataset.num_frames(pid))) for pid in person_ids}
    else:
        grouped = dataset.split_frames(args.split)

    seq_len = DEFAULT_SEQUENCE_LENGTH
    ref_pos = args.ref_frame
    if ref_pos < 0:
        ref_pos += seq_len
    if not 0 <= ref_pos < seq_len:
        print(
            f"error: --ref-frame must index a window of {seq_len} frames",
            file=sys.stderr,
        )
        return 2

    counts = [len(grouped[pid]) for pid in person_ids]
    windows = build_sequences(counts, seq_len=seq_len)
    tasks = []
    for window in windows:
        person_id = person_ids[window.person]
        frames = [grouped[person_id][pos] for pos in window.frames]
        reference = frames[ref_pos]
        for source in frames:
            if source == reference:
                continue
            tasks.append(
                (
                    str(args.dataset),
                    person_id,
                    window.person,
                    frames[0],
                    source,
                    reference,
                    args.points,
                    cfg_payload,
                )
            )
    tasks.sort(key=lambda t: (t[1], t[3], t[4]))
    if not tasks:
        print("error: no registration pairs in the selected split", file=sys.stderr)
        return 2

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_run_pair, tasks))
    else:
        records = [_run_pair(task) for task in tasks]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = {}
    failed = 0
    with open(out / PAIRS_CSV_NAME, "w", newline="") as sink:
        writer = csv.writer(sink)
        writer.writerow(
            [
                "person",
                "start_frame",
                "source_frame",
                "reference_frame",
                "num_points",
                "status",
                "iterations",
                "final_loss",
                "prediction",
            ]
        )
        for record in records:
            stem = _pair_stem(
                record["person"],
                record["source_frame"],
                record["reference_frame"],
            )
            prediction = ""
            if record["status"] != STATUS_FAILED:
                prediction = f"pred_{stem}.ply"
                write_cloud(
                    out / prediction,
                    record["points"],
                    flow=record["flow"],
                    indices=record["indices"],
                    comments=(
                        f"person={record['person']}",
                        f"source_frame={record['source_frame']}",
                        f"reference_frame={record['reference_frame']}",
                    ),
                )
                label = (
                    f"{record['person']} "
                    f"{record['source_frame']}->{record['reference_frame']}"
                )
                traces[label] = np.asarray(record["loss_trace"])
            else:
                failed += 1
                log.warning(
                    "pair %s frame %d -> %d failed: %s",
                    record["person"],
                    record["source_frame"],
                    record["reference_frame"],
                    record["error"],
                )
            payload = {
                key: record[key]
                for key in (
                    "person",
                    "start_frame",
                    "source_frame",
                    "reference_frame",
                    "status",
                    "num_points",
                    "iterations",
                    "final_loss",
                    "loss_trace",
                    "breakdown",
                    "error",
                )
            }
            (out / f"result_{stem}.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True) + "\n"
            )
            writer.writerow(
                [
                    record["person"],
                    record["start_frame"],
                    record["source_frame"],
                    record["reference_frame"],
                    record["num_points"],
                    record["status"],
                    record["iterations"],
                    _fmt(record["final_loss"]),
                    prediction,
                ]
            )

    save_loss_trace_figure(out / "loss_traces.png", traces)
    summary = {
        "dataset": str(args.dataset),
        "split": args.split,
        "points": args.points,
        "ref_position": ref_pos,
        "ablate": ablate,
        "num_pairs": len(records),
        "num_failed": failed,
        "config": cfg_payload,
        "config_hash": config_hash(cfg_payload),
    }
    (out / SUMMARY_NAME).write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"registered {len(records)} pairs ({failed} failed) -> {out}"
    )
    return 1 if failed else 0


# ----------------------------------------------------------------- eval


def _cmd_eval(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    person_index = {pid: i for i, pid in enumerate(dataset.person_ids)}
    pred_dir = Path(args.pred)
    pairs_path = pred_dir / PAIRS_CSV_NAME
    if not pairs_path.is_file():
        raise FileNotFoundError(f"missing pair listing {pairs_path}")
    with open(pairs_path, newline="") as source:
        rows = list(csv.DictReader(source))
    rows.sort(
        key=lambda r: (r["person"], int(r["start_frame"]), int(r["source_frame"]))
    )

    records: list[PairRecord] = []
    errors = []
    failed = 0
    for row in rows:
        person = row["person"]
        src = int(row["source_frame"])
        ref = int(row["reference_frame"])
        pair_name = f"{person} frame {src} -> {ref}"
        if row["status"] == STATUS_FAILED:
            failed += 1
            log.warning("skipping failed pair %s", pair_name)
            continue
        pred_path = pred_dir / row["prediction"]
        if not row["prediction"] or not pred_path.is_file():
            raise FileNotFoundError(
                f"missing prediction file for pair {pair_name}: {pred_path}"
            )
        pred = read_cloud(pred_path)
        if pred.flow is None or pred.indices is None:
            raise ValueError(
                f"prediction for pair {pair_name} lacks flow or index map"
            )
        full = dataset.load_frame(person, src)
        if pred.indices.max(initial=-1) >= len(full):
            raise ValueError(
                f"prediction for pair {pair_name} indexes beyond the scan"
            )
        if not np.array_equal(full.points[pred.indices], pred.points):
            raise ValueError(
                f"prediction points for pair {pair_name} do not match the "
                "dataset scan at the stored indices"
            )
        gt = gt_flow_to_reference(dataset, person, full, ref, indices=pred.indices)
        metrics = flow_metrics(
            FlowField(pred.flow.astype(float)), FlowField(gt)
        )
        records.append(
            PairRecord(
                person=person_index[person],
                start_frame=int(row["start_frame"]),
                source_frame=src,
                metrics=metrics,
            )
        )
        errors.append(
            np.linalg.norm(pred.flow.astype(float) - gt, axis=1)
        )

    if not records:
        print("error: no successful pairs to evaluate", file=sys.stderr)
        return 1
    report = aggregate_metrics(records)

    out_csv = Path(args.out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as sink:
        writer = csv.writer(sink)
        writer.writerow(
            [
                "scope",
                "person",
                "start_frame",
                "source_frame",
                "num_points",
                "epe3d_m",
                "accs_pct",
                "accr_pct",
                "outlier_pct",
            ]
        )
        for rec in records:
            writer.writerow(
                [
                    "pair",
                    dataset.person_ids[rec.person],
                    rec.start_frame,
                    rec.source_frame,
                    rec.metrics.num_points,
                    _fmt(rec.metrics.epe3d_mean),
                    _fmt(rec.metrics.accs_pct),
                    _fmt(rec.metrics.accr_pct),
                    _fmt(rec.metrics.outlier_pct),
                ]
            )
        for seq in report.per_sequence:
            writer.writerow(
                [
                    "sequence",
                    dataset.person_ids[seq.person],
                    seq.start_frame,
                    "",
                    seq.num_pairs,
                    _fmt(seq.epe3d_mean),
                    _fmt(seq.accs_pct),
                    _fmt(seq.accr_pct),
                    _fmt(seq.outlier_pct),
                ]
            )
        writer.writerow(
            [
                "aggregate",
                "",
                "",
                "",
                report.num_points,
                _fmt(report.epe3d_mean),
                _fmt(report.accs_pct),
                _fmt(report.accr_pct),
                _fmt(report.outlier_pct),
            ]
        )

    save_error_histogram(
        out_csv.with_name(out_csv.stem + "_hist.png"), np.concatenate(errors)
    )

    def spread(values: list[float]) -> float:
        return float(np.std(np.asarray(values))) if len(values) > 1 else 0.0

    epe_std = report.epe3d_std
    accs_std = spread([r.metrics.accs_pct for r in records])
    accr_std = spread([r.metrics.accr_pct for r in records])
    out_std = spread([r.metrics.outlier_pct for r in records])
    print(f"pairs evaluated: {len(records)}  (failed upstream: {failed})")
    print(f"EPE3D   {report.epe3d_mean:9.6f} +/- {epe_std:.6f} m")
    if report.epe3d_std_sequences is not None:
        print(f"        {report.epe3d_std_sequences:9.6f} std over sequences")
    print(f"AccS    {report.accs_pct:9.4f} +/- {accs_std:.4f} %")
    print(f"AccR    {report.accr_pct:9.4f} +/- {accr_std:.4f} %")
    print(f"Outlier {report.outlier_pct:9.4f} +/- {out_std:.4f} %")
    print(f"csv: {out_csv}")
    return 1 if failed else 0


# ----------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partflow",
        description=(
            "Body-part-aware non-rigid registration of sparse LiDAR "
            "scans: synthetic capture, registration, evaluation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", help="generate a simulated capture dataset"
    )
    p_synth.add_argument("--out", required=True, help="output dataset root")
    p_synth.add_argument("--persons", type=int, default=2)
    p_synth.add_argument("--frames", type=int, default=8)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument(
        "--lidar-config",
        default=None,
        help="JSON file overriding beam parameters (fov_radius, omega, "
        "pulse_rate, max_range)",
    )
    p_synth.add_argument("--noise-sigma", type=float, default=0.0)
    p_synth.set_defaults(func=_cmd_synth)

    p_reg = sub.add_parser(
        "register", help="register evaluation windows of a dataset split"
    )
    p_reg.add_argument("--dataset", required=True)
    p_reg.add_argument(
        "--split", choices=["train", "val", "test", "all"], default="test"
    )
    p_reg.add_argument(
        "--config",
        default=None,
        help=f"registration config JSON (default: ${CONFIG_ENV_VAR} or "
        "built-in defaults)",
    )
    p_reg.add_argument(
        "--points", choices=["512", "256", "128", "all"], default="512"
    )
    p_reg.add_argument(
        "--ref-frame",
        type=int,
        default=-1,
        help="window position used as the reference frame (default: last)",
    )
    p_reg.add_argument("--out", required=True)
    p_reg.add_argument("--no-refine", action="store_true")
    p_reg.add_argument(
        "--ablate",
        default=None,
        help="comma-separated loss names to zero out "
        f"({', '.join(sorted(ABLATION_WEIGHTS))})",
    )
    p_reg.add_argument("--jobs", type=int, default=1)
    p_reg.set_defaults(func=_cmd_register)

    p_eval = sub.add_parser(
        "eval", help="score register output against dataset ground truth"
    )
    p_eval.add_argument("--pred", required=True, help="register output dir")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--out-csv", required=True)
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
