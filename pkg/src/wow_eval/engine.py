"""Per-sample metric orchestration and per-model reduction.

Metrics whose inputs are absent are skipped with a recorded reason, never
defaulted; FVD is computed once per model from pooled clip features. Raw
values are averaged per model first and mapped once.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import camera as cam
from . import distribution, frame_metrics, judges, region_consistency, trajectory
from .core import (
    Manifest,
    Sample,
    load_rle_file,
    load_track_file,
    read_embedding_file,
    uniform_sample_indices,
)
from .errors import NoRecords, WowEvalError
from .scoring import (
    DEFAULT_MAPPINGS,
    METRIC_GROUPS,
    MappingSpec,
    aggregate_overall,
    map_raw,
)

SCHEMA_VERSION = 1

ALL_METRICS = tuple(m for group in METRIC_GROUPS.values() for m in group)


@dataclass(frozen=True)
class EvaluationPlan:
    metrics_enabled: frozenset = frozenset(ALL_METRICS)
    mappings: tuple = DEFAULT_MAPPINGS
    weights: dict = field(default_factory=dict)
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        by_name = {m.metric for m in self.mappings}
        missing = set(self.metrics_enabled) - by_name
        if missing:
            raise ValueError(f"enabled metrics without a mapping: {sorted(missing)}")

    def mapping_for(self, metric: str) -> MappingSpec:
        for m in self.mappings:
            if m.metric == metric:
                return m
        raise KeyError(metric)


@dataclass
class SampleRecord:
    sample_id: str
    model: str
    metrics: dict  # name -> {"raw": x} | {"skipped": reason} | {"error": msg}
    inputs: dict  # relative path -> sha256 hex digest
    clip_gen: np.ndarray | None = None
    clip_gt: np.ndarray | None = None


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _file_digests(sample: Sample, base: Path) -> dict:
    out = {}
    for rel in sorted(set(sample.referenced_paths())):
        p = base / rel
        if p.is_dir():
            for f in sorted(p.iterdir()):
                out[f"{rel}/{f.name}"] = _digest(f)
        elif p.exists():
            out[rel] = _digest(p)
    return out


class _MetricRunner:
    """Caches loaded artifacts while computing one sample's metrics."""

    def __init__(self, sample: Sample, base: Path, seed: int):
        self.sample = sample
        self.base = base
        self.seed = seed
        self._cache = {}

    def path(self, rel):
        return self.base / rel if rel is not None else None

    def _load(self, key, loader, rel):
        if key not in self._cache:
            self._cache[key] = loader(self.base / rel)
        return self._cache[key]

    # --- artifact accessors (None means "input absent") -------------------

    def frames(self, which):
        rel = getattr(self.sample, f"{which}_frames_dir")
        if rel is None:
            return None
        return self._load(("frames", which), frame_metrics.load_frames, rel)

    def embedding(self, which, kind):
        rel = getattr(self.sample, f"{which}_embeddings").get(kind)
        if rel is None:
            return None
        return self._load(("emb", which, kind), read_embedding_file, rel)

    def masks(self, which, region):
        rel = getattr(self.sample, f"{which}_masks").get(region)
        if rel is None:
            return None
        return self._load(("mask", which, region), load_rle_file, rel)

    def camera_traj(self, which):
        rel = getattr(self.sample, f"{which}_tracks")
        if rel is None:
            return None
        key = ("camera", which)
        if key not in self._cache:
            w, h, frames = load_track_file(self.base / rel)
            cfg = cam.RansacConfig(seed=self.seed)
            self._cache[key] = cam.camera_trajectory_from_tracks(frames, w, h, cfg)
        return self._cache[key]

    def corrected_trajectory(self, which, region):
        """Normalized, camera-corrected centroid trajectory for one side."""
        masks = self.masks(which, region)
        if masks is None:
            return None
        traj = trajectory.normalize_trajectory(
            trajectory.centroid_trajectory(masks))
        camera = self.camera_traj(which)
        if camera is not None:
            cam_traj = camera.as_trajectory()
            if len(cam_traj) != len(traj):
                idx = uniform_sample_indices(len(cam_traj), len(traj)) \
                    if len(cam_traj) >= len(traj) else None
                if idx is None:
                    # camera path shorter: stretch by resampling the longer
                    idx2 = uniform_sample_indices(len(traj), len(cam_traj))
                    traj = trajectory.Trajectory2D(
                        points=tuple(traj.points[i] for i in idx2),
                        space="normalized")
                else:
                    cam_traj = trajectory.Trajectory2D(
                        points=tuple(cam_traj.points[i] for i in idx),
                        space="normalized")
            traj = trajectory.correct_camera(traj, cam_traj)
        return traj


def evaluate_sample(sample: Sample, plan: EvaluationPlan,
                    base_dir) -> SampleRecord:
    """Run every enabled metric whose inputs exist; record skips and errors."""
    base = Path(base_dir)
    runner = _MetricRunner(sample, base, plan.seed)
    metrics = {}

    def run(name, compute, *needs):
        if name not in plan.metrics_enabled:
            return
        absent = [label for label, present in needs if not present]
        if absent:
            metrics[name] = {"skipped": "missing " + ", ".join(absent)}
            return
        try:
            value = compute()
        except WowEvalError as exc:
            metrics[name] = {"error": f"{type(exc).__name__}: {exc}"}
            return
        raw = float(value)
        metrics[name] = {
            "raw": raw,
            "mapped": map_raw(raw, plan.mapping_for(name)),
        }

    s = sample

    # frame metrics
    has_gen_frames = s.gen_frames_dir is not None
    has_gt_frames = s.gt_frames_dir is not None
    run("psnr",
        lambda: frame_metrics.psnr_sequence(runner.frames("gen"),
                                            runner.frames("gt")),
        ("gen frames", has_gen_frames), ("gt frames", has_gt_frames))
    run("ssim",
        lambda: frame_metrics.ssim_sequence(runner.frames("gen"),
                                            runner.frames("gt")),
        ("gen frames", has_gen_frames), ("gt frames", has_gt_frames))

    # embedding metrics
    run("dino",
        lambda: frame_metrics.dino_score(runner.embedding("gen", "global"),
                                         runner.embedding("gt", "global")),
        ("gen global embeddings", "global" in s.gen_embeddings),
        ("gt global embeddings", "global" in s.gt_embeddings))
    run("dreamsim",
        lambda: frame_metrics.dreamsim_score(
            runner.embedding("gen", "dreamsim"),
            runner.embedding("gt", "dreamsim")),
        ("gen dreamsim embeddings", "dreamsim" in s.gen_embeddings),
        ("gt dreamsim embeddings", "dreamsim" in s.gt_embeddings))

    # regional consistency (generated video, its own tracked masks)
    def run_mrc():
        report = region_consistency.mrc(runner.embedding("gen", "patch"),
                                        runner.masks("gen", "obj"),
                                        runner.masks("gen", "arm"))
        return report

    mrc_ready = ("patch" in s.gen_embeddings and "obj" in s.gen_masks
                 and "arm" in s.gen_masks)
    if mrc_ready and {"mrc_obj", "mrc_arm", "mrc_bg"} & plan.metrics_enabled:
        try:
            report = run_mrc()
            values = {"mrc_obj": report.mrc_obj, "mrc_arm": report.mrc_arm,
                      "mrc_bg": report.mrc_bg}
            for name, v in values.items():
                if name in plan.metrics_enabled:
                    metrics[name] = {
                        "raw": v, "mapped": map_raw(v, plan.mapping_for(name)),
                        "masks_from": "gen",
                    }
        except WowEvalError as exc:
            for name in ("mrc_obj", "mrc_arm", "mrc_bg"):
                if name in plan.metrics_enabled:
                    metrics[name] = {"error": f"{type(exc).__name__}: {exc}"}
    else:
        for name in ("mrc_obj", "mrc_arm", "mrc_bg"):
            if name in plan.metrics_enabled:
                metrics[name] = {
                    "skipped": "missing gen patch embeddings or region masks"}

    # trajectory metrics (robot arm / manipulated object)
    for prefix, region in (("robot", "arm"), ("obj", "obj")):
        names = [f"{prefix}_l2norm", f"{prefix}_dtw", f"{prefix}_frechet"]
        if not set(names) & plan.metrics_enabled:
            continue
        have = (region in s.gen_masks and region in s.gt_masks)
        if not have:
            for name in names:
                if name in plan.metrics_enabled:
                    metrics[name] = {
                        "skipped": f"missing gen/gt {region} masks"}
            continue
        try:
            a = runner.corrected_trajectory("gen", region)
            b = runner.corrected_trajectory("gt", region)
            report = trajectory.compare_trajectories(a, b)
            vals = {names[0]: report.l2norm, names[1]: report.dtw,
                    names[2]: report.frechet}
            for name, v in vals.items():
                if name in plan.metrics_enabled:
                    entry = {"raw": v,
                             "mapped": map_raw(v, plan.mapping_for(name)),
                             "aligned_length": report.aligned_length}
                    if name.endswith("_dtw"):
                        entry["dtw_normalized"] = True
                    metrics[name] = entry
        except WowEvalError as exc:
            for name in names:
                if name in plan.metrics_enabled:
                    metrics[name] = {"error": f"{type(exc).__name__}: {exc}"}

    # camera ATE / RPE
    has_tracks = s.gen_tracks is not None and s.gt_tracks is not None
    run("cam_ate",
        lambda: cam.ate(runner.camera_traj("gen"), runner.camera_traj("gt")),
        ("gen/gt tracks", has_tracks))
    run("cam_rpe",
        lambda: cam.rpe(runner.camera_traj("gen"), runner.camera_traj("gt")),
        ("gen/gt tracks", has_tracks))

    # judge metrics
    run("caption",
        lambda: judges.caption_score(judges.load_caption_judgment(
            runner.path(s.judge_outputs["caption"]))),
        ("caption judge output", "caption" in s.judge_outputs))

    def run_seq_exec():
        j = judges.load_sequence_exec_judgment(
            runner.path(s.judge_outputs["sequence_exec"]))
        return judges.sequence_exec_scores(j)

    if {"seq_match", "exec_quality"} & plan.metrics_enabled:
        if "sequence_exec" in s.judge_outputs:
            try:
                seq, execq = run_seq_exec()
                for name, v in (("seq_match", seq), ("exec_quality", execq)):
                    if name in plan.metrics_enabled:
                        metrics[name] = {
                            "raw": v,
                            "mapped": map_raw(v, plan.mapping_for(name))}
            except WowEvalError as exc:
                for name in ("seq_match", "exec_quality"):
                    if name in plan.metrics_enabled:
                        metrics[name] = {"error": f"{type(exc).__name__}: {exc}"}
        else:
            for name in ("seq_match", "exec_quality"):
                if name in plan.metrics_enabled:
                    metrics[name] = {"skipped": "missing sequence_exec judge output"}

    run("physical",
        lambda: judges.physical_score(judges.load_physical_judgment(
            runner.path(s.judge_outputs["physical"]))),
        ("physical judge output", "physical" in s.judge_outputs))
    run("planning_dag",
        lambda: judges.planning_score(judges.load_planning_judgment(
            runner.path(s.judge_outputs["planning"]))),
        ("planning judge output", "planning" in s.judge_outputs))

    # FVD inputs are pooled at the model level
    if "fvd" in plan.metrics_enabled:
        if "clip" in s.gen_embeddings and "clip" in s.gt_embeddings:
            metrics["fvd"] = {"skipped": "computed at dataset level"}
        else:
            metrics["fvd"] = {"skipped": "missing gen/gt clip features"}

    clip_gen = clip_gt = None
    if "clip" in s.gen_embeddings and "clip" in s.gt_embeddings:
        try:
            clip_gen = runner.embedding("gen", "clip").global_vectors()
            clip_gt = runner.embedding("gt", "clip").global_vectors()
        except WowEvalError as exc:
            metrics["fvd"] = {"error": f"{type(exc).__name__}: {exc}"}

    return SampleRecord(
        sample_id=s.id,
        model=s.model,
        metrics=metrics,
        inputs=_file_digests(s, base),
        clip_gen=clip_gen,
        clip_gt=clip_gt,
    )


def evaluate_manifest(manifest: Manifest, plan: EvaluationPlan, base_dir):
    """Evaluate all samples with up to plan.jobs workers, in manifest order."""
    samples = manifest.samples
    if plan.jobs == 1:
        return [evaluate_sample(s, plan, base_dir) for s in samples]
    with ThreadPoolExecutor(max_workers=plan.jobs) as pool:
        futures = [pool.submit(evaluate_sample, s, plan, base_dir)
                   for s in samples]
        return [f.result() for f in futures]


def reduce_model(records, plan: EvaluationPlan) -> dict:
    """Fold per-sample records for one model into a scorecard dict.

    Per-metric raw means over samples where present; FVD once from pooled
    clip features; group means and overall from the mapped model-level values.
    """
    if not records:
        raise NoRecords("no records to reduce")
    model = records[0].model

    metric_values = {}
    for rec in records:
        for name, entry in rec.metrics.items():
            if "raw" in entry:
                metric_values.setdefault(name, []).append(entry["raw"])

    card_metrics = {}
    for name in ALL_METRICS:
        if name not in plan.metrics_enabled:
            continue
        if name == "fvd":
            continue
        if name in metric_values:
            vals = metric_values[name]
            raw = float(np.mean(vals))
            spec = plan.mapping_for(name)
            card_metrics[name] = {
                "raw": raw,
                "mapped": map_raw(raw, spec),
                "n": len(vals),
                "mapping": {"family": spec.family, "theta": spec.theta,
                            "direction": spec.direction,
                            "L": spec.L, "U": spec.U},
            }

    # dataset-level FVD from pooled clip features
    if "fvd" in plan.metrics_enabled:
        gen_pool = [r.clip_gen for r in records if r.clip_gen is not None]
        gt_pool = [r.clip_gt for r in records if r.clip_gt is not None]
        if gen_pool and gt_pool:
            gen_feats = np.concatenate(gen_pool, axis=0)
            gt_feats = np.concatenate(gt_pool, axis=0)
            try:
                raw = distribution.fvd(distribution.gaussian_stats(gt_feats),
                                       distribution.gaussian_stats(gen_feats))
                spec = plan.mapping_for("fvd")
                card_metrics["fvd"] = {
                    "raw": raw,
                    "mapped": map_raw(raw, spec),
                    "n": {"real": int(len(gt_feats)),
                          "gen": int(len(gen_feats))},
                    "mapping": {"family": spec.family, "theta": spec.theta,
                                "direction": spec.direction,
                                "L": spec.L, "U": spec.U},
                }
            except WowEvalError as exc:
                card_metrics["fvd"] = {"error": f"{type(exc).__name__}: {exc}"}

    group_scores = {
        g: [card_metrics[m]["mapped"] for m in members
            if m in card_metrics and "mapped" in card_metrics[m]]
        for g, members in METRIC_GROUPS.items()
    }
    group_means, overall = aggregate_overall(group_scores, plan.weights)

    sample_blocks = [
        {"sample_id": r.sample_id, "metrics": r.metrics, "inputs": r.inputs}
        for r in records
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "model": model,
        "averaging": "raw-mean-then-map",
        "n_samples": len(records),
        "metrics": card_metrics,
        "groups": group_means,
        "available_groups": sorted(g for g, v in group_scores.items() if v),
        "overall": overall,
        "samples": sample_blocks,
    }


def has_metric_errors(records) -> bool:
    return any("error" in entry
               for rec in records
               for entry in rec.metrics.values())
