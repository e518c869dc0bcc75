"""Benchmark harness: sweeps retention ratio, stochastic-pass count, and
scoring-signal sets over generated scenes, writing one CSV row per
(seed, configuration) cell plus a JSON summary with per-cell mean/std.

A failing cell is recorded with its error message and the sweep continues;
only the run-level bookkeeping can abort a sweep.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .container import emit_manifest
from .memsim import PipelineConfig, RefineConfig, propagate
from .metrics import jf_score
from .router import PruneConfig
from .scenes import SceneConfig, VideoSequence, generate_scene

CSV_FIELDS = [
    "seed",
    "rho",
    "t_passes",
    "signals",
    "mean_j",
    "mean_f",
    "mean_jf",
    "fps",
    "attn_flops",
    "peak_mem_bytes",
    "clicks",
]


@dataclass(frozen=True)
class BenchConfig:
    rhos: tuple[float, ...] = (1.0, 0.5, 0.3, 0.1)
    t_passes: tuple[int, ...] = (4, 5, 6)
    signal_sets: tuple[str, ...] = ("text+uncertainty", "text")
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    pipeline: PipelineConfig = PipelineConfig(refine=RefineConfig(enabled=False))
    scene: SceneConfig = SceneConfig(n_frames=12)
    repeats: int = 1


@dataclass
class BenchCell:
    seed: int
    rho: float
    t_passes: int
    signals: str
    mean_j: float = float("nan")
    mean_f: float = float("nan")
    mean_jf: float = float("nan")
    fps: float = float("nan")
    attn_flops: int = 0
    peak_mem_bytes: int = 0
    clicks: int = 0
    error: str | None = None

    def row(self) -> dict:
        return {
            "seed": self.seed,
            "rho": self.rho,
            "t_passes": self.t_passes,
            "signals": self.signals,
            "mean_j": self.mean_j,
            "mean_f": self.mean_f,
            "mean_jf": self.mean_jf,
            "fps": self.fps,
            "attn_flops": self.attn_flops,
            "peak_mem_bytes": self.peak_mem_bytes,
            "clicks": self.clicks,
        }


def run_cell(
    video: VideoSequence,
    pipeline: PipelineConfig,
    seed: int,
    rho: float,
    t_passes: int,
    signals: str,
) -> BenchCell:
    cell = BenchCell(seed=seed, rho=rho, t_passes=t_passes, signals=signals)
    try:
        cfg = replace(
            pipeline,
            prune=PruneConfig(retention_ratio=rho),
            mc_passes=t_passes,
            signals=signals,
            base_seed=seed,
        )
        result = propagate(video, video.prompt, cfg)
        gts = [np.asarray(m, dtype=bool) for m in video.gt_masks]
        scores = jf_score([p.mask for p in result.masks], gts)
        cell.mean_j = scores["mean_J"]
        cell.mean_f = scores["mean_F"]
        cell.mean_jf = scores["mean_JF"]
        cell.fps = result.fps
        cell.attn_flops = result.ledger.flops_attention
        cell.peak_mem_bytes = result.ledger.peak_memory_bytes
        cell.clicks = len(result.clicks)
    except Exception as exc:  # record and keep sweeping
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


@dataclass
class BenchReport:
    cells: list[BenchCell] = field(default_factory=list)
    started: float = field(default_factory=time.time)

    def summary(self) -> dict:
        groups: dict[tuple, list[BenchCell]] = {}
        for c in self.cells:
            groups.setdefault((c.rho, c.t_passes, c.signals), []).append(c)
        out = {}
        for (rho, t, sig), cells in sorted(groups.items()):
            ok = [c for c in cells if c.error is None]
            key = f"rho={rho}|T={t}|signals={sig}"
            entry: dict = {"n_ok": len(ok), "n_failed": len(cells) - len(ok)}
            for name in ("mean_jf", "fps"):
                vals = [getattr(c, name) for c in ok]
                entry[name] = {
                    "mean": statistics.fmean(vals) if vals else None,
                    "std": statistics.stdev(vals) if len(vals) > 1 else 0.0,
                }
            entry["errors"] = [c.error for c in cells if c.error is not None]
            out[key] = entry
        return out


def run_benchmark(cfg: BenchConfig = BenchConfig()) -> BenchReport:
    """One scene per seed; every (rho, T, signals) cell runs on each."""
    report = BenchReport()
    for seed in cfg.seeds:
        video = generate_scene(replace(cfg.scene, seed=cfg.scene.seed + seed))
        for rho in cfg.rhos:
            for t in cfg.t_passes:
                for sig in cfg.signal_sets:
                    report.cells.append(
                        run_cell(video, cfg.pipeline, seed, rho, t, sig)
                    )
    return report


def write_csv(report: BenchReport, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for cell in report.cells:
            writer.writerow(cell.row())


def write_summary(report: BenchReport, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(emit_manifest(report.summary()))


def summary_json(report: BenchReport) -> str:
    return json.dumps(report.summary(), indent=2, sort_keys=True)
