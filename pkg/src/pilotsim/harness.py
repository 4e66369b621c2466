"""Experiment driver: sweeps, Monte-Carlo drops, CSV/JSON outputs.

Seeding discipline: drop seeds depend only on (master_seed, sweep index,
drop index), so every scheme scores the identical drop and adding schemes
never perturbs the geometry. Scheme-level randomness gets its own derived
seed per (sweep, drop, scheme). Rows are sorted deterministically and files
are written via write-then-rename, so reruns are byte-identical regardless
of worker count.
"""

from __future__ import annotations

import dataclasses
import json
import os
import subprocess
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .assignment import SCHEME_IDS, SchemeConfig, assign_all
from .network import NetworkConfig, associate_aps, generate_drop, normalize_powers
from .performance import evaluate

__all__ = [
    "SCHEME_CODE",
    "SWEEP_FIELDS",
    "ExperimentSpec",
    "ResultRow",
    "derive_seed",
    "run_experiment",
    "emit_cdf",
    "emit_plot_script",
]

SCHEME_CODE = {"eem": 0, "dpb": 1, "random": 2, "scalable": 3}

SWEEP_FIELDS = {
    "ue_count": "num_ues",
    "pilot_length": "pilot_length",
    "assoc_threshold": "assoc_threshold",
    "none": None,
}

_CSV_HEADER = "scheme,sweep_value,drop_seed,sum_se,p5_se,p10_se,mean_se"


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from integer parts, order-sensitive."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    config: NetworkConfig
    sweep: str
    sweep_values: tuple
    schemes: tuple
    num_drops: int
    master_seed: int
    output_dir: str
    name: str = "experiment"
    dpb_s: int = 3
    dpb_delta: float = 0.1
    tie_rule: str = "seeded_random"
    workers: int = 1
    store_per_user: bool = False

    def __post_init__(self):
        if self.sweep not in SWEEP_FIELDS:
            raise ValueError(f"unknown sweep {self.sweep!r}")
        if self.num_drops < 1 or self.workers < 1:
            raise ValueError("num_drops and workers must be >= 1")
        unknown = [s for s in self.schemes if s not in SCHEME_IDS]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}")
        if not self.schemes or not self.sweep_values:
            raise ValueError("need at least one scheme and one sweep value")
        for v in self.sweep_values:
            self.config_for(v)  # NetworkConfig validates each swept value

    def config_for(self, value) -> NetworkConfig:
        field = SWEEP_FIELDS[self.sweep]
        if field is None:
            return self.config
        return replace(self.config, **{field: value})


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    sweep_value: float
    drop_seed: int
    sum_se: float
    p5_se: float
    p10_se: float
    mean_se: float
    per_user: np.ndarray | None = None

    def csv_line(self) -> str:
        return (f"{self.scheme},{self.sweep_value!r},{self.drop_seed},"
                f"{self.sum_se!r},{self.p5_se!r},{self.p10_se!r},{self.mean_se!r}")


def _run_cell(args) -> list:
    """All schemes on one (sweep value, drop) cell; shared geometry."""
    spec, sweep_idx, drop_idx = args
    value = spec.sweep_values[sweep_idx]
    cfg = spec.config_for(value)
    drop_seed = derive_seed(spec.master_seed, sweep_idx, drop_idx)
    real = generate_drop(cfg, drop_seed)
    powers = normalize_powers(cfg)
    assoc = associate_aps(real, cfg.assoc_threshold)
    rows = []
    for scheme_id in spec.schemes:
        run_seed = derive_seed(spec.master_seed, sweep_idx, drop_idx,
                               100 + SCHEME_CODE[scheme_id])
        scheme = SchemeConfig(scheme_id, spec.dpb_s, spec.dpb_delta,
                              spec.tie_rule, run_seed)
        assignment = assign_all(scheme, real, assoc, powers, cfg.pilot_length)
        report = evaluate(real, assoc, assignment, powers, cfg)
        rows.append(ResultRow(
            scheme_id, value, drop_seed, report.sum_se,
            report.percentile(5.0), report.percentile(10.0),
            float(report.se.mean()),
            report.per_user_cdf.copy() if spec.store_per_user else None))
    return rows


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _aggregate(rows) -> str:
    lines = ["scheme,sweep_value,num_drops,mean_sum_se,stderr_sum_se,"
             "mean_p5_se,mean_p10_se,mean_user_se"]
    keys = sorted({(r.sweep_value, r.scheme) for r in rows})
    for value, scheme in keys:
        group = [r for r in rows if r.sweep_value == value and r.scheme == scheme]
        sums = np.array([r.sum_se for r in group])
        stderr = float(sums.std(ddof=1) / np.sqrt(sums.size)) if sums.size > 1 else 0.0
        lines.append(
            f"{scheme},{value!r},{sums.size},{float(sums.mean())!r},{stderr!r},"
            f"{float(np.mean([r.p5_se for r in group]))!r},"
            f"{float(np.mean([r.p10_se for r in group]))!r},"
            f"{float(np.mean([r.mean_se for r in group]))!r}")
    return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec):
    """Execute the full grid; returns (rows, {kind: path}).

    Row order in memory and on disk is (sweep_value, drop_seed, scheme),
    independent of evaluation order and of the worker count.
    """
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [(spec, si, di)
             for si in range(len(spec.sweep_values))
             for di in range(spec.num_drops)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            nested = list(pool.map(_run_cell, cells))
    else:
        nested = [_run_cell(c) for c in cells]
    rows = sorted((r for cell in nested for r in cell),
                  key=lambda r: (r.sweep_value, r.drop_seed, r.scheme))

    results_path = out_dir / f"{spec.name}_results.csv"
    body = "\n".join([_CSV_HEADER] + [r.csv_line() for r in rows]) + "\n"
    _write_atomic(results_path, body)

    agg_path = out_dir / f"{spec.name}_aggregates.csv"
    _write_atomic(agg_path, _aggregate(rows))

    meta = {
        "config": dataclasses.asdict(spec.config),
        "sweep": spec.sweep,
        "sweep_values": list(spec.sweep_values),
        "schemes": list(spec.schemes),
        "num_drops": spec.num_drops,
        "master_seed": spec.master_seed,
        "dpb_s": spec.dpb_s,
        "dpb_delta": spec.dpb_delta,
        "tie_rule": spec.tie_rule,
        "git": _git_describe(),
    }
    meta_path = out_dir / f"{spec.name}_meta.json"
    _write_atomic(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")

    return rows, {"results": results_path, "aggregates": agg_path,
                  "metadata": meta_path}


def emit_cdf(rows, scheme: str, out_path) -> Path:
    """Pool per-user SE across drops for one scheme and write the CDF.

    Ordinates follow the midpoint convention (k - 0.5)/n over the sorted
    pooled sample.
    """
    detail = [r.per_user for r in rows if r.scheme == scheme]
    if not detail:
        raise ValueError(f"no rows for scheme {scheme!r}")
    if any(d is None for d in detail):
        raise ValueError("rows lack per-user detail; rerun with store_per_user")
    pooled = np.sort(np.concatenate(detail))
    n = pooled.size
    ordinates = (np.arange(1, n + 1) - 0.5) / n
    lines = ["se,cdf"]
    lines += [f"{float(se)!r},{float(c)!r}" for se, c in zip(pooled, ordinates)]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_path, "\n".join(lines) + "\n")
    return out_path


_PLOT_TEMPLATE = '''#!/usr/bin/env python
"""Generated plotting script; reads harness CSVs, embeds no data."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

SWEEP_FILES = {sweep_files!r}
CDF_FILES = {cdf_files!r}


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


fig, axes = plt.subplots(1, max(1, bool(SWEEP_FILES) + bool(CDF_FILES)),
                         figsize=(6 * max(1, bool(SWEEP_FILES) + bool(CDF_FILES)), 4),
                         squeeze=False)
col = 0
if SWEEP_FILES:
    ax = axes[0][col]
    col += 1
    for path in SWEEP_FILES:
        series = defaultdict(list)
        for row in read_rows(path):
            series[row["scheme"]].append(
                (float(row["sweep_value"]), float(row["mean_sum_se"]),
                 float(row["stderr_sum_se"])))
        for scheme, pts in sorted(series.items()):
            pts.sort()
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=scheme)
    ax.set_xlabel("sweep value")
    ax.set_ylabel("mean sum SE (bits/s/Hz)")
    ax.legend()
    ax.grid(True, alpha=0.3)
if CDF_FILES:
    ax = axes[0][col]
    for path in CDF_FILES:
        rows = read_rows(path)
        ax.plot([float(r["se"]) for r in rows], [float(r["cdf"]) for r in rows],
                label=path.rsplit("_", 1)[-1].removesuffix(".csv"))
    ax.set_xlabel("per-user SE (bits/s/Hz)")
    ax.set_ylabel("CDF")
    ax.legend()
    ax.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig({out_png!r}, dpi=150)
print("wrote", {out_png!r})
'''


def emit_plot_script(result_files, out_path) -> Path:
    """Write a self-contained plotting script over existing result files.

    Aggregates CSVs become sweep lines (one per scheme); CDF CSVs become
    distribution curves. Missing or unrecognized inputs fail immediately.
    """
    sweep_files, cdf_files = [], []
    for f in result_files:
        p = Path(f)
        if not p.is_file():
            raise FileNotFoundError(f"result file not found: {p}")
        if "_cdf_" in p.name:
            cdf_files.append(str(p))
        elif p.name.endswith("_aggregates.csv"):
            sweep_files.append(str(p))
        else:
            raise ValueError(f"cannot plot {p.name}; pass aggregates or cdf files")
    out_path = Path(out_path)
    script = _PLOT_TEMPLATE.format(sweep_files=sweep_files, cdf_files=cdf_files,
                                   out_png=str(out_path.with_suffix(".png")))
    _write_atomic(out_path, script)
    return out_path
