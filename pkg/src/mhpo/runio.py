"""On-disk formats for a training run.

A run directory holds ``config.resolved``, ``log.csv``, ``summary.json``,
``ckpt.best``, ``ckpt.latest`` and ``incidents.log``. Floats are written with
``repr`` so every file reads back bit-exactly and repeated runs produce
identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .policy import PolicyParams
from .trainer import Checkpoint, RunLog, StepRecord

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "mean_reward", "loss", "grad_norm", "max_multiplier", "ratio_min",
               "ratio_med", "ratio_max", "degenerate_groups", "eval_success")
LOG_SCHEMA_VERSION = 1
CKPT_HEADER = "# policy-checkpoint v1"
RUN_FILES = ("config.resolved", "log.csv", "summary.json", "ckpt.best", "ckpt.latest", "incidents.log")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def write_log_csv(run: RunLog, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for rec in run.records:
            w.writerow([_fmt(getattr(rec, col)) for col in LOG_COLUMNS])


def read_log_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Column arrays keyed by name; unknown trailing columns are ignored.

    Empty ``eval_success`` cells become nan. Only complete lines are read, so a
    file that is still being appended to is safe to load.
    """
    with open(path, newline="") as fh:
        text = fh.read()
    if not text.endswith("\n"):
        text = text[: text.rfind("\n") + 1]
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ValueError(f"{path}: empty log")
    header = rows[0]
    missing = [c for c in LOG_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    idx = {c: header.index(c) for c in LOG_COLUMNS}
    cols = {c: [] for c in LOG_COLUMNS}
    for row in rows[1:]:
        for c in LOG_COLUMNS:
            cell = row[idx[c]]
            cols[c].append(float(cell) if cell != "" else math.nan)
    return {c: np.array(v) for c, v in cols.items()}


def records_from_columns(cols: dict[str, np.ndarray]) -> list[StepRecord]:
    out = []
    for i in range(len(cols["step"])):
        ev = cols["eval_success"][i]
        out.append(StepRecord(
            step=int(cols["step"][i]),
            mean_reward=float(cols["mean_reward"][i]),
            loss=float(cols["loss"][i]),
            grad_norm=float(cols["grad_norm"][i]),
            max_multiplier=float(cols["max_multiplier"][i]),
            ratio_min=float(cols["ratio_min"][i]),
            ratio_med=float(cols["ratio_med"][i]),
            ratio_max=float(cols["ratio_max"][i]),
            degenerate_groups=int(cols["degenerate_groups"][i]),
            eval_success=None if math.isnan(ev) else float(ev),
        ))
    return out


def write_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    p = ckpt.params
    lines = [
        CKPT_HEADER,
        f"step={ckpt.step}",
        f"eval_success={_fmt(ckpt.eval_success)}",
        f"vocab_size={p.vocab_size}",
        f"order={p.order}",
        f"n_prompts={p.n_prompts}",
        f"max_len={p.max_len}",
        f"shape={','.join(str(s) for s in p.logits.shape)}",
        "logits=" + ",".join(repr(float(v)) for v in p.logits.ravel()),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_checkpoint(path: str | Path) -> Checkpoint:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CKPT_HEADER:
        raise ValueError(f"{path}: not a checkpoint (expected header {CKPT_HEADER!r})")
    kv = dict(line.split("=", 1) for line in lines[1:] if line)
    shape = tuple(int(s) for s in kv["shape"].split(","))
    logits = np.array([float(v) for v in kv["logits"].split(",")]).reshape(shape)
    params = PolicyParams(int(kv["vocab_size"]), int(kv["order"]), int(kv["n_prompts"]),
                          int(kv["max_len"]), logits)
    return Checkpoint(int(kv["step"]), float(kv["eval_success"]), params)


def summary_dict(run: RunLog, resolved: dict) -> dict:
    return {
        "label": resolved["report"]["label"],
        "method": resolved["method"]["name"],
        "seed": resolved["train"]["seed"],
        "best": {"step": run.best.step, "eval_success": run.best.eval_success},
        "latest": {"step": run.latest.step, "eval_success": run.latest.eval_success},
        "delta": run.delta,
        "incidents": len(run.incidents),
        "steps": len(run.records),
        "log_schema_version": LOG_SCHEMA_VERSION,
        # toy hyperparameters are choices of this implementation, recorded with every run
        "assumptions": {
            "learning_rate": resolved["train"]["learning_rate"],
            "optimizer": resolved["train"]["optimizer"],
            "group_size": resolved["train"]["group_size"],
            "prompts_per_batch": resolved["train"]["prompts_per_batch"],
            "updates_per_rollout": resolved["train"]["updates_per_rollout"],
            "loss_reduction": "token mean per response, mean over responses and groups",
            "advantage_std": "population",
        },
    }


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_run(run_dir: str | Path, run: RunLog, resolved: dict, config_text: str) -> Path:
    d = Path(run_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.resolved").write_text(config_text)
    write_log_csv(run, d / "log.csv")
    write_json(summary_dict(run, resolved), d / "summary.json")
    write_checkpoint(run.best, d / "ckpt.best")
    write_checkpoint(run.latest, d / "ckpt.latest")
    (d / "incidents.log").write_text("".join(f"{line}\n" for line in run.incidents))
    return d


def load_run(run_dir: str | Path):
    """(summary, log columns) for a run directory, or None with a warning if incomplete."""
    d = Path(run_dir)
    try:
        summary = json.loads((d / "summary.json").read_text())
        cols = read_log_csv(d / "log.csv")
    except (OSError, ValueError, KeyError) as exc:
        log.warning("skipping run %s: %s", d, exc)
        return None
    return summary, cols


STRESS_COLUMNS = ("transform", "zero_fraction", "p999", "max", "mean_sq")


def write_stress_csv(rows, summary_path: str | Path, hist_path: str | Path) -> None:
    """Per-transform summary plus a long-form coefficient histogram."""
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STRESS_COLUMNS)
        for r in rows:
            w.writerow([r.transform, _fmt(r.zero_fraction), _fmt(r.p999), _fmt(r.max), _fmt(r.mean_sq)])
    with open(hist_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("transform", "bin_lo", "bin_hi", "count"))
        for r in rows:
            for lo, hi, n in r.histogram:
                w.writerow([r.transform, _fmt(lo), _fmt(hi), n])
