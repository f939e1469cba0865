"""Metrics rows and their CSV form.

The header is fixed; floats are written with ``repr`` so that a rerun with the
same config and seed reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import io
import math
import os

FIELDS = ("phase", "iteration", "task_id", "mean_episode_return", "mean_episode_cost", "J", "J_C",
          "lambda", "eta", "kl", "wall_clock_s", "seed")
PHASES = ("meta_train", "fine_tune")
HEADER = ",".join(FIELDS) + "\n"
_FLOATS = ("mean_episode_return", "mean_episode_cost", "J", "J_C", "lambda", "eta", "kl", "wall_clock_s")


class MetricsParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def make_row(raw: dict, seed: int, wall_clock_s: float = 0.0) -> dict:
    """Metrics row from a training/fine-tuning record (``lam`` becomes ``lambda``)."""
    row = {
        "phase": raw["phase"], "iteration": int(raw["iteration"]), "task_id": str(raw["task_id"]),
        "mean_episode_return": float(raw["mean_episode_return"]),
        "mean_episode_cost": float(raw["mean_episode_cost"]),
        "J": float(raw["J"]), "J_C": float(raw["J_C"]),
        "lambda": float(raw.get("lambda", raw.get("lam", 0.0))), "eta": float(raw["eta"]),
        "kl": float(raw["kl"]), "wall_clock_s": float(wall_clock_s), "seed": int(seed),
    }
    if row["phase"] not in PHASES:
        raise ValueError(f"unknown phase {row['phase']!r}")
    return row


def _cell(name, value):
    return repr(float(value)) if name in _FLOATS else str(value)


def format_rows(rows) -> str:
    return "".join(",".join(_cell(k, r[k]) for k in FIELDS) + "\n" for r in rows)


def append_rows(path, rows):
    """Append rows, writing the header first when the file is new or empty."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        if new:
            f.write(HEADER)
        f.write(format_rows(rows))


def parse_csv(text: str) -> list:
    lines = text.split("\n")
    if not lines or lines[0] != HEADER.rstrip("\n"):
        raise MetricsParseError(1, f"header must be {HEADER.strip()!r}")
    rows = []
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    for lineno, cells in enumerate(reader, 2):
        if not cells:
            continue
        if len(cells) != len(FIELDS):
            raise MetricsParseError(lineno, f"expected {len(FIELDS)} fields, got {len(cells)}")
        row = dict(zip(FIELDS, cells))
        try:
            row["iteration"] = int(row["iteration"])
            row["seed"] = int(row["seed"])
            for k in _FLOATS:
                row[k] = float(row[k])
        except ValueError as exc:
            raise MetricsParseError(lineno, str(exc)) from None
        if row["phase"] not in PHASES:
            raise MetricsParseError(lineno, f"unknown phase {row['phase']!r}")
        rows.append(row)
    return rows


def read_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_csv(f.read())


def aggregate(rows, phase="fine_tune", task_id="agg"):
    """Per ``(seed, iteration)`` mean and population-std rows over the task rows.

    Returns ``(mean_rows, std_rows)``; ``std_rows`` carry ``task_id + "_std"``.
    """
    groups = {}
    for r in rows:
        if r["task_id"] in (task_id, task_id + "_std"):
            continue
        groups.setdefault((r["seed"], r["iteration"]), []).append(r)
    means, stds = [], []
    for (seed, it), grp in sorted(groups.items()):
        m = {"phase": phase, "iteration": it, "task_id": task_id, "seed": seed}
        s = dict(m, task_id=task_id + "_std")
        for k in _FLOATS:
            vals = [g[k] for g in grp]
            mu = math.fsum(vals) / len(vals)
            m[k] = mu
            s[k] = math.sqrt(math.fsum((v - mu) ** 2 for v in vals) / len(vals))
        means.append(m)
        stds.append(s)
    return means, stds
