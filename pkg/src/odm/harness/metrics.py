"""Append-only metrics CSV with a fixed column set."""

from __future__ import annotations

import csv

COLUMNS = ("phase", "course_iteration", "loss_total", "loss_imitation",
           "loss_prediction", "loss_actor", "loss_critic", "mean_return",
           "mean_length", "wall_seconds", "seed")
WALL_CLOCK_COLUMNS = ("wall_seconds",)


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int):
        return str(v)
    return "%.17g" % float(v)


class MetricsWriter:
    """One CSV per run; a row is written and flushed per training step."""

    def __init__(self, path, seed: int):
        self.path = path
        self.seed = seed
        self._fh = open(path, "w", newline="")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(COLUMNS)
        self._fh.flush()

    def row(self, phase: str, step, **values) -> None:
        unknown = set(values) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown metric columns {sorted(unknown)}")
        rec = {k: "" for k in COLUMNS}
        rec.update(values)
        rec["phase"] = phase
        rec["course_iteration"] = step
        rec["seed"] = self.seed
        self._csv.writerow([_fmt(rec[k]) for k in COLUMNS])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_metrics(path) -> list:
    """Rows as dicts of strings (empty string = not applicable)."""
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def rows_without_wall_clock(path) -> list:
    """Determinism view: every cell except the wall-clock columns."""
    out = []
    for row in read_metrics(path):
        out.append(tuple(v for k, v in row.items()
                         if k not in WALL_CLOCK_COLUMNS))
    return out
