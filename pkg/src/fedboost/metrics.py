"""Regression metrics and the centralized baseline."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .gbt import Ensemble, TrainConfig, fit, predict_batch

MAPE_EPS = 1e-9
REPORT_COLUMNS = ("run_id", "round", "scope", "mae", "mse", "rmse", "mape", "r2", "n")


@dataclass(frozen=True)
class MetricsReport:
    """Error summary of one model on one dataset.

    ``mape`` (percent) is None when every target is zero; ``r2`` is None when
    the targets are constant.
    """

    mae: float
    mse: float
    rmse: float
    mape: float | None
    r2: float | None
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(predictions, targets) -> MetricsReport:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {y.size} targets")
    if y.size == 0:
        raise ValueError("cannot score an empty set")
    err = p - y
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err * err))
    keep = np.abs(y) > MAPE_EPS
    mape = float(np.mean(np.abs(err[keep]) / np.abs(y[keep])) * 100.0) if keep.any() else None
    if np.all(y == y[0]):
        r2 = None
    else:
        dev = y - y.mean()
        r2 = float(1.0 - np.sum(err * err) / np.sum(dev * dev))
    return MetricsReport(mae, mse, math.sqrt(mse), mape, r2, int(y.size))


def _mean(values: Sequence[float | None], weights: Sequence[float]) -> float | None:
    pairs = [(v, w) for v, w in zip(values, weights) if v is not None]
    if not pairs:
        return None
    total = sum(w for _, w in pairs)
    return sum(v * w for v, w in pairs) / total


def mean_report(reports: Sequence[MetricsReport], weighted: bool = False) -> MetricsReport:
    """Average client reports; unweighted unless ``weighted`` (by sample count).

    RMSE is recomputed from the averaged MSE so the report stays internally
    consistent.
    """
    if not reports:
        raise ValueError("no reports to average")
    w = [float(r.n) if weighted else 1.0 for r in reports]
    mse = _mean([r.mse for r in reports], w)
    return MetricsReport(
        mae=_mean([r.mae for r in reports], w),
        mse=mse,
        rmse=math.sqrt(mse),
        mape=_mean([r.mape for r in reports], w),
        r2=_mean([r.r2 for r in reports], w),
        n=sum(r.n for r in reports),
    )


def evaluate(ensemble: Ensemble, data) -> MetricsReport:
    return compute_metrics(predict_batch(ensemble, data.features), data.targets)


def train_centralized_baseline(train, test, config: TrainConfig,
                               base_score: float = 0.0) -> tuple[Ensemble, MetricsReport]:
    """Fit one model on pooled training data and score it on the pooled test set."""
    model = fit(train, config, base_score)
    return model, evaluate(model, test)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def report_row(run_id: str, round_: int, scope: str, report: MetricsReport) -> list[str]:
    return [run_id, str(round_), scope, *(_fmt(v) for v in
            (report.mae, report.mse, report.rmse, report.mape, report.r2, report.n))]


def write_report_csv(path, rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)


def read_report_csv(path) -> list[dict]:
    """Rows of a report CSV with metrics parsed to float (None when blank)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec = {"run_id": row["run_id"], "round": int(row["round"]), "scope": row["scope"],
                   "n": int(row["n"])}
            for key in ("mae", "mse", "rmse", "mape", "r2"):
                rec[key] = float(row[key]) if row[key] != "" else None
            out.append(rec)
    return out
