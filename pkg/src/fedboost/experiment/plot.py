"""Per-metric round curves averaged over seeds, as SVG plus the CSV behind each."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

from ..metrics import read_report_csv

METRICS = ("mae", "mse", "rmse", "mape", "r2")
LABELS = {"mae": "MAE (W)", "mse": "MSE (W²)", "rmse": "RMSE (W)", "mape": "MAPE (%)", "r2": "R²"}


class MissingRunFilesError(FileNotFoundError):
    def __init__(self, files):
        self.files = [str(f) for f in files]
        super().__init__("missing run files: " + ", ".join(self.files))


def _mean(values):
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else None


def _seed_dirs(run_dir: Path) -> list[Path]:
    dirs = sorted(p for p in run_dir.glob("seed-*") if p.is_dir())
    missing = [d / "rounds.csv" for d in dirs if not (d / "rounds.csv").is_file()]
    if not dirs:
        missing = [run_dir / "seed-<n>" / "rounds.csv"]
    if missing:
        raise MissingRunFilesError(missing)
    return dirs


def averaged_tables(run_dir) -> dict[str, tuple[list[str], list[list]]]:
    """For each metric: (series names, rows of [round, value per series]) averaged over seeds."""
    run_dir = Path(run_dir)
    dirs = _seed_dirs(run_dir)
    # metric -> (round, scope) -> per-seed values
    cells = {m: defaultdict(list) for m in METRICS}
    baseline = {m: [] for m in METRICS}
    scopes, rounds = [], set()
    for d in dirs:
        for rec in read_report_csv(d / "rounds.csv"):
            if rec["scope"] not in scopes:
                scopes.append(rec["scope"])
            rounds.add(rec["round"])
            for m in METRICS:
                cells[m][rec["round"], rec["scope"]].append(rec[m])
        if (d / "baseline.csv").is_file():
            for rec in read_report_csv(d / "baseline.csv"):
                for m in METRICS:
                    baseline[m].append(rec[m])
    clients = sorted((s for s in scopes if s.startswith("client-")), key=lambda s: int(s.split("-")[1]))
    series = clients + [s for s in scopes if not s.startswith("client-")]
    has_baseline = any(baseline[m] for m in METRICS)
    tables = {}
    for m in METRICS:
        names = series + (["baseline"] if has_baseline else [])
        rows = []
        base = _mean(baseline[m])
        for r in sorted(rounds):
            row = [r] + [_mean(cells[m].get((r, s), [])) for s in series]
            if has_baseline:
                row.append(base)
            rows.append(row)
        tables[m] = (names, rows)
    return tables


def write_table(path: Path, names, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", *names])
        for row in rows:
            writer.writerow([row[0], *("" if v is None else repr(float(v)) for v in row[1:])])


def plot_run(run_dir, out_dir=None) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "figures"
    tables = averaged_tables(run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "fedboost", "svg.fonttype": "none"}):
        for m, (names, rows) in tables.items():
            write_table(out_dir / f"{m}.csv", names, rows)
            fig, ax = plt.subplots(figsize=(6, 4))
            xs = [r[0] for r in rows]
            for j, name in enumerate(names, start=1):
                ys = [r[j] for r in rows]
                if all(v is None for v in ys):
                    continue
                ys = [float("nan") if v is None else v for v in ys]
                if name == "baseline":
                    ax.axhline(ys[0], color="black", linestyle="--", label="centralized baseline")
                elif name == "aggregate":
                    ax.plot(xs, ys, marker="o", linewidth=2.2, label="aggregated")
                else:
                    ax.plot(xs, ys, marker=".", linewidth=1, alpha=0.8, label=name)
            ax.set_xlabel("round")
            ax.set_ylabel(LABELS[m])
            ax.set_xticks(xs)
            ax.grid(alpha=0.3)
            ax.legend(fontsize="small")
            fig.tight_layout()
            fig.savefig(out_dir / f"{m}.svg", format="svg", metadata={"Date": None})
            plt.close(fig)
            written += [out_dir / f"{m}.svg", out_dir / f"{m}.csv"]
    return written
