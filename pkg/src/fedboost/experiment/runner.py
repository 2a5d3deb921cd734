"""Runs the centralized baseline and one federation per seed into a run directory.

Layout::

    <out>/manifest.json
    <out>/seed-<s>/rounds.csv          per-round client and aggregate scores
    <out>/seed-<s>/final.csv           final model on each client's test split
    <out>/seed-<s>/model.json
    <out>/seed-<s>/baseline.csv        when the baseline is enabled
    <out>/seed-<s>/baseline_model.json
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import shutil
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import __version__
from .. import data as D
from ..federation import run_federation
from ..gbt import serialize
from ..metrics import evaluate, mean_report, report_row, train_centralized_baseline, write_report_csv
from .spec import ExperimentSpec, SpecError, load_dataset

log = logging.getLogger(__name__)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_seed(spec: ExperimentSpec, dataset: D.Dataset, seed: int, out: Path) -> None:
    out.mkdir(parents=True)
    splits = D.partition(dataset, spec.partition_plan(seed))
    fed = spec.fed_config(seed)
    run_id = f"seed-{seed}"

    if spec.baseline:
        train = D.concat([s.train for s in splits])
        test = D.concat([s.test for s in splits])
        model, report = train_centralized_baseline(train, test, fed.train_config, spec.base_score)
        (out / "baseline_model.json").write_bytes(serialize(model))
        write_report_csv(out / "baseline.csv", [report_row(f"baseline-{run_id}", 0, "baseline", report)])
        log.info("%s baseline MAE %.4f", run_id, report.mae)

    result = run_federation(fed, splits, model_path=out / "model.json")
    rows = []
    for entry in result.logs:
        for k, rep in enumerate(entry.client_reports):
            rows.append(report_row(run_id, entry.round, f"client-{k}", rep))
        rows.append(report_row(run_id, entry.round, "aggregate", entry.aggregate))
    write_report_csv(out / "rounds.csv", rows)

    final = [evaluate(result.model, s.test) for s in splits]
    last = spec.num_rounds
    rows = [report_row(run_id, last, f"client-{k}", rep) for k, rep in enumerate(final)]
    rows.append(report_row(run_id, last, "aggregate", mean_report(final, weighted=spec.weighted_aggregate)))
    pooled = D.concat([s.test for s in splits])
    rows.append(report_row(run_id, last, "pooled", evaluate(result.model, pooled)))
    write_report_csv(out / "final.csv", rows)


def run_experiment(spec: ExperimentSpec, out_dir, transport: str | None = None,
                   seeds: tuple[int, ...] | None = None) -> Path:
    """Execute every seed; the run directory only appears if all of them succeed."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise SpecError(f"output directory {out_dir} already exists and is not empty")
    if transport is not None:
        spec = replace(spec, transport=transport)
    if seeds is not None:
        spec = replace(spec, seeds=tuple(seeds))
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=f".{out_dir.name}.partial-"))
    try:
        dataset = load_dataset(spec)
        for seed in spec.seeds:
            run_seed(spec, dataset, seed, staging / f"seed-{seed}")
        files = sorted(p for p in staging.rglob("*") if p.is_file())
        manifest = {
            "fedboost_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "config_sha256": spec.source_sha256,
            "seeds": list(spec.seeds),
            "num_clients": spec.num_clients,
            "num_rounds": spec.num_rounds,
            "transport": spec.transport,
            "baseline": spec.baseline,
            "equivalence_mode": spec.equivalence_mode,
            "files": {p.relative_to(staging).as_posix(): _sha256(p) for p in files},
        }
        (staging / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if out_dir.exists():
            out_dir.rmdir()
        staging.rename(out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return out_dir
