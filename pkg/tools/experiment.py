"""Batch reproduction of the reconstruction experiments."""

import csv
import functools
import os

from config import DEFAULT_CFL, DEFAULT_N, DEFAULT_OVERSAMPLE, DEFAULT_SEED, EXPERIMENT_WORKERS, get_logger
from services.analysis import compare, convergence_rate
from services.experiment_runner import CellStatus, ExperimentCell, ExperimentRunner, get_plan
from services.field_io import write_field, write_log, write_pgm
from services.inversion import ReconConfig, reconstruct_noisy
from services.phantoms import get_phantom, get_speed, load_registry, make_phantom, pipeline_for, simulate_data
from tools.manifest import RunManifest

logger = get_logger(__name__)

SUMMARY_COLUMNS = (
    "cell_id", "phantom", "speed", "noise", "lambda", "T", "iterations",
    "status", "l2_rel", "h10_rel", "max_abs", "rate", "error",
)


def _execute_cell(cell: ExperimentCell, *, N: int, oversample: int, seed: int, cfl: float,
                  out_dir: str) -> tuple[dict, dict]:
    cfg = pipeline_for(N, cell.T, cell.speed, cfl=cfl)
    phantom_spec = get_phantom(cell.phantom)
    f_true = make_phantom(phantom_spec, cfg.grid, cfg.dom)
    data = simulate_data(phantom_spec, get_speed(cell.speed), cfg, oversample=oversample)

    rc = ReconConfig(lam=cell.lam, max_iter=cell.iterations, seed=seed)
    result = reconstruct_noisy(data, cell.noise, rc, cfg, f_true=f_true)
    report = compare(result.f_rec, f_true, cfg.dom)

    base = os.path.join(out_dir, cell.cell_id)
    artifacts = {
        "reconstruction": f"{base}_rec.ff",
        "reconstruction_image": f"{base}_rec.pgm",
        "error_image": f"{base}_error.pgm",
        "log": f"{base}_log.csv",
    }
    write_field(result.f_rec, artifacts["reconstruction"])
    write_pgm(result.f_rec, artifacts["reconstruction_image"], clip=(0.0, 1.0))
    write_pgm(report.pointwise, artifacts["error_image"])
    write_log(result.log, artifacts["log"])

    metrics = report.as_dict()
    metrics["rate"] = convergence_rate(result.relative_errors())
    return metrics, artifacts


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_summary(cells: list[ExperimentCell], path: str) -> None:
    """One row per cell with its final errors and observed convergence rate."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for cell in cells:
            m = cell.metrics
            writer.writerow([_fmt(v) for v in (
                cell.cell_id, cell.phantom, cell.speed, cell.noise, cell.lam, cell.T,
                cell.iterations, cell.status.value, m.get("l2_rel"), m.get("h10_rel"),
                m.get("max_abs"), m.get("rate"), cell.error,
            )])


def run_experiment(*, name: str, out_dir: str, N: int = DEFAULT_N, iterations: int | None = None,
                   oversample: int = DEFAULT_OVERSAMPLE, seed: int = DEFAULT_SEED,
                   cfl: float = DEFAULT_CFL, workers: int = EXPERIMENT_WORKERS) -> RunManifest:
    """Run every cell of the named plan into ``out_dir`` and write summary.csv."""
    plan = get_plan(name)
    cells = plan.cells(iterations)
    os.makedirs(out_dir, exist_ok=True)

    execute = functools.partial(_execute_cell, N=N, oversample=oversample, seed=seed,
                                cfl=cfl, out_dir=out_dir)
    ExperimentRunner(execute, workers=workers).run(cells)

    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary(cells, summary_path)

    artifacts = {"summary": summary_path}
    results = {"cells": {}, "failed": []}
    for cell in cells:
        for key, path in cell.artifacts.items():
            artifacts[f"{cell.cell_id}.{key}"] = path
        results["cells"][cell.cell_id] = {"status": cell.status.value, **cell.metrics}
        if cell.status == CellStatus.FAILED:
            results["failed"].append(cell.cell_id)

    manifest = RunManifest(
        command="experiment",
        params={
            "name": name,
            "out_dir": out_dir,
            "N": N,
            "iterations": plan.iterations if iterations is None else iterations,
            "oversample": oversample,
            "seed": seed,
            "cfl": cfl,
            "workers": workers,
        },
        artifacts=artifacts,
        results=results,
        registry_version=load_registry().version,
    )
    manifest.save(os.path.join(out_dir, "manifest.json"))
    logger.info(f"[EXPERIMENT] {plan.name}: {len(cells) - len(results['failed'])}/{len(cells)} cells completed")
    return manifest
