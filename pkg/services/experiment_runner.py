"""Experiment plans and the runner that executes their cells."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Callable

from tqdm import tqdm

from config import DEFAULT_NOISE, EXPERIMENT_WORKERS, SHOW_PROGRESS, get_logger

logger = get_logger(__name__)
audit = get_logger("audit.experiment_runner")


class CellStatus(str, Enum):
    """Lifecycle of one experiment cell."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ExperimentCell:
    """One (phantom, speed, noise) reconstruction inside an experiment."""
    cell_id: str
    phantom: str
    speed: str
    noise: float
    lam: float
    T: float
    iterations: int
    status: CellStatus = CellStatus.PENDING
    metrics: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    error: str | None = None
    started_at: datetime | None = None
    completed_at: datetime | None = None

    @property
    def elapsed_seconds(self) -> float | None:
        if self.started_at is None or self.completed_at is None:
            return None
        return (self.completed_at - self.started_at).total_seconds()


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    description: str
    phantoms: tuple[str, ...]
    speeds: tuple[str, ...]
    noise_levels: tuple[float, ...]
    lam: float
    T: float
    iterations: int

    def cells(self, iterations: int | None = None) -> list[ExperimentCell]:
        """Cells in phantom x speed x noise order with stable ids."""
        n_iter = iterations if iterations is not None else self.iterations
        out = []
        for speed in self.speeds:
            for phantom in self.phantoms:
                for noise in self.noise_levels:
                    tag = "exact" if noise == 0 else f"noise{noise:g}"
                    out.append(ExperimentCell(
                        cell_id=f"{phantom}_{speed}_{tag}",
                        phantom=phantom,
                        speed=speed,
                        noise=noise,
                        lam=self.lam,
                        T=self.T,
                        iterations=n_iter,
                    ))
        return out


EXPERIMENTS = {
    "constant": ExperimentPlan(
        name="constant",
        description="Constant speed, lambda = 2, 80 iterations, all three phantoms",
        phantoms=("a", "b", "c"), speeds=("I",), noise_levels=(0.0,),
        lam=2.0, T=2.0, iterations=80,
    ),
    "variable": ExperimentPlan(
        name="variable",
        description="Smooth phantom at the two non-trapping variable speeds, lambda = 1/2",
        phantoms=("a",), speeds=("II", "III"), noise_levels=(0.0,),
        lam=0.5, T=2.0, iterations=80,
    ),
    "noisy": ExperimentPlan(
        name="noisy",
        description="Exact versus 2% noisy data at speed III, lambda = 1/2, T = 4",
        phantoms=("a",), speeds=("III",), noise_levels=(0.0, DEFAULT_NOISE),
        lam=0.5, T=4.0, iterations=80,
    ),
    "trapping": ExperimentPlan(
        name="trapping",
        description="Trapping speed IV with 2% noise, lambda = 1/2, T = 2, all three phantoms",
        phantoms=("a", "b", "c"), speeds=("IV",), noise_levels=(DEFAULT_NOISE,),
        lam=0.5, T=2.0, iterations=80,
    ),
}


def get_plan(name: str) -> ExperimentPlan:
    if name not in EXPERIMENTS:
        raise ValueError(f"Unknown experiment '{name}'; choose from {', '.join(sorted(EXPERIMENTS))}")
    return EXPERIMENTS[name]


class ExperimentRunner:
    """Runs cells through ``execute`` and records status, metrics and failures.

    ``execute`` returns (metrics, artifacts) for a cell. A failing cell is
    marked FAILED and the remaining cells still run.
    """

    def __init__(self, execute: Callable[[ExperimentCell], tuple[dict, dict]],
                 workers: int = EXPERIMENT_WORKERS, progress: bool = SHOW_PROGRESS):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self._execute = execute
        self.workers = workers
        self.progress = progress

    def run(self, cells: list[ExperimentCell]) -> list[ExperimentCell]:
        logger.info(f"[EXPERIMENT] Running {len(cells)} cells with {self.workers} worker(s)")
        bar = tqdm(total=len(cells), desc="experiment", disable=not self.progress)
        with bar:
            if self.workers > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    for _ in pool.map(self._run_cell, cells):
                        bar.update()
            else:
                for cell in cells:
                    self._run_cell(cell)
                    bar.update()

        failed = [c.cell_id for c in cells if c.status == CellStatus.FAILED]
        if failed:
            logger.warning(f"[EXPERIMENT] {len(failed)} cell(s) failed: {', '.join(failed)}")
        return cells

    def _run_cell(self, cell: ExperimentCell) -> ExperimentCell:
        cell.status = CellStatus.RUNNING
        cell.started_at = datetime.now(timezone.utc)
        logger.info(f"[EXPERIMENT] Cell {cell.cell_id} started: speed={cell.speed}, "
                    f"phantom={cell.phantom}, noise={cell.noise}, lambda={cell.lam}, T={cell.T}")
        try:
            cell.metrics, cell.artifacts = self._execute(cell)
            cell.status = CellStatus.COMPLETED
        except Exception as e:
            logger.error(f"[EXPERIMENT] Cell {cell.cell_id} failed: {e}")
            cell.status = CellStatus.FAILED
            cell.error = f"{type(e).__name__}: {e}"
        finally:
            cell.completed_at = datetime.now(timezone.utc)
            audit.info(
                "Experiment cell completed",
                extra={"audit_data": {
                    "event": "experiment_cell_complete",
                    "cell_id": cell.cell_id,
                    "status": cell.status.value,
                    "elapsed_seconds": cell.elapsed_seconds,
                    "metrics": cell.metrics,
                    "error": cell.error,
                }},
            )
        return cell
