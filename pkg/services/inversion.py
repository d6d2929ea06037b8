"""Iterative time-reversal reconstruction and its convergence bookkeeping."""

from dataclasses import dataclass, field, replace

import numpy as np
from tqdm import tqdm

from config import (
    DEFAULT_ITERATIONS,
    DEFAULT_LAMBDA,
    DEFAULT_SEED,
    DIVERGENCE_PATIENCE,
    DIVERGENCE_RATIO,
    SHOW_PROGRESS,
    get_logger,
)
from services.analysis import h10_norm
from services.errors import DivergenceError, NumericalError, ReconstructionError
from services.grid import DiscreteDomain
from services.operators import (
    PipelineConfig,
    check_lambda,
    error_operator,
    forward_exterior,
    modified_time_reversal,
)
from services.wave import ScalarField

logger = get_logger(__name__)
audit = get_logger("audit.inversion")


@dataclass(frozen=True)
class ReconConfig:
    """Relaxation, iteration budget and optional residual stopping threshold."""

    lam: float = DEFAULT_LAMBDA
    max_iter: int = DEFAULT_ITERATIONS
    tol: float = 0.0  # 0 disables the stopping rule
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        check_lambda(self.lam)
        if not isinstance(self.max_iter, (int, np.integer)) or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter!r}")
        if self.tol < 0:
            raise ValueError(f"Residual tolerance must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    residual_h10: float
    error_h10: float | None = None


@dataclass
class ConvergenceLog:
    """One record per completed iteration, iteration index strictly increasing."""

    records: list[IterationRecord] = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError(
                f"Iteration {record.iteration} does not follow {self.records[-1].iteration}"
            )
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def residuals(self) -> list[float]:
        return [r.residual_h10 for r in self.records]

    @property
    def errors(self) -> list[float | None]:
        return [r.error_h10 for r in self.records]

    @property
    def has_errors(self) -> bool:
        return any(r.error_h10 is not None for r in self.records)


@dataclass(frozen=True, eq=False)
class ReconResult:
    """Final iterate, the per-iteration log and the error of the first iterate f_0."""

    f_rec: ScalarField
    log: ConvergenceLog
    initial_error: float | None = None
    truth_norm: float | None = None

    @property
    def iterations(self) -> int:
        return len(self.log)

    def relative_errors(self) -> list[float]:
        """H1_0 errors of f_0, f_1, ... divided by the norm of the truth."""
        if self.initial_error is None or not self.truth_norm:
            return []
        return [e / self.truth_norm for e in [self.initial_error, *self.log.errors]]


class _DivergenceGuard:
    """Counts consecutive residual growth steps above the ratio threshold."""

    def __init__(self, ratio: float = DIVERGENCE_RATIO, patience: int = DIVERGENCE_PATIENCE):
        self.ratio = ratio
        self.patience = patience
        self.history: list[float] = []
        self.streak = 0

    def update(self, iteration: int, residual: float) -> None:
        if self.history and self.history[-1] > 0 and residual / self.history[-1] > self.ratio:
            self.streak += 1
        else:
            self.streak = 0
        self.history.append(residual)
        if self.streak >= self.patience:
            tail = self.history[-(self.patience + 1):]
            raise DivergenceError(
                f"Residual grew by more than {self.ratio}x for {self.patience} consecutive "
                f"iterations (last {tail[-1]:.3e} at iteration {iteration}); reduce lambda",
                iteration=iteration,
                residuals=tail,
            )


def _check_data(g: ScalarField, cfg: PipelineConfig) -> ScalarField:
    if not g.grid.same_as(cfg.grid):
        raise ValueError(
            f"Data grid (N={g.grid.N}, a={g.grid.a}) does not match the pipeline grid "
            f"(N={cfg.grid.N}, a={cfg.grid.a})"
        )
    return g.masked(cfg.dom.exterior)


def reconstruct(g: ScalarField, cfg: PipelineConfig, rc: ReconConfig,
                f_true: ScalarField | None = None,
                progress: bool = SHOW_PROGRESS) -> ReconResult:
    """f_0 = lam A g; f_j = f_{j-1} - lam A(W f_{j-1} - g).

    Record j holds the H1_0 residual of W f_j - g on J and, when ``f_true``
    is given, the H1_0 error of f_j over the closure of I.
    """
    data = _check_data(g, cfg)
    if f_true is not None and not f_true.grid.same_as(cfg.grid):
        raise ValueError("Ground truth and pipeline live on different grids")

    dom = cfg.dom
    truth = f_true.masked(dom.inside) if f_true is not None else None
    lam = rc.lam

    def error_of(f: ScalarField) -> float | None:
        return None if truth is None else h10_norm(f - truth, dom.closure)

    audit.info(
        "Reconstruction started",
        extra={"audit_data": {
            "event": "reconstruct_start",
            "lambda": lam,
            "max_iter": rc.max_iter,
            "tol": rc.tol,
            "N": cfg.grid.N,
            "T": cfg.solver.T,
            "with_truth": truth is not None,
        }},
    )

    iteration = 0
    try:
        f = modified_time_reversal(data, cfg) * lam
        residual = forward_exterior(f, cfg) - data
        initial_error = error_of(f)

        log = ConvergenceLog()
        guard = _DivergenceGuard()
        guard.update(0, h10_norm(residual, dom.exterior))

        for iteration in tqdm(range(1, rc.max_iter + 1), desc="reconstruct",
                              disable=not progress, leave=False):
            f = f - modified_time_reversal(residual, cfg) * lam
            residual = forward_exterior(f, cfg) - data
            res_norm = h10_norm(residual, dom.exterior)
            log.append(IterationRecord(iteration, res_norm, error_of(f)))
            logger.debug(f"[RECON] j={iteration} residual={res_norm:.6e}")
            guard.update(iteration, res_norm)
            if rc.tol > 0 and res_norm <= rc.tol:
                logger.info(f"[RECON] Residual {res_norm:.3e} <= tol {rc.tol} at iteration {iteration}")
                break
    except DivergenceError:
        logger.error(f"[RECON] Diverged at iteration {iteration}")
        raise
    except NumericalError as e:
        logger.error(f"[RECON] Numerical failure at iteration {iteration}: {e}")
        raise ReconstructionError(f"Iteration {iteration}: {e}", iteration=iteration) from e

    result = ReconResult(
        f_rec=f,
        log=log,
        initial_error=initial_error,
        truth_norm=h10_norm(truth, dom.closure) if truth is not None else None,
    )
    audit.info(
        "Reconstruction complete",
        extra={"audit_data": {
            "event": "reconstruct_complete",
            "iterations": result.iterations,
            "final_residual": log.residuals[-1],
            "final_error": log.errors[-1],
        }},
    )
    return result


def add_noise(g: ScalarField, noise_rel: float, seed: int, dom: DiscreteDomain) -> ScalarField:
    """Add N(0, sigma^2) noise on J, sigma = noise_rel * max|g| over J."""
    if not noise_rel >= 0:
        raise ValueError(f"Relative noise level must be >= 0, got {noise_rel}")
    if noise_rel == 0:
        return g.with_values(g.values.copy())
    peak = float(np.max(np.abs(g.values[dom.exterior]))) if dom.exterior.any() else 0.0
    sigma = noise_rel * peak
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(g.grid.shape)
    logger.info(f"[RECON] Adding noise: rel={noise_rel}, sigma={sigma:.4e}, seed={seed}")
    return g.with_values(g.values + np.where(dom.exterior, sigma * noise, 0.0))


def reconstruct_noisy(g: ScalarField, noise_rel: float, rc: ReconConfig, cfg: PipelineConfig,
                      f_true: ScalarField | None = None,
                      progress: bool = SHOW_PROGRESS) -> ReconResult:
    """Seeded noise on the data, then the full iteration budget with no stopping rule."""
    noisy = add_noise(_check_data(g, cfg), noise_rel, rc.seed, cfg.dom)
    return reconstruct(noisy, cfg, replace(rc, tol=0.0), f_true=f_true, progress=progress)


def neumann_partial_sum(g: ScalarField, j: int, lam: float, cfg: PipelineConfig) -> ScalarField:
    """sum_{k=0}^{j} K^k (lam A g), summed term by term."""
    if j < 0:
        raise ValueError(f"Partial sum index must be >= 0, got {j}")
    lam = check_lambda(lam)
    term = modified_time_reversal(_check_data(g, cfg), cfg) * lam
    total = term
    for _ in range(j):
        term = error_operator(term, lam, cfg)
        total = total + term
    return total
