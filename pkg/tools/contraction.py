"""Empirical contraction check of the error operator."""

from config import DEFAULT_CFL, DEFAULT_N, DEFAULT_SEED, EXPERIMENT_WORKERS, get_logger
from services.operators import ContractionEstimate, check_lambda, estimate_contraction
from services.phantoms import pipeline_for

logger = get_logger(__name__)


def run_contraction(*, lam: float, trials: int, speed: str, T: float, N: int = DEFAULT_N,
                    seed: int = DEFAULT_SEED, a: float | None = None, cfl: float = DEFAULT_CFL,
                    workers: int = EXPERIMENT_WORKERS) -> ContractionEstimate:
    check_lambda(lam)
    if trials < 1:
        raise ValueError(f"--trials must be >= 1, got {trials}")
    cfg = pipeline_for(N, T, speed, a=a, cfl=cfl)
    logger.info(f"[CONTRACTION] lambda={lam}, speed={speed}, T={T}, N={N}, trials={trials}, seed={seed}")
    return estimate_contraction(lam, trials, seed, cfg, workers=workers)


def format_contraction(estimate: ContractionEstimate) -> str:
    lines = [f"trial {i:3d}: {ratio:.6f}" for i, ratio in enumerate(estimate.ratios, 1)]
    verdict = "contraction holds" if estimate.max_ratio < 1 else "NOT a contraction"
    lines.append(f"max ratio: {estimate.max_ratio:.6f} ({verdict})")
    return "\n".join(lines)
