"""Discrete exterior wave transform, modified time reversal and error operator."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from config import DEFAULT_CFL, get_logger
from services.analysis import h10_norm
from services.elliptic import DirichletSolveOptions, harmonic_extension, project_h10
from services.grid import DiscreteDomain, Grid
from services.wave import ScalarField, SolverConfig, SoundSpeed, propagate, time_reverse

logger = get_logger(__name__)
audit = get_logger("audit.operators")


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Everything the forward and reversal operators need, on one grid."""

    grid: Grid
    dom: DiscreteDomain
    c: SoundSpeed
    solver: SolverConfig
    elliptic: DirichletSolveOptions = field(default_factory=DirichletSolveOptions)

    def __post_init__(self):
        if not self.dom.grid.same_as(self.grid) or not self.c.grid.same_as(self.grid):
            raise ValueError("Domain, sound speed and pipeline grid disagree")
        if self.solver.h != self.grid.h:
            raise ValueError(f"Solver built for h={self.solver.h}, grid has h={self.grid.h}")
        if self.solver.c_ref < self.c.c_max:
            raise ValueError(f"Solver reference speed {self.solver.c_ref} is below c_max={self.c.c_max}")
        self.c.check_exterior(self.dom)


@dataclass(frozen=True)
class ContractionEstimate:
    max_ratio: float
    ratios: list[float]


def build_pipeline(grid: Grid, dom: DiscreteDomain, c: SoundSpeed, T: float,
                   cfl: float = DEFAULT_CFL, kspace_correction: bool = True,
                   elliptic: DirichletSolveOptions | None = None) -> PipelineConfig:
    """Assemble a PipelineConfig with a time step derived from c_max."""
    solver = SolverConfig.build(T, grid, c.c_max, cfl=cfl, kspace_correction=kspace_correction)
    return PipelineConfig(grid=grid, dom=dom, c=c, solver=solver,
                          elliptic=elliptic or DirichletSolveOptions())


def check_lambda(lam: float) -> float:
    if not 0.0 < lam <= 2.0:
        raise ValueError(f"Relaxation parameter lambda must lie in (0, 2], got {lam}")
    return float(lam)


def forward_exterior(f: ScalarField, cfg: PipelineConfig) -> ScalarField:
    """W_{T,I}: zero-extend f from I, propagate to T, restrict to J."""
    snapshot = propagate(f.masked(cfg.dom.inside), cfg.c, cfg.solver)
    return snapshot.pressure.masked(cfg.dom.exterior)


def modified_time_reversal(g: ScalarField, cfg: PipelineConfig) -> ScalarField:
    """P_I W#_T E_I: harmonic extension, time reversal, restriction, projection."""
    extended = harmonic_extension(g.masked(cfg.dom.exterior), cfg.dom, cfg.elliptic)
    q0 = time_reverse(extended, cfg.c, cfg.solver)
    return project_h10(q0.masked(cfg.dom.closure), cfg.dom, cfg.elliptic)


def error_operator(f: ScalarField, lam: float, cfg: PipelineConfig) -> ScalarField:
    """K f = f - lambda A W f."""
    lam = check_lambda(lam)
    f = f.masked(cfg.dom.inside)
    return f - modified_time_reversal(forward_exterior(f, cfg), cfg) * lam


def random_smooth_field(dom: DiscreteDomain, rng: np.random.Generator,
                        smoothing: float = 0.08) -> ScalarField:
    """Gaussian-filtered white noise times a C-infinity bump that vanishes near dI.

    ``smoothing`` is the filter width in length units. The result is scaled to
    unit max norm.
    """
    grid = dom.grid
    noise = rng.standard_normal(grid.shape)
    sigma = max(1.0, smoothing / grid.h)
    smooth = gaussian_filter(noise, sigma=sigma, mode="wrap")

    X1, X2 = grid.coordinates()
    cx, cy = dom.shape.center
    s2 = ((X1 - cx) ** 2 + (X2 - cy) ** 2) / (0.9 * dom.shape.radius) ** 2
    bump = np.zeros(grid.shape)
    support = s2 < 1.0
    bump[support] = np.exp(1.0 - 1.0 / (1.0 - s2[support]))

    values = np.where(dom.inside, smooth * bump, 0.0)
    peak = np.max(np.abs(values))
    if peak > 0:
        values = values / peak
    return ScalarField(values, grid)


def _trial_ratio(seed_seq: np.random.SeedSequence, lam: float, cfg: PipelineConfig) -> float:
    f = random_smooth_field(cfg.dom, np.random.default_rng(seed_seq))
    kf = error_operator(f, lam, cfg)
    return h10_norm(kf, cfg.dom.closure) / h10_norm(f, cfg.dom.closure)


def estimate_contraction(lam: float, trials: int, seed: int, cfg: PipelineConfig,
                         workers: int = 1) -> ContractionEstimate:
    """Empirical ||K f|| / ||f|| in H1_0 over random smooth fields."""
    lam = check_lambda(lam)
    if trials < 1:
        raise ValueError(f"Number of trials must be >= 1, got {trials}")

    seeds = np.random.SeedSequence(seed).spawn(trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ratios = list(pool.map(lambda s: _trial_ratio(s, lam, cfg), seeds))
    else:
        ratios = [_trial_ratio(s, lam, cfg) for s in seeds]

    estimate = ContractionEstimate(max_ratio=float(max(ratios)), ratios=[float(r) for r in ratios])
    audit.info(
        "Contraction estimate",
        extra={"audit_data": {
            "event": "contraction_estimate",
            "lambda": lam,
            "trials": trials,
            "seed": seed,
            "T": cfg.solver.T,
            "N": cfg.grid.N,
            "max_ratio": estimate.max_ratio,
        }},
    )
    return estimate
