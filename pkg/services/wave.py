"""k-space pseudospectral solver for the variable-speed wave equation.

Leapfrog in time, Fourier-spectral in space on the 2a-periodic box. The
Laplacian multiplier -|k|^2 is corrected by sinc^2(c_ref |k| dt / 2), which
makes the scheme exact for a constant speed equal to c_ref.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft

from config import DEFAULT_CFL, FFT_WORKERS, NAN_CHECK_INTERVAL, get_logger
from services.errors import CFLViolationError, NonFiniteFieldError
from services.grid import DiscreteDomain, Grid

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Grid-sampled real function (phantom, speed, pressure snapshot, data)."""

    values: np.ndarray
    grid: Grid
    units: str = "a.u."

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValueError(f"Field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.isfinite(values).all():
            raise ValueError("Field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid, units: str = "a.u.") -> "ScalarField":
        return cls(np.zeros(grid.shape), grid, units)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(values, self.grid, self.units)

    def masked(self, mask: np.ndarray) -> "ScalarField":
        """Keep values where ``mask`` is True, zero elsewhere."""
        return self.with_values(np.where(mask, self.values, 0.0))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class SoundSpeed:
    """Positive sound speed, equal to 1 on the exterior set J."""

    field: ScalarField
    c_max: float

    @classmethod
    def from_values(cls, values: np.ndarray, grid: Grid,
                    dom: DiscreteDomain | None = None) -> "SoundSpeed":
        speed = cls(ScalarField(values, grid, units="speed"), float(np.max(values)))
        if not (speed.field.values > 0).all():
            raise ValueError(f"Sound speed must be positive everywhere, min={speed.field.values.min()}")
        if dom is not None:
            speed.check_exterior(dom)
        return speed

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "SoundSpeed":
        return cls.from_values(np.full(grid.shape, float(value)), grid)

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def grid(self) -> Grid:
        return self.field.grid

    def check_exterior(self, dom: DiscreteDomain) -> None:
        deviation = np.abs(self.values[dom.exterior] - 1.0)
        if deviation.size and deviation.max() > 4 * np.finfo(float).eps:
            raise ValueError(
                f"Sound speed must equal 1 on the exterior set J, max deviation {deviation.max():.3e}"
            )


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping parameters; dt is snapped so that T = n_steps * dt."""

    T: float
    dt: float
    n_steps: int
    h: float
    cfl: float = DEFAULT_CFL
    c_ref: float = 1.0
    kspace_correction: bool = True

    @classmethod
    def build(cls, T: float, grid: Grid, c_max: float, cfl: float = DEFAULT_CFL,
              kspace_correction: bool = True) -> "SolverConfig":
        if not T > 0:
            raise ValueError(f"Propagation time T must be positive, got {T}")
        if not cfl > 0:
            raise ValueError(f"CFL number must be positive, got {cfl}")
        if not c_max > 0:
            raise ValueError(f"c_max must be positive, got {c_max}")
        dt_max = cfl * grid.h / c_max
        n_steps = max(1, math.ceil(T / dt_max))
        return cls(T=float(T), dt=float(T) / n_steps, n_steps=n_steps, h=grid.h,
                   cfl=float(cfl), c_ref=float(c_max), kspace_correction=kspace_correction)

    @property
    def courant(self) -> float:
        return self.dt * self.c_ref / self.h


@dataclass(frozen=True, eq=False)
class WaveSnapshot:
    """Pressure and its time derivative at the final time."""

    pressure: ScalarField
    velocity: ScalarField

    def __post_init__(self):
        if self.pressure.grid is not self.velocity.grid and not self.pressure.grid.same_as(self.velocity.grid):
            raise ValueError("Pressure and velocity live on different grids")

    @classmethod
    def at_rest(cls, pressure: ScalarField) -> "WaveSnapshot":
        return cls(pressure, ScalarField.zeros(pressure.grid))


class _KSpaceOperator:
    """Multipliers on the real-FFT half spectrum for one (grid, config) pair."""

    def __init__(self, grid: Grid, cfg: SolverConfig):
        self.shape = grid.shape
        k1 = grid.fft_wavevectors()[:, None]
        k2 = grid.rfft_wavevectors()[None, :]
        k_abs = np.sqrt(k1 ** 2 + k2 ** 2)
        self.laplacian_symbol = -(k_abs ** 2)
        if cfg.kspace_correction:
            # np.sinc is the normalized sinc sin(pi x)/(pi x)
            self.laplacian_symbol = self.laplacian_symbol * np.sinc(cfg.c_ref * k_abs * cfg.dt / (2 * np.pi)) ** 2
            self.velocity_debias = 1.0 / np.sinc(cfg.c_ref * k_abs * cfg.dt / np.pi)
        else:
            self.velocity_debias = None

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return fft.irfft2(self.laplacian_symbol * fft.rfft2(u, workers=FFT_WORKERS),
                          s=self.shape, workers=FFT_WORKERS)

    def debias_velocity(self, v: np.ndarray) -> np.ndarray:
        if self.velocity_debias is None:
            return v
        return fft.irfft2(self.velocity_debias * fft.rfft2(v, workers=FFT_WORKERS),
                          s=self.shape, workers=FFT_WORKERS)


def _check_finite_array(u: np.ndarray, what: str) -> None:
    if not np.isfinite(u).all():
        raise ValueError(f"{what} contains non-finite values")


def spectral_laplacian(u: ScalarField, cfg: SolverConfig) -> ScalarField:
    """Apply the (optionally k-space corrected) spectral Laplacian."""
    _check_finite_array(u.values, "Input field")
    op = _KSpaceOperator(u.grid, cfg)
    return u.with_values(op.laplacian(u.values))


def spectral_gradient(u: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Fourier derivative along each axis, Nyquist component dropped."""
    grid = u.grid
    k1 = grid.fft_wavevectors().copy()
    k1[grid.N // 2] = 0.0
    k2 = grid.rfft_wavevectors().copy()
    k2[-1] = 0.0
    u_hat = fft.rfft2(u.values, workers=FFT_WORKERS)
    d1 = fft.irfft2(1j * k1[:, None] * u_hat, s=grid.shape, workers=FFT_WORKERS)
    d2 = fft.irfft2(1j * k2[None, :] * u_hat, s=grid.shape, workers=FFT_WORKERS)
    return u.with_values(d1), u.with_values(d2)


def _validate_run(f: ScalarField, c: SoundSpeed, cfg: SolverConfig) -> None:
    if not f.grid.same_as(c.grid):
        raise ValueError("Initial field and sound speed live on different grids")
    if not math.isclose(cfg.h, f.grid.h, rel_tol=1e-12):
        raise ValueError(f"Solver config built for h={cfg.h}, field grid has h={f.grid.h}")
    _check_finite_array(f.values, "Initial field")
    if c.c_max > cfg.c_ref * (1 + 1e-12):
        raise CFLViolationError(
            f"Sound speed max {c.c_max} exceeds the reference speed {cfg.c_ref} the time step was built for"
        )
    courant = cfg.dt * c.c_max / cfg.h
    if courant > cfg.cfl * (1 + 1e-9):
        raise CFLViolationError(f"Courant number {courant:.4f} exceeds cfl={cfg.cfl}")


def _leapfrog(p0: np.ndarray, c: SoundSpeed, cfg: SolverConfig, op: _KSpaceOperator,
              n_steps: int):
    """Yield (n, p^{n-1}, p^n) for n = 1 .. n_steps, starting from (p0, 0)."""
    c2dt2 = (c.values * cfg.dt) ** 2
    p_prev = p0
    p = p0 + 0.5 * c2dt2 * op.laplacian(p0)
    yield 1, p_prev, p
    for n in range(2, n_steps + 1):
        p_prev, p = p, 2.0 * p - p_prev + c2dt2 * op.laplacian(p)
        if n % NAN_CHECK_INTERVAL == 0 and not np.isfinite(p).all():
            logger.error(f"[WAVE] Non-finite pressure at step {n}/{n_steps}")
            raise NonFiniteFieldError(f"Non-finite pressure detected at step {n}", step=n)
        yield n, p_prev, p


def _run(f: ScalarField, c: SoundSpeed, cfg: SolverConfig,
         with_velocity: bool) -> tuple[np.ndarray, np.ndarray | None]:
    _validate_run(f, c, cfg)
    op = _KSpaceOperator(f.grid, cfg)

    p_prev = p = None
    for _, p_prev, p in _leapfrog(f.values, c, cfg, op, cfg.n_steps):
        pass
    if not np.isfinite(p).all():
        raise NonFiniteFieldError(f"Non-finite pressure at final step {cfg.n_steps}", step=cfg.n_steps)

    velocity = None
    if with_velocity:
        # one extra step so the centered difference sits at T
        c2dt2 = (c.values * cfg.dt) ** 2
        p_next = 2.0 * p - p_prev + c2dt2 * op.laplacian(p)
        velocity = op.debias_velocity((p_next - p_prev) / (2.0 * cfg.dt))

    logger.debug(f"[WAVE] Propagated {cfg.n_steps} steps, dt={cfg.dt:.5g}, T={cfg.T}")
    return p, velocity


def propagate(f: ScalarField, c: SoundSpeed, cfg: SolverConfig) -> WaveSnapshot:
    """Solve p_tt = c^2 Lap p with p(0) = f, p_t(0) = 0, return the state at T."""
    pressure, velocity = _run(f, c, cfg, with_velocity=True)
    return WaveSnapshot(f.with_values(pressure), f.with_values(velocity))


def time_reverse(h: ScalarField, c: SoundSpeed, cfg: SolverConfig) -> ScalarField:
    """Return q(., 0) for q(., T) = h, q_t(., T) = 0.

    With s = T - t the terminal value problem becomes the forward problem with
    data (h, 0), so this shares the propagation loop.
    """
    pressure, _ = _run(h, c, cfg, with_velocity=False)
    return h.with_values(pressure)


def propagate_history(f: ScalarField, c: SoundSpeed, cfg: SolverConfig,
                      every: int = 10) -> list[tuple[float, ScalarField]]:
    """Pressure snapshots every ``every`` steps, including t = 0 and t = T."""
    if every < 1:
        raise ValueError(f"Snapshot interval must be >= 1, got {every}")
    _validate_run(f, c, cfg)
    op = _KSpaceOperator(f.grid, cfg)
    history = [(0.0, f)]
    for n, _, p in _leapfrog(f.values, c, cfg, op, cfg.n_steps):
        if n % every == 0 or n == cfg.n_steps:
            history.append((n * cfg.dt, f.with_values(p.copy())))
    return history


def energy(snapshot: WaveSnapshot, c: SoundSpeed) -> float:
    """h^2 * sum(c^-2 |p_t|^2 + |grad p|^2), spectral gradient."""
    grid = snapshot.pressure.grid
    d1, d2 = spectral_gradient(snapshot.pressure)
    density = (snapshot.velocity.values / c.values) ** 2 + d1.values ** 2 + d2.values ** 2
    return float(grid.h ** 2 * density.sum())
