"""Phantom and sound-speed generators backed by the plain-text registry, plus
oversampled data simulation."""

import functools
from dataclasses import dataclass

import numpy as np

from config import (
    DEFAULT_CFL,
    DEFAULT_OVERSAMPLE,
    MIN_SPEED,
    PHANTOM_MARGIN,
    REGISTRY_PATH,
    get_logger,
)
from services.elliptic import DirichletSolveOptions
from services.grid import (
    DiscreteDomain,
    DomainShape,
    Grid,
    default_box_half_width,
    discretize_domain,
    make_grid,
)
from services.operators import PipelineConfig, build_pipeline, forward_exterior
from services.wave import ScalarField, SolverConfig, SoundSpeed

logger = get_logger(__name__)
audit = get_logger("audit.phantoms")

PHANTOM_ALIASES = {"a": "a_smooth", "b": "b_piecewise", "c": "c_piecewise"}
SPEED_ALIASES = {"I": "cI", "II": "cII", "III": "cIII", "IV": "cIV"}

# Row widths per registry field
_ROW_WIDTHS = {
    "gaussians": 4,
    "discs": 4,
    "annuli": 5,
    "bumps": 4,
    "taper": 2,
    "well": 2,
    "constant": 1,
}
_PHANTOM_FIELDS = {"gaussians", "discs", "annuli", "taper"}
_SPEED_FIELDS = {"constant", "bumps", "well", "taper"}

Rows = tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class PhantomSpec:
    """Initial pressure built from Gaussians (tapered) and disc/annulus indicators."""

    name: str
    gaussians: Rows = ()
    discs: Rows = ()
    annuli: Rows = ()
    taper: tuple[float, float] | None = None

    def __post_init__(self):
        if not (self.gaussians or self.discs or self.annuli):
            raise ValueError(f"Phantom '{self.name}' has no components")
        limit = 1.0 - PHANTOM_MARGIN
        if self.gaussians:
            if self.taper is None:
                raise ValueError(f"Phantom '{self.name}': Gaussian components need a taper")
            _check_taper(self.name, self.taper, limit)
        for cx, cy, r, _ in self.discs:
            if r <= 0 or np.hypot(cx, cy) + r > limit:
                raise ValueError(
                    f"Phantom '{self.name}': disc at ({cx}, {cy}) radius {r} leaves r <= {limit}"
                )
        for cx, cy, r_in, r_out, _ in self.annuli:
            if not 0 <= r_in < r_out or np.hypot(cx, cy) + r_out > limit:
                raise ValueError(
                    f"Phantom '{self.name}': annulus at ({cx}, {cy}) radii {r_in}..{r_out} leaves r <= {limit}"
                )


@dataclass(frozen=True)
class SpeedSpec:
    """Sound speed 1 + tapered perturbation; exactly 1 outside the taper."""

    name: str
    constant: float | None = None
    bumps: Rows = ()
    well: tuple[float, float] | None = None  # (depth, width)
    taper: tuple[float, float] | None = None

    def __post_init__(self):
        kinds = sum([self.constant is not None, bool(self.bumps), self.well is not None])
        if kinds != 1:
            raise ValueError(f"Speed '{self.name}' must define exactly one of constant, bumps, well")
        if self.constant is not None and self.constant != 1.0:
            raise ValueError(f"Speed '{self.name}': a constant speed must equal 1, got {self.constant}")
        if self.constant is None:
            if self.taper is None:
                raise ValueError(f"Speed '{self.name}' needs a taper")
            _check_taper(self.name, self.taper, 1.0)
        if self.well is not None and not (0 <= self.well[0] < 1 and self.well[1] > 0):
            raise ValueError(f"Speed '{self.name}': well depth must be in [0, 1) and width > 0")


@dataclass(frozen=True)
class Registry:
    version: int
    phantoms: dict[str, PhantomSpec]
    speeds: dict[str, SpeedSpec]


def _check_taper(name: str, taper: tuple[float, float], limit: float) -> None:
    inner, outer = taper
    if not 0 <= inner < outer <= limit:
        raise ValueError(f"'{name}': taper ({inner}, {outer}) must satisfy 0 <= inner < outer <= {limit}")


def _parse_rows(key: str, value: str, width: int, lineno: int) -> Rows:
    rows = []
    for chunk in value.split(";"):
        try:
            row = tuple(float(tok) for tok in chunk.split())
        except ValueError:
            raise ValueError(f"Registry line {lineno}: non-numeric value in '{key}'") from None
        if len(row) != width:
            raise ValueError(f"Registry line {lineno}: '{key}' rows need {width} numbers, got {len(row)}")
        rows.append(row)
    return tuple(rows)


def parse_registry(text: str) -> Registry:
    """Parse ``key = value`` lines into phantom and speed specs."""
    version = None
    entries: dict[tuple[str, str], dict] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"Registry line {lineno}: expected 'key = value', got '{line}'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "registry.version":
            version = int(value)
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[0] not in ("phantom", "speed"):
            raise ValueError(f"Registry line {lineno}: unknown key '{key}'")
        group, name, fld = parts
        allowed = _PHANTOM_FIELDS if group == "phantom" else _SPEED_FIELDS
        if fld not in allowed:
            raise ValueError(f"Registry line {lineno}: '{fld}' is not a {group} field")
        rows = _parse_rows(key, value, _ROW_WIDTHS[fld], lineno)
        if fld in ("taper", "well", "constant"):
            if len(rows) != 1:
                raise ValueError(f"Registry line {lineno}: '{key}' takes a single row")
            rows = rows[0][0] if fld == "constant" else rows[0]
        entries.setdefault((group, name), {})[fld] = rows

    if version is None:
        raise ValueError("Registry is missing 'registry.version'")
    phantoms = {n: PhantomSpec(name=n, **f) for (g, n), f in entries.items() if g == "phantom"}
    speeds = {n: SpeedSpec(name=n, **f) for (g, n), f in entries.items() if g == "speed"}
    return Registry(version=version, phantoms=phantoms, speeds=speeds)


@functools.lru_cache(maxsize=4)
def load_registry(path: str = REGISTRY_PATH) -> Registry:
    with open(path, encoding="utf-8") as fh:
        registry = parse_registry(fh.read())
    logger.debug(f"[PHANTOM] Loaded registry v{registry.version} from {path}")
    return registry


def get_phantom(name: str, registry: Registry | None = None) -> PhantomSpec:
    registry = registry or load_registry()
    key = PHANTOM_ALIASES.get(name, name)
    if key not in registry.phantoms:
        raise ValueError(f"Unknown phantom '{name}'; known: {sorted(PHANTOM_ALIASES)} or {sorted(registry.phantoms)}")
    return registry.phantoms[key]


def get_speed(name: str, registry: Registry | None = None) -> SpeedSpec:
    registry = registry or load_registry()
    key = SPEED_ALIASES.get(name, name)
    if key not in registry.speeds:
        raise ValueError(f"Unknown sound speed '{name}'; known: {sorted(SPEED_ALIASES)} or {sorted(registry.speeds)}")
    return registry.speeds[key]


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)

    def psi(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a, b = psi(t), psi(1.0 - t)
    return a / (a + b)


def _taper(r: np.ndarray, taper: tuple[float, float]) -> np.ndarray:
    inner, outer = taper
    return smooth_step((outer - r) / (outer - inner))


def _unit_coordinates(grid: Grid, shape: DomainShape) -> tuple[np.ndarray, np.ndarray]:
    """Grid coordinates rescaled so the imaging disc becomes the unit disc."""
    X1, X2 = grid.coordinates()
    cx, cy = shape.center
    return (X1 - cx) / shape.radius, (X2 - cy) / shape.radius


def make_phantom(spec: PhantomSpec, grid: Grid, dom: DiscreteDomain) -> ScalarField:
    """Evaluate the phantom at grid midpoints, clip to [0, 1] and zero outside I."""
    if not dom.grid.same_as(grid):
        raise ValueError("Domain and grid disagree")
    u1, u2 = _unit_coordinates(grid, dom.shape)
    r = np.hypot(u1, u2)
    values = np.zeros(grid.shape)

    if spec.gaussians:
        smooth = np.zeros(grid.shape)
        for cx, cy, amp, width in spec.gaussians:
            smooth += amp * np.exp(-((u1 - cx) ** 2 + (u2 - cy) ** 2) / width ** 2)
        values += smooth * _taper(r, spec.taper)
    for cx, cy, radius, val in spec.discs:
        values += val * ((u1 - cx) ** 2 + (u2 - cy) ** 2 < radius ** 2)
    for cx, cy, r_in, r_out, val in spec.annuli:
        rr = np.hypot(u1 - cx, u2 - cy)
        values += val * ((rr >= r_in) & (rr < r_out))

    values = np.where(dom.inside, np.clip(values, 0.0, 1.0), 0.0)
    return ScalarField(values, grid)


def make_speed(spec: SpeedSpec, grid: Grid, dom: DiscreteDomain) -> SoundSpeed:
    """Evaluate the speed profile; J is set to exactly 1."""
    if not dom.grid.same_as(grid):
        raise ValueError("Domain and grid disagree")
    if spec.constant is not None:
        return SoundSpeed.constant(grid, spec.constant)

    u1, u2 = _unit_coordinates(grid, dom.shape)
    r = np.hypot(u1, u2)
    chi = _taper(r, spec.taper)
    if spec.well is not None:
        depth, width = spec.well
        perturbation = -depth * np.exp(-(r ** 2) / width ** 2)
    else:
        perturbation = np.zeros(grid.shape)
        for cx, cy, amp, width in spec.bumps:
            perturbation += amp * np.exp(-((u1 - cx) ** 2 + (u2 - cy) ** 2) / width ** 2)

    values = np.where(dom.exterior, 1.0, 1.0 + perturbation * chi)
    if values.min() < MIN_SPEED:
        raise ValueError(f"Speed '{spec.name}' drops to {values.min():.4f} < {MIN_SPEED}")
    # An interior maximum above the exterior speed holds grid-scale waves inside
    if values.max() > 1.0:
        raise ValueError(
            f"Speed '{spec.name}' rises to {values.max():.4f} inside the disc; variable speeds must stay <= 1"
        )
    return SoundSpeed.from_values(values, grid, dom)


def pipeline_for(N: int, T: float, speed: str | SpeedSpec, a: float | None = None,
                 cfl: float = DEFAULT_CFL, kspace_correction: bool = True,
                 elliptic: DirichletSolveOptions | None = None,
                 shape: DomainShape | None = None) -> PipelineConfig:
    """Grid, domain, registry speed and solver for one run; a defaults to T + margin."""
    a = default_box_half_width(T) if a is None else a
    grid = make_grid(a, N)
    dom = discretize_domain(grid, shape or DomainShape())
    spec = speed if isinstance(speed, SpeedSpec) else get_speed(speed)
    c = make_speed(spec, grid, dom)
    return build_pipeline(grid, dom, c, T, cfl=cfl, kspace_correction=kspace_correction,
                          elliptic=elliptic)


def restrict_to_coarse(fine: ScalarField, grid: Grid, oversample: int) -> ScalarField:
    """Sample a fine-grid field at the points it shares with ``grid``."""
    if fine.grid.N != oversample * grid.N or fine.grid.a != grid.a:
        raise ValueError(
            f"Fine grid N={fine.grid.N} is not {oversample} x coarse N={grid.N} on the same box"
        )
    return ScalarField(fine.values[::oversample, ::oversample], grid, fine.units)


def _check_oversample(oversample: int) -> int:
    if not isinstance(oversample, (int, np.integer)) or isinstance(oversample, bool) or oversample < 1:
        raise ValueError(f"oversample must be an integer >= 1, got {oversample!r}")
    if oversample % 2 == 0:
        raise ValueError(f"oversample must be odd so coarse points are fine points, got {oversample}")
    return int(oversample)


def simulate_data(phantom: PhantomSpec, speed: SpeedSpec, cfg: PipelineConfig,
                  oversample: int = DEFAULT_OVERSAMPLE) -> ScalarField:
    """Exterior data for the reconstruction grid of ``cfg``, simulated on a grid
    ``oversample`` times finer and restricted to the coarse J."""
    oversample = _check_oversample(oversample)
    coarse = cfg.grid
    if oversample == 1:
        grid, dom = coarse, cfg.dom
    else:
        grid = make_grid(coarse.a, oversample * coarse.N)
        dom = discretize_domain(grid, cfg.dom.shape)

    c = make_speed(speed, grid, dom)
    solver = SolverConfig.build(cfg.solver.T, grid, c.c_max, cfl=cfg.solver.cfl,
                                kspace_correction=cfg.solver.kspace_correction)
    fine_cfg = PipelineConfig(grid=grid, dom=dom, c=c, solver=solver, elliptic=cfg.elliptic)

    logger.info(f"[PHANTOM] Simulating {phantom.name} at {speed.name}: N={grid.N} "
                f"({oversample}x), {solver.n_steps} steps")
    f = make_phantom(phantom, grid, dom)
    data = forward_exterior(f, fine_cfg)
    if oversample > 1:
        data = restrict_to_coarse(data, coarse, oversample)
    data = data.masked(cfg.dom.exterior)

    audit.info(
        "Data simulated",
        extra={"audit_data": {
            "event": "simulate_data",
            "phantom": phantom.name,
            "speed": speed.name,
            "N": coarse.N,
            "oversample": oversample,
            "T": cfg.solver.T,
        }},
    )
    return data
