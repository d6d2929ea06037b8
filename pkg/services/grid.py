"""Computational grid, imaging domain and the discrete index sets I, J, dI."""

from dataclasses import dataclass, field

import numpy as np

from config import BOX_MARGIN, DOMAIN_MARGIN_CELLS, MIN_N, get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class Grid:
    """Equidistant N x N sampling of the periodic box [-a, a]^2.

    Point i = (i1, i2) sits at x_i = (-a, -a) + 2 i a / N. Arrays indexed
    ``values[i1, i2]`` carry x1 along axis 0 and x2 along axis 1.
    """

    a: float
    N: int
    h: float
    wavevectors: np.ndarray  # sorted, m = -N/2 .. N/2-1
    x: np.ndarray = field(repr=False)  # 1D coordinates along either axis

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.N)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X1, X2) meshgrids in ``ij`` indexing."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    def point(self, i1: int, i2: int) -> tuple[float, float]:
        return (float(self.x[i1]), float(self.x[i2]))

    def fft_wavevectors(self) -> np.ndarray:
        """Wavevectors in FFT (unshifted) order."""
        return np.fft.ifftshift(self.wavevectors)

    def rfft_wavevectors(self) -> np.ndarray:
        """Non-negative wavevectors for the half-spectrum axis of a real FFT."""
        return np.pi * np.arange(self.N // 2 + 1) / self.a

    def same_as(self, other: "Grid") -> bool:
        return self.N == other.N and self.a == other.a


@dataclass(frozen=True)
class DomainShape:
    """Disc-shaped imaging domain."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    kind: str = "disc"

    def __post_init__(self):
        if self.kind != "disc":
            raise ValueError(f"Unsupported domain shape '{self.kind}', only 'disc' is available")
        if not self.radius > 0:
            raise ValueError(f"Domain radius must be positive, got {self.radius}")


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """Boolean masks for I (inside), J (exterior) and the discrete boundary dI."""

    grid: Grid
    shape: DomainShape
    inside: np.ndarray
    exterior: np.ndarray
    boundary: np.ndarray

    @property
    def closure(self) -> np.ndarray:
        """I together with its discrete boundary."""
        return self.inside | self.boundary

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    def indices(self, mask_name: str = "inside") -> np.ndarray:
        """Index pairs (k, 2) of the chosen mask, row-major order."""
        return np.argwhere(getattr(self, mask_name))


def make_grid(a: float, N: int) -> Grid:
    """Build the grid for box half-width ``a`` and ``N`` samples per axis."""
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
        raise ValueError(f"N must be an integer, got {N!r}")
    if N < MIN_N or N % 2 != 0:
        raise ValueError(f"N must be an even integer >= {MIN_N}, got {N}")
    if not np.isfinite(a) or a <= 0:
        raise ValueError(f"Box half-width a must be positive, got {a}")

    a = float(a)
    N = int(N)
    h = 2.0 * a / N
    x = -a + 2.0 * a * np.arange(N) / N
    m = np.arange(-N // 2, N // 2)
    wavevectors = np.pi * m / a

    for arr in (x, wavevectors):
        arr.setflags(write=False)
    return Grid(a=a, N=N, h=h, wavevectors=wavevectors, x=x)


def _neighbor_any(mask: np.ndarray) -> np.ndarray:
    """True where at least one 4-neighbor is True (no wrap-around)."""
    padded = np.pad(mask, 1, constant_values=False)
    return (padded[2:, 1:-1] | padded[:-2, 1:-1]
            | padded[1:-1, 2:] | padded[1:-1, :-2])


def discretize_domain(grid: Grid, shape: DomainShape) -> DiscreteDomain:
    """Compute I = {i : |x_i - center| < radius}, its complement J and dI."""
    cx, cy = shape.center
    reach = max(abs(cx), abs(cy)) + shape.radius
    limit = grid.a - DOMAIN_MARGIN_CELLS * grid.h
    if reach > limit:
        raise ValueError(
            f"Domain (center={shape.center}, radius={shape.radius}) does not fit "
            f"inside the box with margin {DOMAIN_MARGIN_CELLS}h: needs {reach:.4f} <= {limit:.4f}"
        )

    X1, X2 = grid.coordinates()
    inside = (X1 - cx) ** 2 + (X2 - cy) ** 2 < shape.radius ** 2
    if not inside.any():
        raise ValueError(
            f"Domain radius {shape.radius} is below the grid resolution h={grid.h:.4g}: I is empty"
        )
    exterior = ~inside
    boundary = exterior & _neighbor_any(inside)

    for arr in (inside, exterior, boundary):
        arr.setflags(write=False)

    logger.debug(f"[GRID] N={grid.N} a={grid.a}: |I|={int(inside.sum())}, |dI|={int(boundary.sum())}")
    return DiscreteDomain(grid=grid, shape=shape, inside=inside,
                          exterior=exterior, boundary=boundary)


def default_box_half_width(T: float, margin: float | None = None) -> float:
    """a = T + margin, which satisfies a >= T + 1 for the unit disc."""
    return float(T) + (BOX_MARGIN if margin is None else margin)
