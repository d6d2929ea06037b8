"""Norms, error maps and convergence summaries."""

from dataclasses import dataclass

import numpy as np

from config import get_logger
from services.grid import DiscreteDomain
from services.wave import ScalarField, spectral_gradient

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """Reconstruction error against a known phantom."""

    l2_rel: float
    h10_rel: float
    max_abs: float
    pointwise: ScalarField  # f_true - f_rec

    def as_dict(self) -> dict:
        return {"l2_rel": self.l2_rel, "h10_rel": self.h10_rel, "max_abs": self.max_abs}


def _forward_differences(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """f(i + e_k) - f(i), with zero beyond the last row/column."""
    p = np.pad(values, ((0, 1), (0, 1)))
    return p[1:, :-1] - values, p[:-1, 1:] - values


def h10_norm(f: ScalarField, region: np.ndarray) -> float:
    """sqrt(h^2 * sum over region of |forward-difference gradient|^2).

    h^2 and the 1/h^2 of the difference quotients cancel, so this is the root
    of the summed squared jumps.
    """
    if not region.any():
        raise ValueError("H1_0 norm over an empty region")
    d1, d2 = _forward_differences(f.values)
    return float(np.sqrt(np.sum((d1 ** 2 + d2 ** 2)[region])))


def h10_inner(u: ScalarField, v: ScalarField, region: np.ndarray) -> float:
    """Discrete H1_0 inner product matching h10_norm."""
    if not region.any():
        raise ValueError("H1_0 inner product over an empty region")
    u1, u2 = _forward_differences(u.values)
    v1, v2 = _forward_differences(v.values)
    return float(np.sum((u1 * v1 + u2 * v2)[region]))


def spectral_h1_seminorm(f: ScalarField) -> float:
    """Gradient seminorm with spectral derivatives over the whole box."""
    d1, d2 = spectral_gradient(f)
    return float(np.sqrt(f.grid.h ** 2 * np.sum(d1.values ** 2 + d2.values ** 2)))


def _safe_ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def relative_l2(f: ScalarField, ref: ScalarField, region: np.ndarray) -> float:
    """||f - ref|| / ||ref|| over ``region``."""
    diff = np.linalg.norm((f.values - ref.values)[region])
    return _safe_ratio(float(diff), float(np.linalg.norm(ref.values[region])))


def compare(f_rec: ScalarField, f_true: ScalarField, dom: DiscreteDomain) -> ErrorReport:
    """Relative L2 and H1_0 errors on I, max abs error and the difference image."""
    if not f_rec.grid.same_as(f_true.grid) or not f_true.grid.same_as(dom.grid):
        raise ValueError(
            f"Grid mismatch: reconstruction N={f_rec.grid.N}, truth N={f_true.grid.N}, domain N={dom.grid.N}"
        )
    pointwise = f_true - f_rec
    l2_rel = relative_l2(f_rec, f_true, dom.inside)
    h10_rel = _safe_ratio(h10_norm(pointwise, dom.closure), h10_norm(f_true, dom.closure))
    max_abs = float(np.max(np.abs(pointwise.values[dom.inside])))
    return ErrorReport(l2_rel=l2_rel, h10_rel=h10_rel, max_abs=max_abs, pointwise=pointwise)


def convergence_rate(errors: list[float], start: int = 1) -> float | None:
    """Geometric mean of successive ratios errors[j+1] / errors[j] from ``start`` on."""
    tail = np.asarray(errors[start:], dtype=float)
    if len(tail) < 2 or np.any(tail <= 0):
        return None
    return float(np.exp(np.mean(np.diff(np.log(tail)))))
