"""Field files, PGM previews and convergence-log CSVs."""

import csv
import os

import numpy as np

from config import get_logger
from services.grid import make_grid
from services.inversion import ConvergenceLog, IterationRecord
from services.wave import ScalarField

logger = get_logger(__name__)

FIELD_MAGIC = "FF2D"
LOG_HEADER = ("iter", "residual_h10", "error_h10")
_PAYLOAD_DTYPE = np.dtype("<f8")


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_field(f: ScalarField, path: str) -> None:
    """Header line ``FF2D <N> <a> <units>`` followed by N^2 little-endian float64."""
    if not f.units or any(ch.isspace() for ch in f.units):
        raise ValueError(f"Field units must be a single non-empty token, got {f.units!r}")
    _ensure_parent(path)
    header = f"{FIELD_MAGIC} {f.grid.N} {f.grid.a!r} {f.units}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype=_PAYLOAD_DTYPE).tobytes(order="C"))
    logger.debug(f"[IO] Wrote field N={f.grid.N} to {path}")


def read_field(path: str) -> ScalarField:
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()

    try:
        magic, n_str, a_str, units = header.decode("ascii").split()
        N, a = int(n_str), float(a_str)
    except (UnicodeDecodeError, ValueError):
        raise ValueError(f"{path}: malformed field header {header[:64]!r}") from None
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: expected magic '{FIELD_MAGIC}', found '{magic}'")

    expected = _PAYLOAD_DTYPE.itemsize * N * N
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload size mismatch for N={N}: expected {expected} bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype=_PAYLOAD_DTYPE).reshape(N, N).astype(np.float64)
    return ScalarField(values, make_grid(a, N), units)


def write_pgm(f: ScalarField, path: str, clip: tuple[float, float] | None = None) -> None:
    """8-bit binary PGM, linear map of [lo, hi] onto 0..255.

    ``clip`` fixes the range, otherwise the field min/max is used. A degenerate
    range gives a uniform gray of 128.
    """
    lo, hi = clip if clip is not None else (float(f.values.min()), float(f.values.max()))
    if hi < lo:
        raise ValueError(f"Clip range ({lo}, {hi}) is inverted")
    if hi == lo:
        pixels = np.full(f.grid.shape, 128, dtype=np.uint8)
    else:
        scaled = (np.clip(f.values, lo, hi) - lo) / (hi - lo)
        pixels = np.rint(scaled * 255.0).astype(np.uint8)

    _ensure_parent(path)
    N = f.grid.N
    with open(path, "wb") as fh:
        fh.write(f"P5\n{N} {N}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes(order="C"))


def write_log(log: ConvergenceLog, path: str) -> None:
    """CSV with one row per iteration; floats written with 17 significant digits."""
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for rec in log:
            error = "" if rec.error_h10 is None else format(rec.error_h10, ".17g")
            writer.writerow([rec.iteration, format(rec.residual_h10, ".17g"), error])


def read_log(path: str) -> ConvergenceLog:
    log = ConvergenceLog()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != LOG_HEADER:
            raise ValueError(f"{path}: expected header {','.join(LOG_HEADER)}, found {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, found {len(row)}")
            error = float(row[2]) if row[2] else None
            log.append(IterationRecord(int(row[0]), float(row[1]), error))
    return log
