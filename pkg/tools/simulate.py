"""Simulate exterior data for a registry phantom and sound speed."""

import os

from config import DEFAULT_CFL, DEFAULT_N, DEFAULT_OVERSAMPLE, DEFAULT_SEED, get_logger
from services.field_io import write_field, write_pgm
from services.inversion import add_noise
from services.phantoms import get_phantom, get_speed, load_registry, make_phantom, pipeline_for, simulate_data
from tools.manifest import RunManifest

logger = get_logger(__name__)
audit = get_logger("audit.simulate")


def run_simulate(*, phantom: str, speed: str, T: float, out: str, N: int = DEFAULT_N,
                 a: float | None = None, oversample: int = DEFAULT_OVERSAMPLE,
                 noise: float = 0.0, seed: int = DEFAULT_SEED, cfl: float = DEFAULT_CFL,
                 preview: bool = False) -> RunManifest:
    """Write the data field, the coarse-grid phantom and a manifest.

    Noise is added after restriction to the reconstruction grid.
    """
    if noise < 0:
        raise ValueError(f"--noise must be >= 0, got {noise}")
    cfg = pipeline_for(N, T, speed, a=a, cfl=cfl)
    phantom_spec = get_phantom(phantom)
    speed_spec = get_speed(speed)

    data = simulate_data(phantom_spec, speed_spec, cfg, oversample=oversample)
    data = add_noise(data, noise, seed, cfg.dom)
    truth = make_phantom(phantom_spec, cfg.grid, cfg.dom)

    stem = os.path.splitext(out)[0]
    artifacts = {"data": out, "truth": f"{stem}_truth.ff"}
    write_field(data, artifacts["data"])
    write_field(truth, artifacts["truth"])
    if preview:
        artifacts["preview"] = f"{stem}.pgm"
        write_pgm(data, artifacts["preview"])

    manifest = RunManifest(
        command="simulate",
        params={
            "phantom": phantom,
            "speed": speed,
            "N": cfg.grid.N,
            "T": cfg.solver.T,
            "a": cfg.grid.a,
            "oversample": oversample,
            "noise": noise,
            "seed": seed,
            "cfl": cfl,
            "out": out,
            "preview": preview,
        },
        artifacts=artifacts,
        registry_version=load_registry().version,
    )
    manifest.save(f"{stem}.manifest.json")

    audit.info(
        "Simulation written",
        extra={"audit_data": {"event": "simulate_complete", **manifest.params}},
    )
    logger.info(f"[SIMULATE] {phantom_spec.name} at {speed_spec.name}: data written to {out}")
    return manifest
