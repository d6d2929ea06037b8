"""Reconstruct an initial pressure from a stored exterior data field."""

from config import DEFAULT_CFL, DEFAULT_ITERATIONS, DEFAULT_LAMBDA, get_logger
from services.analysis import compare, convergence_rate
from services.field_io import read_field, write_field, write_log, write_pgm
from services.inversion import ReconConfig, reconstruct
from services.phantoms import load_registry, pipeline_for
from tools.manifest import RunManifest

logger = get_logger(__name__)


def run_reconstruct(*, data: str, speed: str, T: float, out_prefix: str,
                    N: int | None = None, a: float | None = None,
                    lam: float = DEFAULT_LAMBDA, iters: int = DEFAULT_ITERATIONS,
                    tol: float = 0.0, truth: str | None = None,
                    cfl: float = DEFAULT_CFL) -> RunManifest:
    """Run the iteration on the data grid and write the reconstruction, its log
    and PGM previews; with ``truth`` also the pointwise error image."""
    rc = ReconConfig(lam=lam, max_iter=iters, tol=tol)
    g = read_field(data)
    if N is not None and N != g.grid.N:
        raise ValueError(f"--N {N} does not match the data grid N={g.grid.N} in {data}")
    if a is not None and a != g.grid.a:
        raise ValueError(f"--a {a} does not match the data box half-width a={g.grid.a} in {data}")

    cfg = pipeline_for(g.grid.N, T, speed, a=g.grid.a, cfl=cfl)
    f_true = None
    if truth is not None:
        f_true = read_field(truth)
        if not f_true.grid.same_as(g.grid):
            raise ValueError(
                f"Truth grid (N={f_true.grid.N}, a={f_true.grid.a}) does not match the data grid "
                f"(N={g.grid.N}, a={g.grid.a})"
            )

    logger.info(f"[RECON] {data}: N={g.grid.N}, T={T}, speed={speed}, lambda={lam}, iters={iters}")
    result = reconstruct(g, cfg, rc, f_true=f_true)

    artifacts = {
        "reconstruction": f"{out_prefix}_rec.ff",
        "reconstruction_image": f"{out_prefix}_rec.pgm",
        "log": f"{out_prefix}_log.csv",
    }
    write_field(result.f_rec, artifacts["reconstruction"])
    write_pgm(result.f_rec, artifacts["reconstruction_image"])
    write_log(result.log, artifacts["log"])

    results = {"iterations": result.iterations, "final_residual_h10": result.log.residuals[-1]}
    if f_true is not None:
        report = compare(result.f_rec, f_true, cfg.dom)
        artifacts["error_image"] = f"{out_prefix}_error.pgm"
        write_pgm(report.pointwise, artifacts["error_image"])
        results.update(report.as_dict())
        results["rate"] = convergence_rate(result.relative_errors())

    manifest = RunManifest(
        command="reconstruct",
        params={
            "data": data,
            "speed": speed,
            "T": float(T),
            "N": g.grid.N,
            "a": g.grid.a,
            "lam": rc.lam,
            "iters": rc.max_iter,
            "tol": rc.tol,
            "truth": truth,
            "cfl": cfl,
            "out_prefix": out_prefix,
        },
        artifacts=artifacts,
        results=results,
        registry_version=load_registry().version,
    )
    manifest.save(f"{out_prefix}_manifest.json")
    return manifest


def format_reconstruction(manifest: RunManifest) -> str:
    r = manifest.results
    line = f"iterations: {r['iterations']} | final residual H1_0: {r['final_residual_h10']:.4e}"
    if "l2_rel" in r:
        line += f" | rel L2: {r['l2_rel']:.4e} | rel H1_0: {r['h10_rel']:.4e} | max abs: {r['max_abs']:.4e}"
    return line
