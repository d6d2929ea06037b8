"""Command-line entry point for the full-field photoacoustic toolkit.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure (also a
failed contraction check).
"""

import argparse
import sys

from config import (
    DEFAULT_CFL,
    DEFAULT_ITERATIONS,
    DEFAULT_LAMBDA,
    DEFAULT_N,
    DEFAULT_OVERSAMPLE,
    DEFAULT_SEED,
    EXPERIMENT_WORKERS,
    get_logger,
)
from services.errors import NumericalError
from services.experiment_runner import EXPERIMENTS
from services.phantoms import PHANTOM_ALIASES, SPEED_ALIASES
from tools.contraction import format_contraction, run_contraction
from tools.experiment import run_experiment
from tools.manifest import format_artifacts
from tools.reconstruct import format_reconstruction, run_reconstruct
from tools.replay import run_replay
from tools.simulate import run_simulate

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse with a one-line diagnosis and exit code 1 on bad flags."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _lambda_value(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 2.0:
        raise argparse.ArgumentTypeError(f"lambda must lie in (0, 2], got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _add_grid_flags(p: argparse.ArgumentParser, n_default: int | None = DEFAULT_N):
    p.add_argument("--N", type=int, default=n_default, help="grid points per axis (even)")
    p.add_argument("--T", type=float, default=2.0, help="observation time")
    p.add_argument("--a", type=float, default=None, help="box half-width (default T + 1.25)")
    p.add_argument("--cfl", type=float, default=DEFAULT_CFL)


def _cmd_simulate(args) -> int:
    manifest = run_simulate(
        phantom=args.phantom, speed=args.speed, T=args.T, out=args.out, N=args.N, a=args.a,
        oversample=args.oversample, noise=args.noise, seed=args.seed, cfl=args.cfl,
        preview=args.preview,
    )
    print(format_artifacts(manifest))
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    manifest = run_reconstruct(
        data=args.data, speed=args.speed, T=args.T, out_prefix=args.out_prefix, N=args.N,
        a=args.a, lam=args.lam, iters=args.iters, tol=args.tol, truth=args.truth, cfl=args.cfl,
    )
    print(format_artifacts(manifest))
    print(format_reconstruction(manifest))
    return EXIT_OK


def _cmd_contraction(args) -> int:
    estimate = run_contraction(
        lam=args.lam, trials=args.trials, speed=args.speed, T=args.T, N=args.N,
        seed=args.seed, a=args.a, cfl=args.cfl, workers=args.workers,
    )
    print(format_contraction(estimate))
    return EXIT_OK if estimate.max_ratio < 1.0 else EXIT_NUMERICAL


def _cmd_experiment(args) -> int:
    manifest = run_experiment(
        name=args.name, out_dir=args.out_dir, N=args.N, iterations=args.iters,
        oversample=args.oversample, seed=args.seed, cfl=args.cfl, workers=args.workers,
    )
    print(format_artifacts(manifest))
    failed = manifest.results.get("failed", [])
    if failed:
        print(f"failed cells: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_replay(args) -> int:
    manifest = run_replay(args.manifest)
    print(format_artifacts(manifest))
    return EXIT_NUMERICAL if manifest.results.get("failed") else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pat", description="Full-field photoacoustic tomography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate exterior data for a registry phantom")
    p.add_argument("--phantom", choices=sorted(PHANTOM_ALIASES), required=True)
    p.add_argument("--speed", choices=list(SPEED_ALIASES), required=True)
    _add_grid_flags(p)
    p.add_argument("--oversample", type=_positive_int, default=DEFAULT_OVERSAMPLE)
    p.add_argument("--noise", type=_nonnegative_float, default=0.0, help="relative noise level")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="data field path (.ff)")
    p.add_argument("--preview", action="store_true", help="also write a PGM preview")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="run the iterative time-reversal reconstruction")
    p.add_argument("--data", required=True)
    p.add_argument("--speed", choices=list(SPEED_ALIASES), required=True)
    _add_grid_flags(p, n_default=None)
    p.add_argument("--lambda", dest="lam", type=_lambda_value, default=DEFAULT_LAMBDA)
    p.add_argument("--iters", type=_positive_int, default=DEFAULT_ITERATIONS)
    p.add_argument("--tol", type=_nonnegative_float, default=0.0, help="residual stopping threshold")
    p.add_argument("--truth", default=None, help="ground-truth field for error tracking")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(handler=_cmd_reconstruct)

    p = sub.add_parser("contraction", help="estimate the error operator norm on random fields")
    p.add_argument("--lambda", dest="lam", type=_lambda_value, default=DEFAULT_LAMBDA)
    p.add_argument("--trials", type=_positive_int, default=20)
    p.add_argument("--speed", choices=list(SPEED_ALIASES), required=True)
    _add_grid_flags(p)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=_positive_int, default=EXPERIMENT_WORKERS)
    p.set_defaults(handler=_cmd_contraction)

    p = sub.add_parser("experiment", help="reproduce a batch experiment")
    p.add_argument("--name", choices=sorted(EXPERIMENTS), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--N", type=int, default=DEFAULT_N)
    p.add_argument("--iters", type=_positive_int, default=None)
    p.add_argument("--oversample", type=_positive_int, default=DEFAULT_OVERSAMPLE)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--cfl", type=float, default=DEFAULT_CFL)
    p.add_argument("--workers", type=_positive_int, default=EXPERIMENT_WORKERS)
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("replay", help="re-run a stored manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(handler=_cmd_replay)
    return parser


def _one_line(e: Exception) -> str:
    return " ".join(str(e).split())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except NumericalError as e:
        logger.error(f"[CLI] {args.command} failed numerically: {e}")
        print(f"numerical failure: {_one_line(e)}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
