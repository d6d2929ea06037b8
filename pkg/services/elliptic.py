"""Discrete harmonic extension into I and the projection onto H^1_0.

The Dirichlet problem uses the 5-point stencil on I with boundary values read
from dI, solved by Jacobi-scaled conjugate gradient.
"""

import functools
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from config import CG_MAXITER_FACTOR, CG_TOL, get_logger
from services.errors import DirichletSolveError
from services.grid import DiscreteDomain
from services.wave import ScalarField

logger = get_logger(__name__)

_NEIGHBOR_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class DirichletSolveOptions:
    """CG stopping rule. ``max_iter=None`` means CG_MAXITER_FACTOR * N^2."""

    tol: float = CG_TOL
    max_iter: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"Dirichlet solve tolerance must be positive, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    def resolve_max_iter(self, N: int) -> int:
        return self.max_iter if self.max_iter is not None else CG_MAXITER_FACTOR * N * N


@dataclass(frozen=True, eq=False)
class _LaplaceSystem:
    """A u = B g for the unknowns u on I; B gathers boundary values from dI."""

    matrix: sparse.csr_matrix
    coupling: sparse.csr_matrix
    preconditioner: sparse.dia_matrix


@functools.lru_cache(maxsize=16)
def _laplace_system(dom: DiscreteDomain) -> _LaplaceSystem:
    N = dom.grid.N
    inside_idx = np.argwhere(dom.inside)
    n = len(inside_idx)
    unknown = -np.ones(dom.grid.shape, dtype=np.int64)
    unknown[dom.inside] = np.arange(n)

    rows, cols = [np.arange(n)], [np.arange(n)]
    data = [np.full(n, 4.0)]
    b_rows, b_cols = [], []
    for d1, d2 in _NEIGHBOR_OFFSETS:
        j1 = inside_idx[:, 0] + d1
        j2 = inside_idx[:, 1] + d2
        on_grid = (j1 >= 0) & (j1 < N) & (j2 >= 0) & (j2 < N)
        src = np.nonzero(on_grid)[0]
        j1, j2 = j1[on_grid], j2[on_grid]
        nbr = unknown[j1, j2]
        interior = nbr >= 0
        rows.append(src[interior])
        cols.append(nbr[interior])
        data.append(np.full(int(interior.sum()), -1.0))
        b_rows.append(src[~interior])
        b_cols.append(j1[~interior] * N + j2[~interior])

    matrix = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    b_rows_all = np.concatenate(b_rows)
    coupling = sparse.csr_matrix(
        (np.ones(len(b_rows_all)), (b_rows_all, np.concatenate(b_cols))), shape=(n, N * N)
    )
    preconditioner = sparse.diags(1.0 / matrix.diagonal())
    logger.debug(f"[CG] Assembled 5-point system: {n} unknowns, {matrix.nnz} nonzeros")
    return _LaplaceSystem(matrix, coupling, preconditioner)


def _solve_dirichlet(boundary_values: np.ndarray, dom: DiscreteDomain,
                     opts: DirichletSolveOptions) -> np.ndarray:
    """Interior values of the discrete harmonic function with the given dI data."""
    system = _laplace_system(dom)
    rhs = system.coupling @ boundary_values.ravel()
    if not np.any(rhs):
        return np.zeros_like(rhs)

    max_iter = opts.resolve_max_iter(dom.grid.N)
    u, info = cg(system.matrix, rhs, rtol=opts.tol, atol=0.0,
                 maxiter=max_iter, M=system.preconditioner)
    if info != 0:
        residual = np.linalg.norm(rhs - system.matrix @ u) / np.linalg.norm(rhs)
        logger.error(f"[CG] No convergence: info={info}, relative residual={residual:.3e}, tol={opts.tol}")
        raise DirichletSolveError(
            f"Conjugate gradient did not converge within {max_iter} iterations "
            f"(relative residual {residual:.3e} > {opts.tol})",
            info=info,
        )
    return u


def harmonic_extension(g: ScalarField, dom: DiscreteDomain,
                       opts: DirichletSolveOptions | None = None) -> ScalarField:
    """Keep g on J and fill I with the discrete harmonic function matching g on dI."""
    opts = opts or DirichletSolveOptions()
    if not g.grid.same_as(dom.grid):
        raise ValueError("Data field and domain live on different grids")
    if dom.n_inside == 0:
        raise ValueError("Harmonic extension needs a non-empty interior set I")

    boundary_values = np.where(dom.boundary, g.values, 0.0)
    out = np.where(dom.exterior, g.values, 0.0)
    out[dom.inside] = _solve_dirichlet(boundary_values, dom, opts)
    return g.with_values(out)


def project_h10(u: ScalarField, dom: DiscreteDomain,
                opts: DirichletSolveOptions | None = None) -> ScalarField:
    """u - h on I, where h is harmonic on I with the trace of u on dI; zero off I."""
    h = harmonic_extension(u.masked(dom.boundary), dom, opts)
    return u.with_values(np.where(dom.inside, u.values - h.values, 0.0))


def stencil_residual(h: ScalarField, dom: DiscreteDomain) -> ScalarField:
    """5-point defect h(i+e1) + h(i-e1) + h(i+e2) + h(i-e2) - 4 h(i) on I."""
    p = np.pad(h.values, 1)
    defect = p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * h.values
    return h.with_values(np.where(dom.inside, defect, 0.0))
