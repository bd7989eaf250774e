"""Variable-coefficient finite differences for the manufactured Darcy problem.

Interior nodes carry the conservative flux stencil with conductivities at
half indices, K(x_i +- dx/2, ...); Dirichlet nodes (the two x-extreme faces)
become identity rows with the manufactured head on the right-hand side, and
known Dirichlet values of neighbouring rows are moved to the right-hand
side.  Neumann faces eliminate a ghost node through the centered difference
(h_{+1} - h_{-1})/(2 dx) = dh_mms/dx, keeping second order throughout.

Coefficients embed the 1/dx^2 factors on every axis, so the right-hand side
is the bare source f at interior nodes in all dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import metrics, mms, randfield
from .errors import DomainError, SolverError


@dataclass(frozen=True)
class FdmGrid:
    """Tensor grid with inclusive endpoints; flat indices run x fastest."""

    bounds: tuple
    shape: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "shape", shape)
        if len(bounds) != len(shape) or len(shape) not in (1, 2, 3):
            raise DomainError("grid needs 1-3 axes with matching bounds")
        if any(n < 3 for n in shape):
            raise DomainError("need at least 3 nodes per axis")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.shape)])

    def axes(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.shape)]

    def nodes(self) -> np.ndarray:
        """(n_nodes, dim) coordinates in flat order (x fastest)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel(order="F") for m in mesh])

    def to_array(self, flat: np.ndarray) -> np.ndarray:
        """Reshape a flat solution vector to [ix(, iy(, iz))] layout."""
        return np.asarray(flat).reshape(self.shape, order="F")

    @classmethod
    def from_spec(cls, domain: mms.Domain, spec: randfield.FieldSpec, ratio: float = 0.2) -> "FdmGrid":
        """Resolution rule: per-axis spacing at most `ratio` * lambda."""
        if domain.dim != spec.dim:
            raise DomainError("domain and field dimensions differ")
        shape = []
        for (lo, hi), lam in zip(domain.bounds, spec.lambdas):
            n = int(np.ceil((hi - lo) / (ratio * lam))) + 1
            shape.append(max(n, 3))
        return cls(domain.bounds, tuple(shape))

    @classmethod
    def regular(cls, domain: mms.Domain, shape) -> "FdmGrid":
        return cls(domain.bounds, tuple(shape))


@dataclass(frozen=True)
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray


def _half_index_k(k_fn, grid: FdmGrid, axis: int) -> np.ndarray:
    """K on the axis-staggered grid (shape + 1 along `axis`).

    Sharing one staggered evaluation between the two rows that straddle a
    half index makes the flux-continuity symmetry exact by construction.
    """
    axes = grid.axes()
    lo, _ = grid.bounds[axis]
    d = grid.spacings[axis]
    staggered = lo + (np.arange(grid.shape[axis] + 1) - 0.5) * d
    coords = list(axes)
    coords[axis] = staggered
    mesh = np.meshgrid(*coords, indexing="ij")
    pts = np.column_stack([m.ravel(order="F") for m in mesh])
    vals = k_fn(pts)
    return vals.reshape([len(c) for c in coords], order="F")


def assemble_generic(k_fn, head_fn, grad_fn, source_fn, grid: FdmGrid) -> SparseSystem:
    """Assemble from raw callables; `assemble` wires in a case and a field.

    k_fn(pts)->K, head_fn(pts)->h_mms, grad_fn(pts)->grad h_mms,
    source_fn(pts)->f, each over (n, dim) point stacks.
    """
    dim = grid.dim
    shape = grid.shape
    dx = grid.spacings
    nodes = grid.nodes()
    n = grid.n_nodes

    idx = np.meshgrid(*[np.arange(m) for m in shape], indexing="ij")
    idx = [a.ravel(order="F") for a in idx]
    strides = np.cumprod([1] + list(shape[:-1]))

    def flat(indices):
        return sum(i * s for i, s in zip(indices, strides))

    rows_id = np.arange(n)
    dirichlet = (idx[0] == 0) | (idx[0] == shape[0] - 1)
    active = ~dirichlet

    k_half = [_half_index_k(k_fn, grid, a) for a in range(dim)]

    def half(axis, offset):
        """K at node -dx/2 (offset 0) or +dx/2 (offset 1) along `axis`, flat."""
        sl = [idx[a] for a in range(dim)]
        sl[axis] = idx[axis] + offset
        return k_half[axis][tuple(sl)]

    rhs = np.zeros(n)
    rhs[active] = source_fn(nodes[active])
    rhs[dirichlet] = head_fn(nodes[dirichlet])

    rows, cols, vals = [rows_id[dirichlet]], [rows_id[dirichlet]], [np.ones(int(dirichlet.sum()))]
    diag = np.zeros(n)
    grad_cache = {}

    def neumann_grad(axis):
        if axis not in grad_cache:
            grad_cache[axis] = grad_fn(nodes)[:, axis]
        return grad_cache[axis]

    for a in range(dim):
        km = half(a, 0) / dx[a] ** 2
        kp = half(a, 1) / dx[a] ** 2
        diag -= km + kp
        lo_face = idx[a] == 0
        hi_face = idx[a] == shape[a] - 1
        for sign, coef, fold_mask in ((-1, km, lo_face), (+1, kp, hi_face)):
            neigh = [idx[b] for b in range(dim)]
            neigh[a] = idx[a] + sign
            # Ghost elimination: a node on this face has no `sign` neighbour;
            # its coefficient folds onto the mirrored neighbour and the known
            # normal derivative moves to the right-hand side.
            folded = active & fold_mask
            if folded.any():
                g = neumann_grad(a)
                mirror = [idx[b] for b in range(dim)]
                mirror[a] = idx[a] - sign
                rows.append(rows_id[folded])
                cols.append(flat(mirror)[folded])
                vals.append(coef[folded])
                rhs[folded] -= sign * 2.0 * dx[a] * g[folded] * coef[folded]
            take = active & ~fold_mask
            cols_a = flat(neigh)
            if a == 0:
                # Neighbour may be a Dirichlet node: move K*h_mms to the RHS,
                # evaluated at the neighbour's own grid coordinates.
                neigh_dirichlet = take & ((neigh[0] == 0) | (neigh[0] == shape[0] - 1))
                if neigh_dirichlet.any():
                    npts = nodes[cols_a[neigh_dirichlet]]
                    rhs[neigh_dirichlet] -= coef[neigh_dirichlet] * head_fn(npts)
                    take = take & ~neigh_dirichlet
            rows.append(rows_id[take])
            cols.append(cols_a[take])
            vals.append(coef[take])

    rows.append(rows_id[active])
    cols.append(rows_id[active])
    vals.append(diag[active])

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    return SparseSystem(matrix=matrix, rhs=rhs)


def assemble(real: randfield.FieldRealization, case, grid: FdmGrid) -> SparseSystem:
    """Sparse system for the manufactured problem on this grid."""
    if real.spec.dim != grid.dim or case.dim != grid.dim:
        raise DomainError("realization, case and grid dimensions must agree")
    return assemble_generic(
        lambda pts: randfield.eval_k(real, pts),
        lambda pts: mms.h_exact(case, pts),
        lambda pts: mms.grad_h_exact(case, pts),
        lambda pts: mms.source_f(case, real, pts),
        grid,
    )


def solve(system: SparseSystem, rtol: float = 1e-10) -> np.ndarray:
    """Direct sparse solve; enforces ||A h - b||_inf <= rtol * ||b||_inf."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=spla.MatrixRankWarning)
        solution = spla.spsolve(system.matrix.tocsc(), system.rhs)
    residual = np.abs(system.matrix @ solution - system.rhs).max() if np.all(
        np.isfinite(solution)
    ) else np.inf
    bound = rtol * max(np.abs(system.rhs).max(), 1e-300)
    if not np.isfinite(residual) or residual > bound:
        raise SolverError(f"sparse solve residual {residual:.3e} exceeds bound {bound:.3e}")
    return solution


def fdm_relative_error(solution: np.ndarray, case, grid: FdmGrid) -> float:
    """delta_h of a grid solution against the manufactured head."""
    return metrics.relative_error(solution, mms.h_exact(case, grid.nodes()))


def solve_case(real, case, grid: FdmGrid, rtol: float = 1e-10):
    """Assemble + solve + score -> (solution vector, delta_h)."""
    solution = solve(assemble(real, case, grid), rtol=rtol)
    return solution, fdm_relative_error(solution, case, grid)


def convergence_order(errors, spacings) -> list:
    """Observed orders from successive (error, spacing) refinements."""
    orders = []
    for (e1, h1), (e2, h2) in zip(zip(errors, spacings), zip(errors[1:], spacings[1:])):
        orders.append(float(np.log(e1 / e2) / np.log(h1 / h2)))
    return orders


def export_solution(path, grid: FdmGrid, solution: np.ndarray) -> None:
    """Head snapshot in the shared grid-file format."""
    randfield.write_grid_file(path, grid.bounds, grid.shape, grid.to_array(solution))
