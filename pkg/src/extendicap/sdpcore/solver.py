"""Top-level SDP solve: presolve, interior point, solution assembly."""

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ipm import solve_lmi
from .problem import (
    SdpProblem,
    SdpSolution,
    block_materialization,
    coords_to_herm,
    coords_to_sym,
)
from .reduce import reduce_problem


@dataclass
class SolveOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200


def _materialize_columns(spec, phi, cols):
    """Stack of real symmetric matrices for the given coordinate columns."""
    n = spec.real_dim
    dense = phi @ cols  # (n*n, k)
    return np.ascontiguousarray(dense.T.reshape(cols.shape[1], n, n))


def solve(problem: SdpProblem, opts: SolveOptions = None) -> SdpSolution:
    """Solve a standard-form SDP.

    Returns an :class:`SdpSolution`; ``status`` is ``optimal`` only when the
    duality gap and both feasibility residuals meet the tolerances.  On
    numerical breakdown the best iterate is returned with status
    ``max_iter`` -- never a silently wrong answer.
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()

    E = problem.equality_matrix()
    e = problem.rhs_vector()
    c = problem.objective_vector()

    red = reduce_problem(problem)
    if not red.consistent:
        return _solution_from_coords(
            problem, red.x0, np.zeros(problem.nrows), "infeasible",
            iterations=0, wall=time.perf_counter() - t0,
            notes=f"equality system inconsistent, residual {red.residual:.3e}",
        )

    Z = red.basis
    x0 = red.x0

    # prune directions with no PSD-block footprint: pure free-variable rays
    nblockcoord = problem.ncoord - problem.nfree
    if Z.shape[1]:
        block_part = np.linalg.norm(Z[:nblockcoord, :], axis=0)
        footprint = block_part > 1e-12
        g_all = Z.T @ c
        loose = ~footprint
        if np.any(np.abs(g_all[loose]) > 1e-10):
            return _solution_from_coords(
                problem, x0, np.zeros(problem.nrows), "unbounded",
                iterations=0, wall=time.perf_counter() - t0,
                notes="free direction with nonzero objective",
            )
        Z = Z[:, footprint]
    g = Z.T @ c

    # LMI data per block; blocks untouched by variables still get checked
    phis = {spec.name: block_materialization(spec) for spec in problem.blocks}
    lmi_blocks = []
    lmi_specs = []
    fixed_specs = []
    for spec in problem.blocks:
        lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
        zb = Z[lo:hi, :]
        f0 = _materialize_columns(spec, phis[spec.name], x0[lo:hi].reshape(-1, 1))[0]
        if zb.size and np.linalg.norm(zb) > 1e-14:
            fs = _materialize_columns(spec, phis[spec.name], zb)
            lmi_blocks.append((f0, fs))
            lmi_specs.append(spec)
        else:
            fixed_specs.append((spec, f0))

    # blocks fully pinned by the equalities must already be PSD
    pinned_mineig = 0.0
    for spec, f0 in fixed_specs:
        if f0.size:
            pinned_mineig = min(pinned_mineig, float(np.linalg.eigvalsh(f0)[0]))

    m = Z.shape[1]
    if m == 0 or not lmi_specs:
        status = "optimal" if pinned_mineig >= -1e-9 else "infeasible"
        notes = "" if status == "optimal" else (
            f"pinned block has min eigenvalue {pinned_mineig:.3e}"
        )
        y = _recover_multipliers(E, c)
        return _solution_from_coords(
            problem, x0, y, status, iterations=0,
            wall=time.perf_counter() - t0, notes=notes,
        )

    res = solve_lmi(
        g, lmi_blocks, gap_tol=opts.gap_tol, feas_tol=opts.feas_tol,
        max_iter=opts.max_iter,
    )
    status = res.status
    if status == "optimal" and pinned_mineig < -1e-9:
        status = "infeasible"

    x = x0 + Z @ res.u

    # dual recovery: original dual slack is the IPM's Y; multipliers from
    # least squares on  E^T y = c - vec(Y)
    s_coords = np.zeros(problem.ncoord)
    for spec, Yb in zip(lmi_specs, res.Y):
        lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
        s_coords[lo:hi] = phis[spec.name].T @ Yb.ravel()
    y = _recover_multipliers(E, c - s_coords)

    sol = _solution_from_coords(
        problem, x, y, status, iterations=res.iterations,
        wall=time.perf_counter() - t0, notes=res.notes,
    )
    return sol


def _recover_multipliers(E, r):
    if E.shape[0] == 0:
        return np.zeros(0)
    out = spla.lsqr(E.T.tocsr(), r, atol=1e-14, btol=1e-14, iter_lim=20 * E.shape[0])
    return out[0]


def _solution_from_coords(problem, x, y, status, iterations, wall, notes=""):
    primal_blocks = {
        spec.name: problem.block_value_from_coords(spec.name, x)
        for spec in problem.blocks
    }
    free_values = {
        name: problem.free_value_from_coords(name, x) for name in problem.free_names
    }
    c = problem.objective_vector()
    e = problem.rhs_vector()
    E = problem.equality_matrix()
    pobj = float(c @ x)
    if y is None or (hasattr(y, "size") and y.size == 0 and problem.nrows > 0):
        y = np.zeros(problem.nrows)
    dobj = float(e @ y) if problem.nrows else 0.0

    slack_coords = c - (E.T @ y if problem.nrows else c * 0.0)
    dual_slacks = {}
    slack_mineig = 0.0
    for spec in problem.blocks:
        lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
        if spec.complex:
            s_b = coords_to_herm(slack_coords[lo:hi] * 2.0, spec.dim)
        else:
            s_b = coords_to_sym(slack_coords[lo:hi], spec.dim)
        dual_slacks[spec.name] = s_b
        if s_b.size:
            slack_mineig = min(slack_mineig, float(np.linalg.eigvalsh(s_b)[0]))

    resid = E @ x - e if problem.nrows else np.zeros(0)
    primal_residual = float(np.max(np.abs(resid))) if resid.size else 0.0
    nfree0 = problem.ncoord - problem.nfree
    free_resid = (
        float(np.max(np.abs(slack_coords[nfree0:]))) if problem.nfree else 0.0
    )
    dual_residual = max(free_resid, -slack_mineig)

    return SdpSolution(
        status=status,
        primal_blocks=primal_blocks,
        free_values=free_values,
        primal_objective=pobj,
        dual_objective=dobj,
        duality_gap=pobj - dobj,
        dual_multipliers=np.asarray(y, dtype=float),
        dual_slacks=dual_slacks,
        primal_residual=primal_residual,
        dual_residual=dual_residual,
        iterations=iterations,
        wall_time=wall,
        notes=notes,
    )
