"""Independent verification of SDP solutions.

Recomputes every residual from the problem data and the solution values
alone; nothing here touches solver internals.
"""

from dataclasses import dataclass

import numpy as np

from .problem import SdpProblem, SdpSolution
from ..errors import ValidationError


@dataclass
class ResidualReport:
    equality_residual: float       # max |<A_i, X> + a_i.z - b_i|
    primal_psd_violation: float    # max_b max(0, -lambda_min(X_b))
    dual_psd_violation: float      # same for the dual slacks C - A*(y)
    dual_slack_mismatch: float     # stored slack vs recomputed C - A*(y)
    dual_free_residual: float      # |(c - E^T y)_free|
    primal_objective: float
    dual_objective: float
    gap: float
    weak_duality_ok: bool

    def max_residual(self) -> float:
        return max(
            self.equality_residual,
            self.primal_psd_violation,
            self.dual_psd_violation,
            self.dual_free_residual,
        )


def verify_solution(problem: SdpProblem, sol: SdpSolution,
                    weak_duality_slack: float = 1e-7) -> ResidualReport:
    for spec in problem.blocks:
        if spec.name not in sol.primal_blocks:
            raise ValidationError(f"solution is missing block {spec.name!r}")
        got = np.asarray(sol.primal_blocks[spec.name])
        if got.shape != (spec.dim, spec.dim):
            raise ValidationError(
                f"block {spec.name!r} has shape {got.shape}, expected {(spec.dim, spec.dim)}"
            )
    for name in problem.free_names:
        if name not in sol.free_values:
            raise ValidationError(f"solution is missing free variable {name!r}")
    y = np.asarray(sol.dual_multipliers, dtype=float)
    if y.shape != (problem.nrows,):
        raise ValidationError(
            f"dual multiplier vector has shape {y.shape}, expected ({problem.nrows},)"
        )

    x = problem.coords_of_solution(sol.primal_blocks, sol.free_values)
    E = problem.equality_matrix()
    e = problem.rhs_vector()
    c = problem.objective_vector()

    eq = E @ x - e if problem.nrows else np.zeros(0)
    eq_res = float(np.max(np.abs(eq))) if eq.size else 0.0

    primal_viol = 0.0
    for spec in problem.blocks:
        mat = np.asarray(sol.primal_blocks[spec.name])
        if mat.size:
            lam = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)[0])
            primal_viol = max(primal_viol, -min(lam, 0.0))

    slack_coords = c - (E.T @ y if problem.nrows else 0.0 * c)
    dual_viol = 0.0
    slack_mismatch = 0.0
    for spec in problem.blocks:
        lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
        if spec.complex:
            from .problem import coords_to_herm

            s_b = coords_to_herm(slack_coords[lo:hi] * 2.0, spec.dim)
        else:
            from .problem import coords_to_sym

            s_b = coords_to_sym(slack_coords[lo:hi], spec.dim)
        if s_b.size:
            lam = float(np.linalg.eigvalsh((s_b + s_b.conj().T) / 2.0)[0])
            dual_viol = max(dual_viol, -min(lam, 0.0))
        stored = sol.dual_slacks.get(spec.name)
        if stored is not None:
            slack_mismatch = max(
                slack_mismatch, float(np.max(np.abs(np.asarray(stored) - s_b)))
            )

    nblock = problem.ncoord - problem.nfree
    free_res = float(np.max(np.abs(slack_coords[nblock:]))) if problem.nfree else 0.0

    pobj = float(c @ x)
    dobj = float(e @ y) if problem.nrows else 0.0
    gap = pobj - dobj

    return ResidualReport(
        equality_residual=eq_res,
        primal_psd_violation=primal_viol,
        dual_psd_violation=dual_viol,
        dual_slack_mismatch=slack_mismatch,
        dual_free_residual=free_res,
        primal_objective=pobj,
        dual_objective=dobj,
        gap=gap,
        weak_duality_ok=dobj <= pobj + weak_duality_slack,
    )
