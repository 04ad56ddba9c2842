"""First-order reference solver (ADMM), used as an independent oracle.

A deliberately different algorithm from the interior-point core: plain
two-block ADMM with an affine projection and a PSD-cone projection.  Slow
but simple; intended for cross-checking optimal values of small problems
in tests, not for production solving.
"""

import numpy as np

from .problem import SdpProblem, block_materialization


def admm_solve(problem: SdpProblem, iters: int = 20000, rho: float = 1.0,
               over_relax: float = 1.6, tol: float = 1e-10):
    """Approximately solve min c.x s.t. Ex = e, blocks PSD.

    Returns (objective_estimate, coords).  Accuracy is typically 1e-5 on
    well-conditioned problems of a few hundred coordinates.
    """
    if problem.ncoord > 4000 or problem.nrows > 4000:
        raise ValueError("first-order oracle is restricted to small problems")

    E = problem.equality_matrix().toarray()
    e = problem.rhs_vector()
    c = problem.objective_vector()
    n = problem.ncoord

    if problem.nrows:
        # affine projection via pseudo-inverse of E
        Epinv = np.linalg.pinv(E, rcond=1e-12)

        def proj_affine(v):
            return v - Epinv @ (E @ v - e)
    else:
        def proj_affine(v):
            return v

    phis = {spec.name: block_materialization(spec).toarray() for spec in problem.blocks}

    def proj_cone(v):
        out = v.copy()
        for spec in problem.blocks:
            lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
            phi = phis[spec.name]
            mat = (phi @ v[lo:hi]).reshape(spec.real_dim, spec.real_dim)
            w, q = np.linalg.eigh((mat + mat.T) / 2.0)
            w = np.clip(w, 0.0, None)
            out[lo:hi] = phi.T @ ((q * w) @ q.T).ravel()
        return out

    x = proj_affine(np.zeros(n))
    z = proj_cone(x)
    w = np.zeros(n)
    for _ in range(iters):
        x = proj_affine(z - w - c / rho)
        x_r = over_relax * x + (1.0 - over_relax) * z
        z_new = proj_cone(x_r + w)
        w = w + x_r - z_new
        if np.max(np.abs(z_new - z)) < tol and np.max(np.abs(x - z_new)) < 1e-8:
            z = z_new
            break
        z = z_new
    xm = (x + z) / 2.0
    return float(c @ xm), xm
