"""Presolve: eliminate slack-defining rows, then parameterize the equalities.

The solver consumes problems as affine linear matrix inequalities

    min g.u   s.t.   F0_b + sum_i u_i Fi_b  >= 0   for every block b,

obtained by (1) substituting out blocks whose coordinates each appear in
exactly one row (the slack blocks produced when inequalities are lowered
to equalities), and (2) parameterizing the solution set of the remaining
equalities through a dense nullspace basis.  Step (2) absorbs linearly
dependent rows, so builders may emit redundant constraint families.
"""

from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-11


@dataclass
class Reduction:
    """Affine parameterization x = x0 + Z u of the equality set."""

    x0: np.ndarray               # (ncoord,)
    basis: np.ndarray            # (ncoord, m) dense
    consistent: bool
    residual: float              # ||E x0 - e||_inf over kept rows
    eliminated_rows: np.ndarray  # bool mask over original rows

    @property
    def nparams(self) -> int:
        return self.basis.shape[1]


def _find_eliminable(problem, E_csr, E_csc, active_rows, active_cols):
    """First block whose coords each sit in exactly one active row, one per row."""
    for spec in problem.blocks:
        lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
        if hi == lo or not active_cols[lo:hi].all():
            continue
        rows = []
        ok = True
        for c in range(lo, hi):
            touching = [
                int(r)
                for r in E_csc.indices[E_csc.indptr[c]:E_csc.indptr[c + 1]]
                if active_rows[r]
            ]
            if len(touching) != 1:
                ok = False
                break
            r = touching[0]
            seg = slice(E_csr.indptr[r], E_csr.indptr[r + 1])
            row_cols = E_csr.indices[seg]
            if np.count_nonzero((row_cols >= lo) & (row_cols < hi)) != 1:
                ok = False
                break
            rows.append(r)
        if ok and len(set(rows)) == len(rows):
            return spec, list(range(lo, hi)), rows
    return None


def reduce_problem(problem) -> Reduction:
    E_csr = problem.equality_matrix()
    E_csc = E_csr.tocsc()
    e = problem.rhs_vector()
    ncoord = problem.ncoord
    nrows = problem.nrows

    active_rows = np.ones(nrows, dtype=bool)
    active_cols = np.ones(ncoord, dtype=bool)
    elim_entries = []  # (col, defining row, gamma)

    while True:
        found = _find_eliminable(problem, E_csr, E_csc, active_rows, active_cols)
        if found is None:
            break
        _, cols, rows = found
        for c, r in zip(cols, rows):
            seg = slice(E_csr.indptr[r], E_csr.indptr[r + 1])
            row_cols = E_csr.indices[seg]
            row_vals = E_csr.data[seg]
            gamma = float(row_vals[row_cols == c][0])
            elim_entries.append((c, r, gamma))
            active_rows[r] = False
            active_cols[c] = False

    kept_cols = np.nonzero(active_cols)[0]
    kept_rows = np.nonzero(active_rows)[0]
    Ek = E_csr[kept_rows][:, kept_cols]
    ek = e[kept_rows]

    nk = kept_cols.size
    if Ek.shape[0] == 0 or Ek.nnz == 0:
        x0k = np.zeros(nk)
        Zk = np.eye(nk)
        resid = float(np.max(np.abs(ek))) if ek.size else 0.0
        consistent = resid <= 1e-9
    else:
        G = (Ek.T @ Ek).toarray()
        w, V = np.linalg.eigh(G)
        wmax = float(w[-1]) if w.size else 0.0
        tol = max(wmax * RANK_RTOL, 1e-300)
        null_mask = w <= tol
        Zk = V[:, null_mask]
        rhs_t = V.T @ (Ek.T @ ek)
        coef = np.zeros_like(rhs_t)
        coef[~null_mask] = rhs_t[~null_mask] / w[~null_mask]
        x0k = V @ coef
        resid_vec = Ek @ x0k - ek
        resid = float(np.max(np.abs(resid_vec))) if resid_vec.size else 0.0
        scale = 1.0 + (float(np.max(np.abs(ek))) if ek.size else 0.0)
        consistent = resid <= 1e-7 * scale

    m = Zk.shape[1]
    x0 = np.zeros(ncoord)
    Z = np.zeros((ncoord, m))
    x0[kept_cols] = x0k
    Z[kept_cols] = Zk

    # Eliminated coordinate c with defining row r:
    #   x_c = (e_r - sum_{c' != c} E[r, c'] x_{c'}) / gamma.
    # A defining row can reference coordinates eliminated *later* but never
    # earlier ones, so reverse elimination order fills dependencies first.
    for c, r, gamma in reversed(elim_entries):
        seg = slice(E_csr.indptr[r], E_csr.indptr[r + 1])
        row_cols = E_csr.indices[seg]
        row_vals = E_csr.data[seg]
        acc0 = e[r]
        zrow = np.zeros(m)
        for cc, vv in zip(row_cols, row_vals):
            if cc == c:
                continue
            acc0 -= vv * x0[cc]
            zrow -= vv * Z[cc]
        x0[c] = acc0 / gamma
        Z[c] = zrow / gamma

    return Reduction(
        x0=x0,
        basis=Z,
        consistent=bool(consistent),
        residual=resid,
        eliminated_rows=~active_rows,
    )
