"""Primal-dual predictor-corrector interior-point method on affine LMIs.

Solves
    (L)   min  g.u   s.t.   S_b = F0_b + sum_i u_i Fi_b >= 0,
with conic dual
    (L*)  max  -sum_b <F0_b, Y_b>   s.t.   sum_b <Fi_b, Y_b> = g_i,  Y_b >= 0.

The search direction is the HKM direction; one predictor-corrector
(Mehrotra) step per iteration; fraction-to-boundary 0.98; dense Cholesky
of the Schur complement.  Infeasible start: S and Y are initialized to
scaled identities, independent of the affine data.

All matrices are real symmetric.  The implementation is deterministic:
no randomized scaling or pivoting is used.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

TAU = 0.98  # fraction-to-boundary step factor


@dataclass
class IpmResult:
    status: str          # optimal | max_iter | infeasible | unbounded
    u: np.ndarray
    S: list              # per-block primal slack matrices, S_b = F_b(u) at exit
    Y: list              # per-block dual matrices
    pobj: float          # g.u
    dobj: float          # -sum <F0, Y>
    relgap: float
    relp: float          # primal residual of (L): ||F(u) - S||
    reld: float          # dual residual of (L*): ||A(Y) - g||
    iterations: int
    notes: str = ""


def _sym(a):
    return (a + a.T) / 2.0


def _max_step(x, dx):
    """Largest alpha with x + alpha dx >= 0 (x assumed PD)."""
    if not np.all(np.isfinite(dx)):
        return 0.0
    try:
        L = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        jitter = max(np.trace(x) / x.shape[0], 1.0) * 1e-12
        L = np.linalg.cholesky(x + jitter * np.eye(x.shape[0]))
    w = sla.solve_triangular(L, dx, lower=True)
    w = sla.solve_triangular(L, w.T, lower=True)
    lam_min = float(np.linalg.eigvalsh(_sym(w))[0])
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


class _BlockData:
    """Per-block coefficient stack: F (m, n, n) and flat views."""

    def __init__(self, F0, Fstack):
        self.F0 = F0
        self.F = Fstack                       # (m, n, n)
        self.n = F0.shape[0]
        self.m = Fstack.shape[0]
        self.Fflat = Fstack.reshape(Fstack.shape[0], -1)
        self.Fcat = Fstack.reshape(Fstack.shape[0] * self.n, self.n)
        self.F0norm = float(np.linalg.norm(F0))

    def schur_term(self, Yb, Sib):
        """Gram matrix T_ij = Tr[F_i S F_j Y], assembled from large GEMMs.

        The coefficient matrices are symmetric, so (F_j S)^T = S F_j; the
        caller symmetrizes T against its transpose.
        """
        m, n = self.m, self.n
        p1 = (self.Fcat @ Sib).reshape(m, n, n)          # F_j S
        p2 = np.ascontiguousarray(p1.transpose(0, 2, 1)).reshape(m * n, n) @ Yb
        return self.Fflat @ p2.reshape(m, n * n).T


def solve_lmi(g, blocks, gap_tol=1e-8, feas_tol=1e-8, max_iter=200):
    """Run the interior-point iteration; ``blocks`` is a list of (F0, Fstack)."""
    m = g.size
    data = [_BlockData(F0, Fs) for F0, Fs in blocks]
    ntot = sum(b.n for b in data)
    if ntot == 0:
        return IpmResult("optimal", np.zeros(m), [], [], 0.0, 0.0, 0.0, 0.0, 0.0, 0)

    gnorm = float(np.max(np.abs(g))) if m else 0.0
    fnorm = max(b.F0norm for b in data)
    anorm = max(
        (float(np.max(np.abs(b.Fflat))) if b.Fflat.size else 0.0) for b in data
    )
    xi_p = max(10.0, 10.0 * fnorm)
    xi_d = max(10.0, np.sqrt(float(ntot)), 10.0 * gnorm / max(1.0, anorm))

    u = np.zeros(m)
    S = [xi_p * np.eye(b.n) for b in data]
    Y = [xi_d * np.eye(b.n) for b in data]

    def F_of_u(vec):
        return [b.F0 + np.tensordot(vec, b.F, axes=(0, 0)) for b in data]

    def apply_A(mats):
        """A(Y)_i = sum_b <Fi_b, Y_b>."""
        out = np.zeros(m)
        for b, Yb in zip(data, mats):
            out += b.Fflat @ Yb.ravel()
        return out

    status = "max_iter"
    notes = ""
    it = 0
    relgap = relp = reld = np.inf

    for it in range(1, max_iter + 1):
        Fu = F_of_u(u)
        Rp = [Fu_b - S_b for Fu_b, S_b in zip(Fu, S)]        # primal resid blocks
        Rd = g - apply_A(Y)                                   # dual resid vector

        mu = sum(float(np.vdot(Yb, Sb)) for Yb, Sb in zip(Y, S)) / ntot
        pobj = float(g @ u)
        dobj = -sum(float(np.vdot(b.F0, Yb)) for b, Yb in zip(data, Y))
        gap = sum(float(np.vdot(Yb, Sb)) for Yb, Sb in zip(Y, S))
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        relp = max(float(np.max(np.abs(Rpb))) if Rpb.size else 0.0 for Rpb in Rp)
        relp /= 1.0 + fnorm
        reld = (float(np.max(np.abs(Rd))) if m else 0.0) / (1.0 + gnorm)

        if relgap <= gap_tol and relp <= feas_tol and reld <= feas_tol:
            status = "optimal"
            break

        # divergence heuristics
        scale0 = xi_p + xi_d
        if np.max(np.abs(u)) > 1e13 * max(1.0, scale0) and relp <= 1e-6:
            status = "unbounded" if pobj < -1e10 else "max_iter"
            notes = "iterates diverged"
            break
        ynorm = max(float(np.max(np.abs(Yb))) for Yb in Y)
        if ynorm > 1e13 * max(1.0, xi_d):
            status = "infeasible"
            notes = "dual iterates diverged"
            break

        # factorizations
        Sinv = []
        try:
            for Sb in S:
                L = np.linalg.cholesky(Sb)
                Linv = sla.solve_triangular(L, np.eye(Sb.shape[0]), lower=True)
                Sinv.append(Linv.T @ Linv)
        except np.linalg.LinAlgError:
            status = "max_iter"
            notes = "slack lost positive definiteness"
            break

        # Schur complement M_ij = <Fi, Y Fj Sinv> (symmetrized)
        M = np.zeros((m, m))
        hvec = np.zeros(m)
        for b, Yb, Sib in zip(data, Y, Sinv):
            M += b.schur_term(Yb, Sib)
            hvec += b.Fflat @ Sib.ravel()
        M = _sym(M)
        qvec = apply_A(Y)

        def schur_solve(rhs):
            reg = 0.0
            base = float(np.trace(M)) / max(1, m)
            for _ in range(8):
                try:
                    cf = sla.cho_factor(M + reg * np.eye(m), lower=True)
                    return sla.cho_solve(cf, rhs)
                except np.linalg.LinAlgError:
                    reg = max(reg * 100.0, base * 1e-14, 1e-300)
            return np.linalg.lstsq(M, rhs, rcond=None)[0]

        def direction(nu, corr):
            """Solve the Newton system for target nu, with optional
            second-order correction terms corr[b] = dYa_b dSa_b."""
            w = np.zeros(m)
            for bi, (b, Yb, Sib, Rpb) in enumerate(zip(data, Y, Sinv, Rp)):
                t = Yb @ Rpb
                if corr is not None:
                    t = t + corr[bi]
                w += b.Fflat @ (t @ Sib).ravel()
            rhs = -Rd + nu * hvec - qvec - w
            du = schur_solve(rhs)
            dS = [np.tensordot(du, b.F, axes=(0, 0)) + Rpb for b, Rpb in zip(data, Rp)]
            dY = []
            for bi, (b, Yb, Sib, dSb) in enumerate(zip(data, Y, Sinv, dS)):
                t = Yb @ dSb
                if corr is not None:
                    t = t + corr[bi]
                dY.append(_sym(nu * Sib - Yb - t @ Sib))
            return du, dS, dY

        # predictor
        du_a, dS_a, dY_a = direction(0.0, None)
        ap = min(1.0, TAU * min(_max_step(Sb, dSb) for Sb, dSb in zip(S, dS_a)))
        ad = min(1.0, TAU * min(_max_step(Yb, dYb) for Yb, dYb in zip(Y, dY_a)))
        num = sum(
            float(np.vdot(Yb + ad * dYb, Sb + ap * dSb))
            for Yb, dYb, Sb, dSb in zip(Y, dY_a, S, dS_a)
        )
        denom = mu * ntot
        sigma = min(1.0, max(1e-8, (max(num, 0.0) / denom) ** 3)) if denom > 0 else 0.1

        # corrector (Mehrotra): include dY_a dS_a in the complementarity rhs
        corr = [dYb @ dSb for dYb, dSb in zip(dY_a, dS_a)]
        du, dS, dY = direction(sigma * mu, corr)

        ap = min(1.0, TAU * min(_max_step(Sb, dSb) for Sb, dSb in zip(S, dS)))
        ad = min(1.0, TAU * min(_max_step(Yb, dYb) for Yb, dYb in zip(Y, dY)))
        if ap < 1e-10 and ad < 1e-10:
            status = "max_iter"
            notes = "step length collapsed"
            break

        u = u + ap * du
        S = [Sb + ap * dSb for Sb, dSb in zip(S, dS)]
        Y = [Yb + ad * dYb for Yb, dYb in zip(Y, dY)]

    pobj = float(g @ u)
    dobj = -sum(float(np.vdot(b.F0, Yb)) for b, Yb in zip(data, Y))
    return IpmResult(
        status=status,
        u=u,
        S=S,
        Y=Y,
        pobj=pobj,
        dobj=dobj,
        relgap=relgap,
        relp=relp,
        reld=reld,
        iterations=it,
        notes=notes,
    )
