"""SDP upper bounds on the one-shot classical capacity of a channel.

The bound is  C^eps(N) <= -log2 lambda*  where lambda* is the optimum of
a semidefinite program over a state rho_A, a scalar lambda >= 0, and PSD
operators Q^{y_1..y_k} on A B_1..B_k indexed by bit strings:

    sum_y Q^y = rho (x) I                      (completeness)
    Q^y >= 0                                   (positivity)
    W^pi Q^{y o pi} W^pi+ = Q^y                (permutation covariance)
    T_{B_1..B_i}(Q^y) >= 0,  i in [k]          (PPT, optional)
    sum_{y_2..y_k} Tr_A[Q^{(0,...)}] <= lambda I
    sum_{y_k} Tr_A[Q^y] = (1/|B|) sum_{y_k} Tr_{A B_k}[Q^y] (x) I_{B_k}
    (1/|B|^{k-1}) sum_{y_2..y_k} Tr[Q^{(0,...)} (Choi (x) I)] >= 1 - eps

With k = 1 the program has exactly the completeness, positivity, PPT,
eigenvalue-cap and success constraints and no permutation or
non-signaling rows.
"""

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import qlinalg as ql
from ._emit import emit_matrix_equality
from .channels import Channel
from .config import check_dim
from .errors import ValidationError
from .sdpcore import SdpProblem, SolveOptions, solve, verify_solution

EPS_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class CapacityQuery:
    channel: Channel
    epsilon: float
    k: int = 1
    ppt: bool = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon < EPS_MAX:
            raise ValidationError(
                f"epsilon must lie in [0, {EPS_MAX}), got {self.epsilon}"
            )
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")


@dataclass
class BoundResult:
    lambda_star: float
    bound_bits: float
    status: str
    gap: float
    iterations: int
    wall_ms: float
    rho: ql.Operator = None
    q_ops: dict = None              # y-tuple -> Operator on A B_1..B_k
    witness_residuals: dict = field(default_factory=dict)

    @property
    def reliable(self) -> bool:
        return self.status == "optimal"


def _ext_layout(q: CapacityQuery) -> ql.SystemLayout:
    d_a, d_b = q.channel.dim_in, q.channel.dim_out
    subs = [("A", d_a)] + [(f"B{i}", d_b) for i in range(1, q.k + 1)]
    return ql.SystemLayout(tuple(subs))


def _sorted_rep(y):
    return tuple(sorted(y))


def build_capacity_sdp(q: CapacityQuery, reduce_labels: bool = False) -> SdpProblem:
    """Assemble the capacity SDP in standard form.

    ``reduce_labels`` keeps matrix variables only for sorted outcome
    tuples, replacing the rest by permutation conjugations; the optimal
    value is unchanged (the full permutation-covariance orbit is encoded
    either way) and the default emits every label explicitly.
    """
    k = q.k
    d_a, d_b = q.channel.dim_in, q.channel.dim_out
    lay = _ext_layout(q)
    check_dim(lay.total_dim, "capacity SDP operator")
    d_x = lay.total_dim
    d_ball = d_b ** k
    b_sys = [f"B{i}" for i in range(1, k + 1)]
    ball_layout = ql.SystemLayout(tuple(lay.subsystems[1:]))

    y_tuples = list(itertools.product((0, 1), repeat=k))
    reps = sorted({_sorted_rep(y) for y in y_tuples}) if reduce_labels else y_tuples

    prob = SdpProblem()
    for y in reps:
        prob.add_psd_block(f"Q{y!r}", d_x, complex=True)
    prob.add_psd_block("rho", d_a, complex=True)
    prob.add_psd_block("lam", 1)
    prob.add_psd_block("cap_slack", d_ball, complex=True)
    prob.add_psd_block("succ_slack", 1)
    if q.ppt:
        for y in y_tuples:
            for i in range(1, k + 1):
                prob.add_psd_block(f"ppt{i}|{y!r}", d_x, complex=True)
    prob.add_objective({"lam": np.array([[1.0]])})

    if reduce_labels:
        perm_of = {y: tuple(int(i) for i in np.argsort(np.asarray(y), kind="stable"))
                   for y in y_tuples}
        w_of = {
            y: ql.permutation_unitary(lay, b_sys, list(perm_of[y])).entries
            for y in y_tuples
        }

        def q_term(y, post=None):
            """(block name, adjoint) realizing Q^y = W Q^{rep} W+, optionally
            composed with a further linear map given by its adjoint."""
            w = w_of[y]

            def adjoint(e, w=w, post=post):
                if post is not None:
                    e = post(e)
                return w.conj().T @ e @ w

            return (f"Q{_sorted_rep(y)!r}", adjoint)
    else:

        def q_term(y, post=None):
            def adjoint(e, post=post):
                return post(e) if post is not None else e

            return (f"Q{y!r}", adjoint)

    # (completeness) sum_y Q^y = rho (x) I
    def adj_rho(e):
        return -ql.partial_trace(ql.Operator(lay, e), set(b_sys)).entries

    emit_matrix_equality(
        prob, d_x,
        [q_term(y) for y in y_tuples] + [("rho", adj_rho)],
        tag="completeness",
    )
    prob.add_equality({"rho": np.eye(d_a)}, rhs=1.0, tag="rho-trace")

    # (permutation covariance) explicit ties; with label reduction every
    # cross-label relation holds by construction and only the stabilizer
    # conjugations of each representative carry content
    if k >= 2:
        perms = [p for p in itertools.permutations(range(k)) if p != tuple(range(k))]

        def emit_perm_tie(p, src, y):
            w = ql.permutation_unitary(lay, b_sys, list(p)).entries

            def adj_conj(e, w=w):
                return w.conj().T @ e @ w

            pos = q_term(src, post=adj_conj)
            neg_name, neg_adj = q_term(y)
            emit_matrix_equality(
                prob, d_x,
                [pos, (neg_name, lambda e, f=neg_adj: -f(e))],
                tag="perm",
            )

        if reduce_labels:
            for yc in reps:
                for p in perms:
                    if tuple(yc[p[i]] for i in range(k)) == yc:
                        emit_perm_tie(p, yc, yc)
        else:
            seen = set()
            for p in perms:
                inv = tuple(int(i) for i in np.argsort(p))
                for y in y_tuples:
                    src = tuple(y[p[i]] for i in range(k))
                    if (inv, src) in seen:
                        continue
                    seen.add((p, y))
                    emit_perm_tie(p, src, y)

    # (PPT) T_{B_1..B_i}(Q^y) >= 0 via linked slack blocks
    if q.ppt:
        for y in y_tuples:
            for i in range(1, k + 1):
                prefix = set(b_sys[:i])

                def adj_pt(e, prefix=prefix):
                    return -ql.partial_transpose(ql.Operator(lay, e), prefix).entries

                emit_matrix_equality(
                    prob, d_x,
                    [(f"ppt{i}|{y!r}", lambda e: e), q_term(y, post=adj_pt)],
                    tag="ppt",
                )

    # (eigenvalue cap) cap_slack = lambda I - sum_{y_2..} Tr_A[Q^{(0,...)}]
    def adj_tr_a(e):
        return np.kron(np.eye(d_a), e)

    cap_terms = [
        ("cap_slack", lambda e: e),
        ("lam", lambda e: np.array([[-float(np.real(np.trace(e)))]])),
    ]
    for y in y_tuples:
        if y[0] == 0:
            cap_terms.append(q_term(y, post=adj_tr_a))
    emit_matrix_equality(prob, d_ball, cap_terms, tag="cap")

    # (non-signaling) rows over the B systems; absent for k = 1
    if k >= 2:
        def adj_tr_a_bk_tensor(e):
            op = ql.Operator(ball_layout, e)
            reduced = ql.partial_trace(op, {b_sys[-1]}).entries
            return np.kron(np.eye(d_a), np.kron(reduced, np.eye(d_b)))

        for y_head in itertools.product((0, 1), repeat=k - 1):
            terms = []
            for yk in (0, 1):
                y = y_head + (yk,)
                terms.append(q_term(y, post=adj_tr_a))
                terms.append(
                    q_term(y, post=lambda e: -adj_tr_a_bk_tensor(e) / d_b)
                )
            emit_matrix_equality(prob, d_ball, terms, tag="nonsig")

    # (success) (1/|B|^{k-1}) sum_{y_2..} Tr[Q^{(0,...)} (Choi (x) I)] - s = 1 - eps
    gamma_ext = np.kron(q.channel.choi.entries, np.eye(d_b ** (k - 1)))
    coeffs = {"succ_slack": np.array([[-1.0]])}
    scale = 1.0 / d_b ** (k - 1)
    for y in y_tuples:
        if y[0] != 0:
            continue
        name, adjoint = q_term(y)
        mat = adjoint(scale * gamma_ext)
        coeffs[name] = coeffs.get(name, 0) + mat
    prob.add_equality(coeffs=coeffs, rhs=1.0 - q.epsilon, tag="success")
    return prob


def witness_residuals(q: CapacityQuery, rho: ql.Operator, q_ops: dict,
                      lam: float) -> dict:
    """Residuals of all capacity constraints, computed without the solver."""
    k = q.k
    d_a, d_b = q.channel.dim_in, q.channel.dim_out
    lay = _ext_layout(q)
    b_sys = [f"B{i}" for i in range(1, k + 1)]
    y_tuples = list(itertools.product((0, 1), repeat=k))

    res = {}
    total = sum(q_ops[y].entries for y in y_tuples)
    target = np.kron(rho.entries, np.eye(d_b ** k))
    res["completeness"] = float(np.linalg.norm(total - target, 2))
    res["rho-trace"] = abs(float(np.real(rho.trace())) - 1.0)
    res["rho-psd"] = max(0.0, -ql.min_eig(rho))
    res["positivity"] = max(0.0, -min(ql.min_eig(q_ops[y]) for y in y_tuples))

    if k >= 2:
        perm = 0.0
        for p in itertools.permutations(range(k)):
            if p == tuple(range(k)):
                continue
            w = ql.permutation_unitary(lay, b_sys, list(p)).entries
            for y in y_tuples:
                src = tuple(y[p[i]] for i in range(k))
                lhs = w @ q_ops[src].entries @ w.conj().T
                perm = max(perm, float(np.linalg.norm(lhs - q_ops[y].entries, 2)))
        res["perm"] = perm

    if q.ppt:
        viol = 0.0
        for y in y_tuples:
            for i in range(1, k + 1):
                pt = ql.partial_transpose(q_ops[y], set(b_sys[:i]))
                viol = max(viol, max(0.0, -ql.min_eig(pt)))
        res["ppt"] = viol

    cap = sum(
        ql.partial_trace(q_ops[y], {"A"}).entries for y in y_tuples if y[0] == 0
    )
    res["cap"] = max(0.0, float(np.linalg.eigvalsh(
        (cap + cap.conj().T) / 2.0 - lam * np.eye(d_b ** k)
    )[-1]))

    if k >= 2:
        ns = 0.0
        for y_head in itertools.product((0, 1), repeat=k - 1):
            lhs = 0.0
            rhs = 0.0
            for yk in (0, 1):
                g = q_ops[y_head + (yk,)]
                lhs = lhs + ql.partial_trace(g, {"A"}).entries
                red = ql.partial_trace(g, {"A", b_sys[-1]}).entries
                rhs = rhs + np.kron(red, np.eye(d_b)) / d_b
            ns = max(ns, float(np.linalg.norm(lhs - rhs, 2)))
        res["nonsig"] = ns

    gamma_ext = np.kron(q.channel.choi.entries, np.eye(d_b ** (k - 1)))
    succ = sum(
        float(np.real(np.vdot(gamma_ext, q_ops[y].entries)))
        for y in y_tuples if y[0] == 0
    ) / d_b ** (k - 1)
    res["success"] = max(0.0, (1.0 - q.epsilon) - succ)
    return res


def capacity_bound(q: CapacityQuery, opts: SolveOptions = None,
                   reduce_labels: bool = False) -> BoundResult:
    """Solve the capacity SDP and return -log2 of the optimal lambda."""
    t0 = time.perf_counter()
    prob = build_capacity_sdp(q, reduce_labels=reduce_labels)
    sol = solve(prob, opts or SolveOptions())
    wall_ms = (time.perf_counter() - t0) * 1e3

    lam = float(sol.primal_blocks["lam"][0, 0])
    lay = _ext_layout(q)
    y_tuples = list(itertools.product((0, 1), repeat=q.k))
    q_ops = {}
    if reduce_labels:
        b_sys = [f"B{i}" for i in range(1, q.k + 1)]
        for y in y_tuples:
            rep = _sorted_rep(y)
            p = tuple(int(i) for i in np.argsort(np.asarray(y), kind="stable"))
            w = ql.permutation_unitary(lay, b_sys, list(p)).entries
            q_ops[y] = ql.Operator(lay, w @ sol.primal_blocks[f"Q{rep!r}"] @ w.conj().T)
    else:
        for y in y_tuples:
            q_ops[y] = ql.Operator(lay, sol.primal_blocks[f"Q{y!r}"])
    rho = ql.Operator(ql.layout(("A", q.channel.dim_in)), sol.primal_blocks["rho"])

    bound = -math.log2(lam) if lam > 0 else math.inf
    result = BoundResult(
        lambda_star=lam,
        bound_bits=bound,
        status=sol.status,
        gap=sol.duality_gap,
        iterations=sol.iterations,
        wall_ms=wall_ms,
        rho=rho,
        q_ops=q_ops,
    )
    if sol.status == "optimal":
        result.witness_residuals = witness_residuals(q, rho, q_ops, lam)
    return result


CSV_HEADER = "eps,k,ppt,lambda,bound_bits,status,gap,iterations,wall_ms"


@dataclass
class CurveCell:
    eps: float
    k: int
    ppt: bool
    result: BoundResult = None
    error: str = ""


def bound_curve(channel: Channel, eps_grid, configs, opts: SolveOptions = None,
                reduce_labels: bool = False) -> list:
    """Evaluate the bound on a grid; per-cell failures do not abort the sweep."""
    cells = []
    for eps in eps_grid:
        for k, ppt in configs:
            try:
                q = CapacityQuery(channel=channel, epsilon=float(eps), k=int(k),
                                  ppt=bool(ppt))
                res = capacity_bound(q, opts=opts, reduce_labels=reduce_labels)
                cells.append(CurveCell(float(eps), int(k), bool(ppt), result=res))
            except Exception as exc:  # noqa: BLE001 - sweep must survive cells
                cells.append(CurveCell(float(eps), int(k), bool(ppt),
                                       error=f"{type(exc).__name__}: {exc}"))
    return cells


def curve_to_csv(cells) -> str:
    lines = [CSV_HEADER]
    for cell in cells:
        if cell.result is None:
            lines.append(
                f"{cell.eps!r},{cell.k},{int(cell.ppt)},nan,nan,error,nan,0,0"
            )
            continue
        r = cell.result
        lines.append(
            f"{cell.eps!r},{cell.k},{int(cell.ppt)},{r.lambda_star!r},"
            f"{r.bound_bits!r},{r.status},{r.gap!r},{r.iterations},"
            f"{r.wall_ms:.3f}"
        )
    return "\n".join(lines) + "\n"
