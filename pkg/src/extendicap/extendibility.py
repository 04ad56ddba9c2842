"""POVM classes and extendibility hierarchies.

A bipartite POVM {P^y} on systems A, B is k-extendible when it admits a
(k+1)-partite POVM {G^{y_1..y_k}} on A B_1..B_k whose B_1 marginal
reproduces P, whose B_k output is non-signaling, and which is covariant
under simultaneous permutations of the B systems and outcome labels.
Adding positivity of every partial transpose on a prefix B_1..B_i gives
k-PPT-extendibility; for k = 1 that is exactly the PPT criterion.

Feasibility is decided by maximizing a slack t subject to G >= t I (and
T(G) >= t I for the PPT variants) inside the equality constraints; the
POVM is classified extendible when the optimal slack is >= -1e-7.
"""

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import qlinalg as ql
from ._emit import emit_matrix_equality
from .config import check_dim
from .errors import SolverFailure, ValidationError
from .sdpcore import SdpProblem, SolveOptions, solve
from .serialize import matrix_from_json, matrix_to_json

FEAS_MARGIN = 1e-7
POVM_TOL = 1e-9


@dataclass(frozen=True)
class Povm:
    """Outcome-labeled family of PSD operators summing to identity."""

    layout: ql.SystemLayout
    outcomes: tuple  # ((label, Operator), ...)

    @property
    def labels(self) -> tuple:
        return tuple(lbl for lbl, _ in self.outcomes)

    def element(self, label) -> ql.Operator:
        for lbl, op in self.outcomes:
            if lbl == label:
                return op
        raise KeyError(label)

    def elements(self) -> list:
        return [op for _, op in self.outcomes]


def make_povm(layout: ql.SystemLayout, outcomes, tol: float = POVM_TOL) -> Povm:
    """Validate and construct a POVM; outcomes is [(label, matrix-or-Operator)]."""
    ops = []
    total = np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    for label, element in outcomes:
        op = element if isinstance(element, ql.Operator) else ql.Operator(layout, element)
        if op.layout != layout:
            raise ValidationError(f"outcome {label!r} is on a different layout")
        norm = float(np.linalg.norm(op.entries, 2))
        if ql.hermitian_defect(op) > tol * max(1.0, norm):
            raise ValidationError(f"POVM element {label!r} is not Hermitian")
        low = ql.min_eig(op)
        if low < -tol * max(1.0, norm):
            raise ValidationError(
                f"POVM element {label!r} is not PSD: min eigenvalue {low:.3e}"
            )
        total += op.entries
        ops.append((label, op))
    resid = float(np.linalg.norm(total - np.eye(layout.total_dim), 2))
    if resid > POVM_TOL:
        raise ValidationError(f"POVM elements do not sum to identity: residual {resid:.3e}")
    return Povm(layout, tuple(ops))


def one_way_locc_povm(alice: Povm, bob: dict) -> Povm:
    """Compose P^y = sum_x E^x (x) F^{x,y} from Alice's POVM and Bob's per-outcome POVMs.

    ``bob`` maps every outcome x of ``alice`` to a POVM on B; all of them
    must share one outcome set.
    """
    missing = [x for x in alice.labels if x not in bob]
    if missing:
        raise ValidationError(f"no Bob POVM for Alice outcomes {missing}")
    y_sets = {tuple(bob[x].labels) for x in alice.labels}
    if len(y_sets) != 1:
        raise ValidationError("Bob POVMs must share one outcome set")
    y_labels = y_sets.pop()
    b_layout = bob[alice.labels[0]].layout
    lay = ql.SystemLayout(alice.layout.subsystems + b_layout.subsystems)
    outcomes = []
    for y in y_labels:
        total = np.zeros((lay.total_dim, lay.total_dim), dtype=complex)
        for x in alice.labels:
            total += np.kron(alice.element(x).entries, bob[x].element(y).entries)
        outcomes.append((y, total))
    return make_povm(lay, outcomes)


# ----------------------------------------------------------------------
# canonical example: noisy Bell measurement and its two-extension


def weyl_operators(d: int):
    shift = np.zeros((d, d), dtype=complex)
    shift[(np.arange(d) + 1) % d, np.arange(d)] = 1.0
    phase = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return shift, phase


def bell_states(d: int) -> dict:
    """The d^2 qudit Bell projectors, labeled by (shift, phase) powers."""
    shift, phase = weyl_operators(d)
    base = ql.max_entangled(d).entries
    out = {}
    for a in range(d):
        for b in range(d):
            u = np.kron(np.eye(d), np.linalg.matrix_power(shift, a)
                        @ np.linalg.matrix_power(phase, b))
            out[(a, b)] = u @ base @ u.conj().T
    return out


def bell_noise_povm(d: int):
    """The POVM {Phi^y/2 + I/(2 d^2)} and its canonical two-extension.

    The POVM is two-extendible but its elements have negative partial
    transpose, so it lies outside 1WL.
    """
    if d < 2:
        raise ValidationError(f"qudit Bell POVM needs d >= 2, got {d}")
    bells = bell_states(d)
    lay = ql.layout(("A", d), ("B", d))
    eye = np.eye(d * d)
    outcomes = [
        (y, 0.5 * phi + eye / (2 * d * d)) for y, phi in bells.items()
    ]
    povm = make_povm(lay, outcomes)

    lay3 = ql.layout(("A", d), ("B", d), ("E", d))
    ext_outcomes = []
    for y in bells:
        for yp in bells:
            ab = ql.Operator(lay, bells[y])
            ae = ql.Operator(ql.layout(("A", d), ("E", d)), bells[yp])
            term1 = ql.tensor(ab, ql.identity(ql.layout(("E", d))))
            term2 = ql.reorder(
                ql.tensor(ae, ql.identity(ql.layout(("B", d)))), ["A", "B", "E"]
            )
            ext_outcomes.append(
                ((y, yp), (term1.entries + term2.entries) / (2 * d * d))
            )
    extension = make_povm(lay3, ext_outcomes)
    return povm, extension


@dataclass
class TwoExtensionReport:
    marginal_residual: float     # sum_{y'} G^{y,y'} vs P^y (x) I_E
    symmetry_residual: float     # F_BE G^{y,y'} F_BE vs G^{y',y}
    completeness_residual: float
    min_eigenvalue: float

    def max_residual(self) -> float:
        return max(
            self.marginal_residual,
            self.symmetry_residual,
            self.completeness_residual,
            max(0.0, -self.min_eigenvalue),
        )


def check_two_extension(povm: Povm, extension: Povm) -> TwoExtensionReport:
    """Verify the two-extension conditions, returning max residuals."""
    if set(extension.layout.labels) != {"A", "B", "E"}:
        raise ValidationError("extension must live on systems A, B, E")
    d_b = extension.layout.dim("B")
    if extension.layout.dim("E") != d_b:
        raise ValidationError("extension system E must be isomorphic to B")
    y_labels = povm.labels
    swap = ql.permutation_unitary(extension.layout, ["B", "E"], [1, 0]).entries

    marg = 0.0
    comp = np.zeros((extension.layout.total_dim,) * 2, dtype=complex)
    mineig = np.inf
    for y in y_labels:
        total = np.zeros_like(comp)
        for yp in y_labels:
            g = extension.element((y, yp)).entries
            total += g
            comp += g
            mineig = min(mineig, ql.min_eig(extension.element((y, yp))))
        target = np.kron(povm.element(y).entries, np.eye(d_b))
        marg = max(marg, float(np.linalg.norm(total - target, 2)))

    symm = 0.0
    for y in y_labels:
        for yp in y_labels:
            g = extension.element((y, yp)).entries
            gt = extension.element((yp, y)).entries
            symm = max(symm, float(np.linalg.norm(swap @ g @ swap.conj().T - gt, 2)))

    comp_res = float(np.linalg.norm(comp - np.eye(comp.shape[0]), 2))
    return TwoExtensionReport(marg, symm, comp_res, float(mineig))


# ----------------------------------------------------------------------
# k-extendibility feasibility SDPs


@dataclass
class ExtensionWitness:
    k: int
    elements: dict            # y-tuple -> Operator on A B_1..B_k
    slack: float              # optimal t
    residuals: dict = field(default_factory=dict)


@dataclass
class InfeasibilityCertificate:
    k: int
    ppt: bool
    slack: float              # best achievable min-eigenvalue slack (< 0)
    status: str
    gap: float


def _extension_layout(povm: Povm, k: int) -> ql.SystemLayout:
    la, lb = povm.layout.subsystems
    subs = [(la[0], la[1])] + [(f"B{i}", lb[1]) for i in range(1, k + 1)]
    return ql.SystemLayout(tuple(subs))


def _perm_pairs(k: int, labels):
    """Deduplicated (pi, y) pairs for the covariance constraints."""
    perms = [p for p in itertools.permutations(range(k)) if p != tuple(range(k))]
    seen = set()
    out = []
    for p in perms:
        inv = tuple(np.argsort(p))
        for y in itertools.product(labels, repeat=k):
            src = tuple(y[p[i]] for i in range(k))
            key = (p, y)
            mirror = (inv, src)
            if mirror in seen:
                continue
            seen.add(key)
            out.append((p, y, src))
    return out


def build_extendibility_program(povm: Povm, k: int, ppt: bool):
    """Feasibility SDP for Definition-style k-(PPT-)extendibility.

    Variables are H^y = G^y - t I per label tuple y plus the slack t;
    the shift makes every PSD condition strict for t sufficiently
    negative, so the program is always solvable and ``t* >= 0`` is the
    extendibility criterion.
    """
    if len(povm.layout.subsystems) != 2:
        raise ValidationError("extendibility is defined for bipartite POVMs")
    lay = _extension_layout(povm, k)
    check_dim(lay.total_dim, "extension operator")
    d_x = lay.total_dim
    d_a = lay.dims[0]
    d_b = lay.dims[1]
    labels = povm.labels
    n_y = len(labels)
    b_sys = [f"B{i}" for i in range(1, k + 1)]

    prob = SdpProblem()
    prob.add_free("t")
    prob.add_objective(free_costs={"t": -1.0})  # maximize the slack
    y_tuples = list(itertools.product(labels, repeat=k))
    block = {y: prob.add_psd_block(f"H{y!r}", d_x, complex=True) for y in y_tuples}
    if ppt:
        for y in y_tuples:
            for i in range(1, k + 1):
                prob.add_psd_block(f"K{i}|{y!r}", d_x, complex=True)

    eye_x = np.eye(d_x)

    # POVM completeness: sum_y G^y = I  (G = H + tI)
    emit_matrix_equality(
        prob, d_x,
        [(block[y], lambda e: e) for y in y_tuples],
        rhs=eye_x,
        frees={"t": float(len(y_tuples)) * eye_x},
        tag="completeness",
    )

    # marginal: sum_{y_2..y_k} G^{(y1, ...)} = P^{y1} (x) I
    rest = ql.SystemLayout(tuple(lay.subsystems[2:]))
    for y1 in labels:
        group = [y for y in y_tuples if y[0] == y1]
        target = np.kron(povm.element(y1).entries, np.eye(rest.total_dim))
        emit_matrix_equality(
            prob, d_x,
            [(block[y], lambda e: e) for y in group],
            rhs=target,
            frees={"t": float(len(group)) * eye_x},
            tag="marginal",
        )

    # non-signaling on the last extension system (t-terms cancel)
    d_ball = d_b ** k
    ball_layout = ql.SystemLayout(tuple(lay.subsystems[1:]))
    a_label = lay.labels[0]

    def adj_tr_a(e):
        # adjoint of Tr_A: tensor with I_A on the left
        return np.kron(np.eye(d_a), e)

    def adj_tr_a_bk_tensor(e):
        # adjoint of H -> Tr_{A B_k}[H] (x) I_{B_k}
        op = ql.Operator(ball_layout, e)
        reduced = ql.partial_trace(op, {b_sys[-1]}).entries
        return np.kron(np.eye(d_a), np.kron(reduced, np.eye(d_b)))

    for y_head in itertools.product(labels, repeat=k - 1):
        group = [y_head + (yk,) for yk in labels]
        terms = []
        for y in group:
            terms.append((block[y], adj_tr_a))
            terms.append((block[y], lambda e: -adj_tr_a_bk_tensor(e) / d_b))
        emit_matrix_equality(prob, d_ball, terms, tag="nonsig")

    # permutation covariance: W G^{y o pi} W^dag = G^y
    for p, y, src in _perm_pairs(k, labels):
        w = ql.permutation_unitary(lay, b_sys, list(p)).entries

        def adj_conj(e, w=w):
            return w.conj().T @ e @ w

        if src == y:
            emit_matrix_equality(
                prob, d_x,
                [(block[y], adj_conj), (block[y], lambda e: -e)],
                tag="perm",
            )
        else:
            emit_matrix_equality(
                prob, d_x,
                [(block[src], adj_conj), (block[y], lambda e: -e)],
                tag="perm",
            )

    # PPT prefixes: K_{i,y} = T_{B_1..B_i}(H^y)  (so K >= 0 iff T(G) >= t I)
    if ppt:
        for y in y_tuples:
            for i in range(1, k + 1):
                prefix = set(b_sys[:i])

                def adj_pt(e, prefix=prefix):
                    return ql.partial_transpose(ql.Operator(lay, e), prefix).entries

                emit_matrix_equality(
                    prob, d_x,
                    [(f"K{i}|{y!r}", lambda e: e), (block[y], lambda e: -adj_pt(e))],
                    tag="ppt",
                )

    return prob, lay, y_tuples, block


def witness_residuals(povm: Povm, witness: ExtensionWitness, ppt: bool) -> dict:
    """Re-check all extendibility constraints without the solver."""
    k = witness.k
    labels = povm.labels
    lay = next(iter(witness.elements.values())).layout
    b_sys = [f"B{i}" for i in range(1, k + 1)]
    d_b = lay.dim("B1")
    eye_x = np.eye(lay.total_dim)

    res = {}
    total = sum(op.entries for op in witness.elements.values())
    res["completeness"] = float(np.linalg.norm(total - eye_x, 2))
    res["psd"] = max(0.0, -min(ql.min_eig(op) for op in witness.elements.values()))

    rest_dim = lay.total_dim // (lay.dims[0] * d_b)
    marg = 0.0
    for y1 in labels:
        s = sum(
            witness.elements[y].entries
            for y in witness.elements
            if y[0] == y1
        )
        marg = max(
            marg,
            float(np.linalg.norm(s - np.kron(povm.element(y1).entries, np.eye(rest_dim)), 2)),
        )
    res["marginal"] = marg

    nonsig = 0.0
    for y_head in itertools.product(labels, repeat=k - 1):
        lhs = 0.0
        rhs = 0.0
        for yk in labels:
            g = witness.elements[y_head + (yk,)]
            lhs = lhs + ql.partial_trace(g, {lay.labels[0]}).entries
            red = ql.partial_trace(g, {lay.labels[0], b_sys[-1]}).entries
            rhs = rhs + np.kron(red, np.eye(d_b)) / d_b
        nonsig = max(nonsig, float(np.linalg.norm(lhs - rhs, 2)))
    res["nonsig"] = nonsig

    perm = 0.0
    for p in itertools.permutations(range(k)):
        if p == tuple(range(k)):
            continue
        w = ql.permutation_unitary(lay, b_sys, list(p)).entries
        for y in witness.elements:
            src = tuple(y[p[i]] for i in range(k))
            lhs = w @ witness.elements[src].entries @ w.conj().T
            perm = max(perm, float(np.linalg.norm(lhs - witness.elements[y].entries, 2)))
    res["perm"] = perm

    if ppt:
        ppt_viol = 0.0
        for y, op in witness.elements.items():
            for i in range(1, k + 1):
                pt = ql.partial_transpose(op, set(b_sys[:i]))
                ppt_viol = max(ppt_viol, max(0.0, -ql.min_eig(pt)))
        res["ppt"] = ppt_viol
    return res


def _run_feasibility(povm: Povm, k: int, ppt: bool, opts: SolveOptions = None):
    prob, lay, y_tuples, block = build_extendibility_program(povm, k, ppt)
    sol = solve(prob, opts or SolveOptions())
    if sol.status not in ("optimal",):
        raise SolverFailure(
            f"extendibility SDP did not converge: status {sol.status} "
            f"(gap {sol.duality_gap:.3e}, {sol.iterations} iterations)"
        )
    t_star = sol.free_values["t"]
    feasible = t_star >= -FEAS_MARGIN
    if feasible:
        elements = {}
        for y in y_tuples:
            h = sol.primal_blocks[block[y]]
            elements[y] = ql.Operator(lay, h + t_star * np.eye(lay.total_dim))
        witness = ExtensionWitness(k=k, elements=elements, slack=t_star)
        witness.residuals = witness_residuals(povm, witness, ppt)
        return True, witness
    cert = InfeasibilityCertificate(
        k=k, ppt=ppt, slack=t_star, status=sol.status, gap=sol.duality_gap
    )
    return False, cert


def is_k_extendible(povm: Povm, k: int, opts: SolveOptions = None):
    """Decide k-extendibility (k >= 2); returns (feasible, witness-or-certificate)."""
    if k < 2:
        raise ValidationError(f"k-extendibility needs k >= 2, got {k}")
    return _run_feasibility(povm, k, ppt=False, opts=opts)


def is_k_ppt_extendible(povm: Povm, k: int, opts: SolveOptions = None):
    """Decide k-PPT-extendibility (k >= 1; k = 1 is the PPT criterion)."""
    if k < 1:
        raise ValidationError(f"k-PPT-extendibility needs k >= 1, got {k}")
    return _run_feasibility(povm, k, ppt=True, opts=opts)


def definetti_deviation_bound(d_a: int, d_b: int, n_y: int, k: int) -> float:
    """Trace-distance bound from a k-extendible POVM to the 1WL set.

    |B|^3 |Y|^2 (|B||Y| + 1) sqrt(2 ln2 |A|^3 / k); decays like 1/sqrt(k).
    """
    for name, v in (("d_a", d_a), ("d_b", d_b), ("n_y", n_y)):
        if int(v) != v or v < 1:
            raise ValidationError(f"{name} must be a positive integer, got {v}")
    if int(k) != k or k < 2:
        raise ValidationError(f"k must be an integer >= 2, got {k}")
    return (
        d_b ** 3 * n_y ** 2 * (d_b * n_y + 1)
        * math.sqrt(2.0 * math.log(2.0) * d_a ** 3 / k)
    )


# ----------------------------------------------------------------------
# JSON interface


def povm_to_json(povm: Povm) -> dict:
    return {
        "layout": [[lbl, dim] for lbl, dim in povm.layout.subsystems],
        "outcomes": [
            {"label": list(lbl) if isinstance(lbl, tuple) else lbl,
             "element": matrix_to_json(op.entries)}
            for lbl, op in povm.outcomes
        ],
    }


def povm_from_json(data) -> Povm:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        lay = ql.SystemLayout(tuple((s[0], int(s[1])) for s in data["layout"]))
        outcomes = []
        for entry in data["outcomes"]:
            lbl = entry["label"]
            lbl = tuple(lbl) if isinstance(lbl, list) else lbl
            outcomes.append((lbl, matrix_from_json(entry["element"])))
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed POVM JSON: {exc}") from exc
    return make_povm(lay, outcomes)
