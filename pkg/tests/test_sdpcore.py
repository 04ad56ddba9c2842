"""SDP core: interior-point solves, verification, first-order oracle."""

import io

import numpy as np
import pytest

from extendicap.sdpcore import (
    SdpProblem,
    SolveOptions,
    admm_solve,
    herm_embed,
    herm_lift,
    solve,
    verify_solution,
)

from conftest import random_hermitian


def sym(rng, n):
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2.0


def unit(n, i, j):
    e = np.zeros((n, n))
    e[i, j] = e[j, i] = 1.0 if i == j else 0.5
    return e


def min_eig_problem():
    p = SdpProblem()
    p.add_psd_block("X", 2)
    p.add_objective({"X": np.diag([1.0, 2.0])})
    p.add_equality({"X": np.eye(2)}, rhs=1.0, tag="trace")
    return p


def test_minimum_eigenvalue_program():
    s = solve(min_eig_problem())
    assert s.status == "optimal"
    assert s.primal_objective == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_allclose(s.primal_blocks["X"], np.diag([1.0, 0.0]), atol=1e-6)


def test_scalar_bound_program():
    # min x s.t. x >= 1, via slack block
    p = SdpProblem()
    p.add_free("x")
    p.add_psd_block("s", 1)
    p.add_objective(free_costs={"x": 1.0})
    p.add_equality({"s": np.eye(1)}, free={"x": -1.0}, rhs=-1.0)
    s = solve(p)
    assert s.status == "optimal"
    assert s.free_values["x"] == pytest.approx(1.0, abs=1e-7)


def random_strictly_feasible(seed, n=6, m=5):
    rng = np.random.default_rng(seed)
    mats = [sym(rng, n) for _ in range(m)]
    x_star = np.eye(n) + 0.3 * sym(rng, n)
    w = np.linalg.eigvalsh(x_star)[0]
    if w < 0.1:
        x_star += (0.2 - w) * np.eye(n)
    y_star = rng.normal(size=m)
    c = np.eye(n) + sum(y * a for y, a in zip(y_star, mats))
    p = SdpProblem()
    p.add_psd_block("X", n)
    p.add_objective({"X": c})
    for a in mats:
        p.add_equality({"X": a}, rhs=float(np.vdot(a, x_star)))
    return p


@pytest.mark.parametrize("seed", range(6))
def test_random_problems_match_first_order_oracle(seed):
    p = random_strictly_feasible(seed)
    s = solve(p)
    assert s.status == "optimal"
    val, _ = admm_solve(p, iters=40000)
    assert s.primal_objective == pytest.approx(val, abs=1e-4)
    rep = verify_solution(p, s)
    assert rep.max_residual() <= 1e-7
    assert rep.weak_duality_ok


def test_verify_flags_perturbation():
    p = min_eig_problem()
    s = solve(p)
    x = np.array(s.primal_blocks["X"])
    x[0, 0] += 1e-3
    s.primal_blocks["X"] = x
    rep = verify_solution(p, s)
    assert rep.equality_residual >= 1e-4


def test_weak_duality_on_optimal_solves():
    for seed in range(3):
        p = random_strictly_feasible(seed, n=4, m=3)
        s = solve(p)
        rep = verify_solution(p, s)
        assert rep.dual_objective <= rep.primal_objective + 1e-7


def test_complex_block_minimum_eigenvalue(rng):
    d = 5
    c = random_hermitian(rng, d)
    p = SdpProblem()
    p.add_psd_block("H", d, complex=True)
    p.add_objective({"H": c})
    p.add_equality({"H": np.eye(d)}, rhs=1.0)
    s = solve(p)
    assert s.status == "optimal"
    assert s.primal_objective == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-7)
    h = s.primal_blocks["H"]
    assert np.max(np.abs(h - h.conj().T)) <= 1e-10


def test_embedding_roundtrip(rng):
    h = random_hermitian(rng, 4)
    x = herm_embed(h)
    np.testing.assert_array_equal(x, x.T)
    back = herm_lift(x)
    assert np.max(np.abs(back - h)) <= 1e-14
    # eigenvalues doubled in multiplicity
    np.testing.assert_allclose(
        np.linalg.eigvalsh(x), np.sort(np.repeat(np.linalg.eigvalsh(h), 2)), atol=1e-12
    )


def test_determinism_same_iterates():
    p1 = random_strictly_feasible(11)
    p2 = random_strictly_feasible(11)
    s1 = solve(p1)
    s2 = solve(p2)
    assert s1.iterations == s2.iterations
    assert s1.primal_objective == s2.primal_objective
    np.testing.assert_array_equal(s1.primal_blocks["X"], s2.primal_blocks["X"])


def test_infeasible_equalities_detected():
    p = SdpProblem()
    p.add_psd_block("X", 2)
    p.add_objective({"X": np.eye(2)})
    p.add_equality({"X": np.eye(2)}, rhs=1.0)
    p.add_equality({"X": np.eye(2)}, rhs=2.0)
    s = solve(p)
    assert s.status == "infeasible"


def test_cone_infeasible_pinned_block():
    p = SdpProblem()
    p.add_psd_block("X", 2)
    for (i, j, v) in [(0, 0, 1.0), (1, 1, -1.0), (0, 1, 0.0)]:
        p.add_equality({"X": unit(2, i, j)}, rhs=v)
    s = solve(p)
    assert s.status == "infeasible"


def test_unbounded_detected():
    p = SdpProblem()
    p.add_free("x")
    p.add_objective(free_costs={"x": 1.0})
    # no constraints at all: x -> -inf
    s = solve(p)
    assert s.status == "unbounded"


def test_redundant_rows_are_harmless():
    p = min_eig_problem()
    for _ in range(5):
        p.add_equality({"X": np.eye(2)}, rhs=1.0, tag="dup")
    s = solve(p)
    assert s.status == "optimal"
    assert s.primal_objective == pytest.approx(1.0, abs=1e-7)


def test_operator_norm_via_slack_elimination(rng):
    b = rng.normal(size=(5, 5))
    m = b @ b.T
    p = SdpProblem()
    p.add_psd_block("S", 5)
    p.add_free("lam")
    p.add_objective(free_costs={"lam": 1.0})
    for i in range(5):
        for j in range(i, 5):
            p.add_equality(
                {"S": unit(5, i, j)}, free={"lam": -float(i == j)}, rhs=-m[i, j]
            )
    s = solve(p)
    assert s.status == "optimal"
    assert s.primal_objective == pytest.approx(np.linalg.eigvalsh(m)[-1], rel=1e-6)


def test_dump_format():
    p = min_eig_problem()
    buf = io.StringIO()
    p.dump(buf)
    text = buf.getvalue()
    assert "BLOCK X 2 sym" in text
    assert "ROW 0 trace" in text
    assert text.count("ENT 0") == 2  # two diagonal coordinates


def test_solution_reports_residuals():
    p = min_eig_problem()
    s = solve(p, SolveOptions(gap_tol=1e-9, feas_tol=1e-9))
    assert s.primal_residual <= 1e-8
    assert s.duality_gap == pytest.approx(0.0, abs=1e-6)
    assert s.wall_time >= 0.0
