"""Operator algebra: tensor structure, traces, transposes, permutations."""

import itertools

import numpy as np
import pytest

from extendicap import qlinalg as ql
from extendicap.errors import LayoutError, ValidationError

from conftest import random_hermitian


def test_layout_rejects_duplicates():
    with pytest.raises(LayoutError):
        ql.layout(("A", 2), ("A", 3))


def test_layout_rejects_bad_dim():
    with pytest.raises(LayoutError):
        ql.layout(("A", 0))


def test_tensor_identities():
    a = ql.identity(ql.layout(("A", 2)))
    b = ql.identity(ql.layout(("B", 3)))
    out = ql.tensor(a, b)
    assert out.layout.labels == ("A", "B")
    np.testing.assert_allclose(out.entries, np.eye(6))


def test_tensor_diag_projectors():
    a = ql.from_matrix(ql.layout(("A", 2)), np.diag([1.0, 0.0]))
    b = ql.from_matrix(ql.layout(("B", 2)), np.diag([0.0, 1.0]))
    np.testing.assert_allclose(ql.tensor(a, b).entries, np.diag([0.0, 1.0, 0.0, 0.0]))


def test_tensor_pauli_x_squares_to_identity():
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    xa = ql.from_matrix(ql.layout(("A", 2)), x)
    xb = ql.from_matrix(ql.layout(("B", 2)), x)
    xx = ql.tensor(xa, xb)
    np.testing.assert_allclose(xx.entries @ xx.entries, np.eye(4), atol=1e-14)


def test_tensor_label_conflict():
    a = ql.identity(ql.layout(("A", 2)))
    with pytest.raises(LayoutError):
        ql.tensor(a, a)


def test_partial_trace_maximally_entangled():
    phi = ql.max_entangled(2)
    marg = ql.partial_trace(phi, {"B"})
    np.testing.assert_allclose(marg.entries, np.eye(2) / 2, atol=1e-14)


def test_partial_trace_product(rng):
    rho = random_hermitian(rng, 2)
    sig = random_hermitian(rng, 3)
    prod = ql.tensor(
        ql.from_matrix(ql.layout(("A", 2)), rho),
        ql.from_matrix(ql.layout(("B", 3)), sig),
    )
    out = ql.partial_trace(prod, {"B"})
    np.testing.assert_allclose(out.entries, rho * np.trace(sig), atol=1e-12)


def test_partial_trace_adjointness(rng):
    # Tr[(M (x) I) a] == Tr[M Tr_B a] for random Hermitian a and M
    lay = ql.layout(("A", 2), ("B", 2))
    for _ in range(100):
        a = ql.Operator(lay, random_hermitian(rng, 4))
        m = random_hermitian(rng, 2)
        lhs = np.trace(np.kron(m, np.eye(2)) @ a.entries)
        rhs = np.trace(m @ ql.partial_trace(a, {"B"}).entries)
        assert abs(lhs - rhs) < 1e-12


def test_partial_trace_unknown_label():
    phi = ql.max_entangled(2)
    with pytest.raises(LayoutError):
        ql.partial_trace(phi, {"C"})


def test_partial_transpose_involution(rng):
    lay = ql.layout(("A", 2), ("B", 3))
    a = ql.Operator(lay, rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    out = ql.partial_transpose(ql.partial_transpose(a, {"B"}), {"B"})
    np.testing.assert_allclose(out.entries, a.entries, atol=0)
    assert abs(out.trace() - a.trace()) == 0


def test_partial_transpose_bell_min_eig():
    phi = ql.max_entangled(2)
    pt = ql.partial_transpose(phi, {"B"})
    eigs = np.linalg.eigvalsh(pt.entries)
    assert abs(eigs[0] + 0.5) < 1e-12
    assert ql.spectra_and_norms(pt).trace_norm == pytest.approx(2.0, abs=1e-12)


def test_partial_transpose_product(rng):
    rho = random_hermitian(rng, 2)
    sig = random_hermitian(rng, 2)
    prod = ql.tensor(
        ql.from_matrix(ql.layout(("A", 2)), rho),
        ql.from_matrix(ql.layout(("B", 2)), sig),
    )
    out = ql.partial_transpose(prod, {"B"})
    np.testing.assert_allclose(out.entries, np.kron(rho, sig.T), atol=1e-14)


def test_permutation_identity():
    lay = ql.layout(("B1", 2), ("B2", 2))
    w = ql.permutation_unitary(lay, ["B1", "B2"], [0, 1])
    np.testing.assert_allclose(w.entries, np.eye(4))


def test_swap_on_two_qubits():
    lay = ql.layout(("B1", 2), ("B2", 2))
    w = ql.permutation_unitary(lay, ["B1", "B2"], [1, 0])
    ket01 = np.zeros(4)
    ket01[1] = 1.0  # |0>|1>
    ket10 = np.zeros(4)
    ket10[2] = 1.0
    np.testing.assert_allclose(w.entries @ ket01, ket10)


def test_three_cycle_has_order_three():
    lay = ql.layout(("B1", 2), ("B2", 2), ("B3", 2))
    w = ql.permutation_unitary(lay, ["B1", "B2", "B3"], [1, 2, 0])
    np.testing.assert_allclose(
        w.entries @ w.entries @ w.entries, np.eye(8), atol=1e-14
    )


@pytest.mark.parametrize("k,d", [(2, 2), (3, 2), (3, 3), (4, 2), (4, 3)])
def test_permutation_group_law(k, d):
    lay = ql.layout(*[(f"B{i}", d) for i in range(k)])
    labels = [f"B{i}" for i in range(k)]
    perms = list(itertools.permutations(range(k)))
    mats = {p: ql.permutation_unitary(lay, labels, list(p)).entries for p in perms}
    for p in perms:
        for q in perms:
            comp = tuple(p[q[i]] for i in range(k))
            np.testing.assert_array_equal(mats[p] @ mats[q], mats[comp])


def test_permutation_unequal_dims():
    lay = ql.layout(("B1", 2), ("B2", 3))
    with pytest.raises(LayoutError):
        ql.permutation_unitary(lay, ["B1", "B2"], [1, 0])


def test_max_entangled_scalar():
    phi = ql.max_entangled(1)
    np.testing.assert_allclose(phi.entries, [[1.0]])


def test_max_entangled_marginals_and_purity():
    phi = ql.max_entangled(2)
    assert phi.trace() == pytest.approx(1.0)
    np.testing.assert_allclose(
        ql.partial_trace(phi, {"A"}).entries, np.eye(2) / 2, atol=1e-14
    )
    phi3 = ql.max_entangled(3)
    assert np.trace(phi3.entries @ phi3.entries).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.matrix_rank(phi3.entries, tol=1e-10) == 1


def test_spectra_identity_and_diag():
    i3 = ql.identity(ql.layout(("A", 3)))
    s = ql.spectra_and_norms(i3)
    assert s.trace_norm == pytest.approx(3.0)
    assert s.operator_norm == pytest.approx(1.0)

    d = ql.from_matrix(ql.layout(("A", 2)), np.diag([2.0, -1.0]))
    s = ql.spectra_and_norms(d)
    assert s.trace_norm == pytest.approx(3.0)
    assert s.operator_norm == pytest.approx(2.0)
    assert s.min_eigenvalue == pytest.approx(-1.0)


def test_spectra_rejects_non_hermitian():
    a = ql.from_matrix(ql.layout(("A", 2)), np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        ql.spectra_and_norms(a)


def test_tensor_then_trace_scales(rng):
    for _ in range(20):
        rho = random_hermitian(rng, 3)
        sig = random_hermitian(rng, 2)
        prod = ql.tensor(
            ql.from_matrix(ql.layout(("A", 3)), rho),
            ql.from_matrix(ql.layout(("B", 2)), sig),
        )
        back = ql.partial_trace(prod, {"B"})
        np.testing.assert_allclose(back.entries, rho * np.trace(sig), atol=1e-12)


def test_reorder_roundtrip(rng):
    lay = ql.layout(("A", 2), ("B", 3), ("C", 2))
    a = ql.Operator(lay, rng.normal(size=(12, 12)))
    b = ql.reorder(a, ["C", "A", "B"])
    c = ql.reorder(b, ["A", "B", "C"])
    np.testing.assert_array_equal(c.entries, a.entries)
    # reorder of a product matches kron in the new order
    x = ql.from_matrix(ql.layout(("A", 2)), random_hermitian(rng, 2))
    y = ql.from_matrix(ql.layout(("B", 3)), random_hermitian(rng, 3))
    xy = ql.tensor(x, y)
    yx = ql.reorder(xy, ["B", "A"])
    np.testing.assert_allclose(
        yx.entries, np.kron(y.entries, x.entries), atol=1e-14
    )
