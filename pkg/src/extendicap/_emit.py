"""Shared machinery for emitting Hermitian matrix equalities as SDP rows.

A matrix equality  sum_b L_b(H_b) + sum_f z_f R_f = R  over a target
space of dimension D is lowered to D^2 scalar rows by pairing both sides
with an orthonormal Hermitian basis {E_h}.  The coefficient of block b in
row h is the adjoint map applied to the basis element, L_b^dag(E_h).
"""

from functools import lru_cache

import numpy as np

_SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=32)
def hermitian_basis(dim: int) -> tuple:
    """Orthonormal basis of Hermitian dim x dim matrices (trace inner product)."""
    basis = []
    for j in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = e[j, i] = 1.0 / _SQRT2
            basis.append(e)
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = -1j / _SQRT2
            e[j, i] = 1j / _SQRT2
            basis.append(e)
    return tuple(basis)


def hermitian_pairings(mats) -> np.ndarray:
    """<E_h, F> for every basis element, vectorized over a stack of F's.

    Returns an array (len(mats), dim^2) ordered like :func:`hermitian_basis`:
    diagonal elements first, then (re, im) interleaved per upper pair.
    """
    stack = np.asarray(mats)
    d = stack.shape[-1]
    diag = np.real(stack[..., np.arange(d), np.arange(d)])
    iu = np.triu_indices(d, k=1)
    off = stack[..., iu[0], iu[1]]
    out = np.empty(stack.shape[:-2] + (d * d,), dtype=float)
    out[..., :d] = diag
    out[..., d::2] = _SQRT2 * np.real(off)
    # the imaginary basis element is -i(E_ij - E_ji)/sqrt2, pairing to -sqrt2 Im
    out[..., d + 1::2] = -_SQRT2 * np.imag(off)
    return out


def emit_param_block_link(problem, dim, slack_name, param_names, param_mats,
                          lam_name=None, lam_sign=-1.0, tag=""):
    """Vectorized rows for  S = sum_p x_p F_p (+ lam_sign * lam * I).

    ``param_mats`` is a stack (P, dim, dim) of Hermitian coefficient
    matrices; the equality is emitted as dim^2 scalar rows with the slack
    block entering through the orthonormal Hermitian basis.
    """
    coeff = hermitian_pairings(param_mats)  # (P, dim^2)
    basis = hermitian_basis(dim)
    names = list(param_names)
    for h, e_h in enumerate(basis):
        col = coeff[:, h]
        nz = np.nonzero(col)[0]
        free_row = {names[p]: -float(col[p]) for p in nz}
        coeffs = {slack_name: e_h}
        if lam_name is not None:
            tr = float(np.real(np.trace(e_h)))
            if tr != 0.0:
                coeffs[lam_name] = np.array([[lam_sign * tr]])
        problem.add_equality(coeffs=coeffs, free=free_row, rhs=0.0, tag=tag)


def emit_matrix_equality(problem, dim, terms, rhs=None, frees=None, tag=""):
    """Emit the D^2 scalar rows of one Hermitian matrix equality.

    terms: list of (block_name, adjoint) with adjoint mapping a Hermitian
        matrix on the target space to the block's coefficient matrix.
    frees: dict free_name -> Hermitian matrix F, contributing z * <E_h, F>.
    rhs:   Hermitian matrix (defaults to zero).
    """
    frees = frees or {}
    for e_h in hermitian_basis(dim):
        coeffs = {}
        for name, adjoint in terms:
            mat = adjoint(e_h)
            existing = coeffs.get(name)
            coeffs[name] = mat if existing is None else existing + mat
        free_row = {}
        for name, f_mat in frees.items():
            v = float(np.real(np.vdot(e_h, f_mat)))
            if v != 0.0:
                free_row[name] = v
        r = 0.0 if rhs is None else float(np.real(np.vdot(e_h, rhs)))
        problem.add_equality(coeffs=coeffs, free=free_row, rhs=r, tag=tag)
