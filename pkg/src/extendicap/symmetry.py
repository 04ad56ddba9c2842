"""Permutation-invariant operator algebra over n copies of a local system.

The commutant of the S_n action on (C^D)^(x n) is spanned by the orbit
basis: for each orbit of matrix-unit index pairs under simultaneous
permutation of the n slots, the sum of the matrix units in the orbit.
These elements are pairwise orthogonal, the expansion coefficients of an
invariant operator are plain averages over orbit cells, and partial
traces / per-copy relabelings act as index maps with integer weights.

A numerical block decomposition maps every invariant operator to a
direct sum of multiplicity blocks, one per isotypic component of the
representation, preserving positivity in both directions.  It is built
by eigendecomposing a generic element of the group-algebra center (to
split isotypic components) and aligning irrep copies inside each
component with a generic invariant operator.

Both pieces combine into the reduced capacity SDP for the n-fold tensor
power of a channel, with variables indexed by orbits instead of matrix
entries; its optimal value matches the direct program's.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import qlinalg as ql
from ._emit import emit_matrix_equality, emit_param_block_link
from .channels import Channel
from .config import check_dim
from .errors import ValidationError
from .sdpcore import SdpProblem

DEFAULT_SEED = 20240202


# ----------------------------------------------------------------------
# orbit basis


@dataclass
class OrbitBasis:
    n: int
    factors: tuple              # per-copy ((label, dim), ...)
    local_dim: int
    pairs: list                 # representative (row string, col string)
    orbit_size: np.ndarray
    frobenius_norm_sq: np.ndarray
    index: dict                 # (row string, col string) -> orbit id
    adjoint: np.ndarray         # orbit id of the transposed pair
    _cells: tuple = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def total_dim(self) -> int:
        return self.local_dim ** self.n

    def string_index(self, s) -> int:
        out = 0
        for letter in s:
            out = out * self.local_dim + letter
        return out

    def cells(self):
        """(rows, cols, orbit ids) covering every matrix cell of every orbit."""
        if self._cells is None:
            rows, cols, ids = [], [], []
            for (i, j), r in self.index.items():
                rows.append(self.string_index(i))
                cols.append(self.string_index(j))
                ids.append(r)
            self._cells = (
                np.asarray(rows), np.asarray(cols), np.asarray(ids)
            )
        return self._cells

    def to_matrix(self, r: int) -> np.ndarray:
        rows, cols, ids = self.cells()
        out = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        mask = ids == r
        out[rows[mask], cols[mask]] = 1.0
        return out


def _canonical_pair(i, j, perms):
    best = None
    for q in perms:
        cand = (tuple(i[c] for c in q), tuple(j[c] for c in q))
        if best is None or cand < best:
            best = cand
    return best


def orbit_basis(n: int, d: int, factors=None) -> OrbitBasis:
    """Enumerate the orbit basis for n copies of a D-dimensional system.

    ``factors`` optionally names the per-copy tensor factors, enabling the
    marginal and relabeling maps; their dimensions must multiply to d.
    """
    if n < 1 or n > 4:
        raise ValidationError(f"orbit basis supports 1 <= n <= 4, got {n}")
    check_dim(d ** n, "orbit basis operator")
    if factors is None:
        factors = (("X", d),)
    factors = tuple((str(l), int(x)) for l, x in factors)
    if int(np.prod([x for _, x in factors])) != d:
        raise ValidationError("factor dimensions must multiply to the local dimension")

    perms = list(itertools.permutations(range(n)))
    strings = list(itertools.product(range(d), repeat=n))
    index = {}
    pairs = []
    sizes = []
    for i in strings:
        for j in strings:
            key = (i, j)
            if key in index:
                continue
            rep = _canonical_pair(i, j, perms)
            if rep in index:
                rid = index[rep]
                orbit = {(tuple(i[c] for c in q), tuple(j[c] for c in q)) for q in perms}
                for cell in orbit:
                    index[cell] = rid
                continue
            rid = len(pairs)
            orbit = {(tuple(i[c] for c in q), tuple(j[c] for c in q)) for q in perms}
            for cell in orbit:
                index[cell] = rid
            pairs.append(rep)
            sizes.append(len(orbit))
    sizes = np.asarray(sizes)
    adjoint = np.asarray([index[(j, i)] for (i, j) in pairs])
    return OrbitBasis(
        n=n,
        factors=factors,
        local_dim=d,
        pairs=pairs,
        orbit_size=sizes,
        frobenius_norm_sq=sizes.astype(float),
        index=index,
        adjoint=adjoint,
    )


def _invariance_defect(basis: OrbitBasis, mat: np.ndarray) -> float:
    n, d = basis.n, basis.local_dim
    total = basis.total_dim
    worst = 0.0
    gens = [list(range(n))]
    if n >= 2:
        gens = []
        swap = list(range(n))
        swap[0], swap[1] = swap[1], swap[0]
        gens.append(swap)
        gens.append(list(range(1, n)) + [0])
    for q in gens:
        w = _perm_matrix(n, d, q)
        worst = max(worst, float(np.linalg.norm(w @ mat @ w.T - mat, 2)))
    return worst


def _perm_matrix(n, d, q):
    total = d ** n
    idx = np.arange(total)
    digits = np.stack(np.unravel_index(idx, (d,) * n))
    permuted = digits[list(q)]
    dest = np.ravel_multi_index(tuple(permuted), (d,) * n)
    w = np.zeros((total, total))
    w[dest, idx] = 1.0
    return w


def expand(op, basis: OrbitBasis, tol: float = 1e-9) -> np.ndarray:
    """Orbit-basis coefficients of a permutation-invariant operator.

    Coefficients are the averages of the matrix entries over each orbit;
    the reconstruction sum_r alpha_r C^r reproduces the input exactly for
    invariant inputs.  Non-invariant inputs are rejected.
    """
    mat = op.entries if isinstance(op, ql.Operator) else np.asarray(op, dtype=complex)
    if mat.shape != (basis.total_dim,) * 2:
        raise ValidationError(
            f"operator shape {mat.shape} does not match basis dimension {basis.total_dim}"
        )
    defect = _invariance_defect(basis, mat)
    if defect > tol * max(1.0, float(np.linalg.norm(mat, 2))):
        raise ValidationError(
            f"operator is not permutation invariant: commutator norm {defect:.3e}"
        )
    rows, cols, ids = basis.cells()
    sums = np.zeros(basis.size, dtype=complex)
    np.add.at(sums, ids, mat[rows, cols])
    return sums / basis.orbit_size


def reconstruct(coeffs, basis: OrbitBasis) -> np.ndarray:
    rows, cols, ids = basis.cells()
    out = np.zeros((basis.total_dim,) * 2, dtype=complex)
    out[rows, cols] = np.asarray(coeffs)[ids]
    return out


def twirl(op: ql.Operator, block_labels) -> ql.Operator:
    """Average over all simultaneous permutations of the named subsystems."""
    block_labels = list(block_labels)
    k = len(block_labels)
    total = np.zeros_like(op.entries)
    count = 0
    for p in itertools.permutations(range(k)):
        w = ql.permutation_unitary(op.layout, block_labels, list(p)).entries
        total = total + w @ op.entries @ w.conj().T
        count += 1
    return ql.Operator(op.layout, total / count)


# ----------------------------------------------------------------------
# index maps between orbit bases


def _split_letter(basis: OrbitBasis, letter: int):
    """Decompose a per-copy letter into per-factor digits."""
    out = []
    rem = letter
    for _, dim in reversed(basis.factors):
        out.append(rem % dim)
        rem //= dim
    return tuple(reversed(out))


def _join_letter(factors, digits) -> int:
    out = 0
    for (_, dim), v in zip(factors, digits):
        out = out * dim + v
    return out


def marginal_map(basis_big: OrbitBasis, traced) -> tuple:
    """Partial trace of basis elements over the named per-copy factors.

    Returns (small basis, mapping) with mapping[r] = (t, omega) such that
    Tr_traced[C^r] = omega C^t; omega = 0 (with t = None) when the traced
    indices differ between the row and column strings.
    """
    traced = {str(t) for t in traced}
    labels = [l for l, _ in basis_big.factors]
    unknown = traced - set(labels)
    if unknown:
        raise ValidationError(f"unknown factors {sorted(unknown)}")
    kept = [(l, x) for l, x in basis_big.factors if l not in traced]
    if not kept:
        raise ValidationError("cannot trace out every factor")
    keep_pos = [i for i, (l, _) in enumerate(basis_big.factors) if l not in traced]
    trace_pos = [i for i, (l, _) in enumerate(basis_big.factors) if l in traced]
    d_small = int(np.prod([x for _, x in kept]))
    small = orbit_basis(basis_big.n, d_small, factors=tuple(kept))

    def project(string):
        out = []
        for letter in string:
            digits = _split_letter(basis_big, letter)
            out.append(_join_letter(kept, [digits[i] for i in keep_pos]))
        return tuple(out)

    def traced_part(string):
        out = []
        for letter in string:
            digits = _split_letter(basis_big, letter)
            out.append(tuple(digits[i] for i in trace_pos))
        return tuple(out)

    mapping = []
    for r, (i, j) in enumerate(basis_big.pairs):
        if traced_part(i) != traced_part(j):
            mapping.append((None, 0.0))
            continue
        t = small.index[(project(i), project(j))]
        omega = float(basis_big.orbit_size[r]) / float(small.orbit_size[t])
        mapping.append((t, omega))
    return small, mapping


def relabel_map(basis: OrbitBasis, letter_fn) -> np.ndarray:
    """Orbit index map induced by a per-copy letter bijection."""
    out = np.empty(basis.size, dtype=int)
    for r, (i, j) in enumerate(basis.pairs):
        i2 = tuple(letter_fn(a) for a in i)
        j2 = tuple(letter_fn(a) for a in j)
        out[r] = basis.index[(i2, j2)]
    return out


def transpose_map(basis: OrbitBasis, swapped) -> np.ndarray:
    """Orbit map of the partial transpose on the named per-copy factors."""
    swapped = {str(s) for s in swapped}
    pos = [i for i, (l, _) in enumerate(basis.factors) if l in swapped]
    if len(pos) != len(swapped):
        raise ValidationError("unknown factor in transpose selection")

    def exchange(i, j):
        i2, j2 = [], []
        for a, b in zip(i, j):
            da = list(_split_letter(basis, a))
            db = list(_split_letter(basis, b))
            for p in pos:
                da[p], db[p] = db[p], da[p]
            i2.append(_join_letter(basis.factors, da))
            j2.append(_join_letter(basis.factors, db))
        return tuple(i2), tuple(j2)

    out = np.empty(basis.size, dtype=int)
    for r, (i, j) in enumerate(basis.pairs):
        out[r] = basis.index[exchange(i, j)]
    return out


# ----------------------------------------------------------------------
# numerical block decomposition of the commutant


@dataclass
class BlockMap:
    n: int
    local_dim: int
    block_dims: list        # multiplicity of each isotypic component
    irrep_dims: list        # dimension of the irrep carried by each component
    bases: list             # per component: ndarray (D^n, m, d_irrep)

    def apply(self, mat) -> list:
        """Blocks of an invariant operator; PSD iff the input is PSD."""
        m = mat.entries if isinstance(mat, ql.Operator) else np.asarray(mat, dtype=complex)
        out = []
        for b, d_ir in zip(self.bases, self.irrep_dims):
            blk = np.einsum("api,ab,bqi->pq", b.conj(), m, b, optimize=True) / d_ir
            out.append(blk)
        return out

    def reconstruct(self, blocks) -> np.ndarray:
        total = self.local_dim ** self.n
        out = np.zeros((total, total), dtype=complex)
        for b, blk in zip(self.bases, blocks):
            out += np.einsum("api,pq,bqi->ab", b, blk, b.conj(), optimize=True)
        return out


def _cycle_type(q):
    seen = [False] * len(q)
    lens = []
    for s in range(len(q)):
        if seen[s]:
            continue
        c, length = s, 0
        while not seen[c]:
            seen[c] = True
            c = q[c]
            length += 1
        lens.append(length)
    return tuple(sorted(lens))


def _cluster(values, tol):
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            groups.append(slice(start, i))
            start = i
    return groups


def block_decompose(n: int, d: int, seed: int = DEFAULT_SEED,
                    max_n: int = 3) -> BlockMap:
    """Numerically block-diagonalize the commutant of the S_n action.

    A generic element of the group-algebra center splits the isotypic
    components; a generic invariant Hermitian operator then yields the
    irrep copies inside each component, which a second generic element
    aligns.  Fails loudly if the resulting basis does not block-diagonalize
    the commutant to 1e-8.
    """
    if n < 1 or n > max_n:
        raise ValidationError(f"block decomposition supports 1 <= n <= {max_n}")
    check_dim(d ** n, "block decomposition")
    total = d ** n
    rng = np.random.default_rng(seed)
    perms = list(itertools.permutations(range(n)))
    wmats = {q: _perm_matrix(n, d, q) for q in perms}

    # isotypic split from a generic center element
    types = sorted({_cycle_type(q) for q in perms})
    coeff = {t: rng.normal() for t in types}
    center = sum(coeff[_cycle_type(q)] * wmats[q] for q in perms)
    vals, vecs = np.linalg.eigh(center)
    comp_slices = _cluster(vals, 1e-8 * max(1.0, float(vals[-1] - vals[0])))

    def random_invariant():
        a = rng.normal(size=(total, total)) + 1j * rng.normal(size=(total, total))
        h = (a + a.conj().T) / 2.0
        return sum(w @ h @ w.T for w in wmats.values()) / len(perms)

    g1 = random_invariant()
    g2 = random_invariant()

    bases = []
    block_dims = []
    irrep_dims = []
    for sl in comp_slices:
        v = vecs[:, sl]
        dim_c = v.shape[1]
        gv = v.conj().T @ g1 @ v
        w, u = np.linalg.eigh((gv + gv.conj().T) / 2.0)
        groups = _cluster(w, 1e-7 * max(1.0, float(abs(w[-1]) + abs(w[0]))))
        sizes = {g.stop - g.start for g in groups}
        if len(sizes) != 1:
            raise ValidationError(
                "block-structure detection failure: irregular eigenvalue "
                f"multiplicities {sorted(sizes)} in one isotypic component"
            )
        d_ir = sizes.pop()
        m_c = len(groups)
        eigvecs = v @ u
        first = eigvecs[:, groups[0]]
        cols = np.zeros((total, m_c, d_ir), dtype=complex)
        cols[:, 0, :] = first
        for jj in range(1, m_c):
            ej = eigvecs[:, groups[jj]]
            inter = ej.conj().T @ g2 @ first
            uu, sv, vh = np.linalg.svd(inter)
            if sv[-1] < 1e-10 * max(1.0, sv[0]):
                raise ValidationError(
                    "block-structure detection failure: degenerate intertwiner"
                )
            cols[:, jj, :] = ej @ (uu @ vh)
        bases.append(cols)
        block_dims.append(m_c)
        irrep_dims.append(d_ir)

    bmap = BlockMap(n=n, local_dim=d, block_dims=block_dims,
                    irrep_dims=irrep_dims, bases=bases)

    # validation: the basis must reconstruct generic invariant operators
    for _ in range(2):
        g = random_invariant()
        rec = bmap.reconstruct(bmap.apply(g))
        if np.linalg.norm(rec - g) > 1e-8 * max(1.0, np.linalg.norm(g)):
            raise ValidationError(
                "block-structure detection failure: off-block residual "
                f"{np.linalg.norm(rec - g):.3e}"
            )
    return bmap


# ----------------------------------------------------------------------
# reduced capacity SDP for tensor-power channels


class _ParamSpace:
    """Real parameterization of Hermitian orbit-coefficient vectors.

    Coefficients come in conjugate pairs (the adjoint orbit carries the
    conjugate coefficient); each self-adjoint orbit gets one real
    parameter and each pair a real and an imaginary one.
    """

    def __init__(self, basis: OrbitBasis, prefix: str):
        self.basis = basis
        self.prefix = prefix
        self.names = []
        self.kinds = []   # (orbit, "re"|"im"|"self")
        for r in range(basis.size):
            radj = int(basis.adjoint[r])
            if radj == r:
                self.names.append(f"{prefix}[{r}]")
                self.kinds.append((r, "self"))
            elif r < radj:
                self.names.append(f"{prefix}[{r}]re")
                self.kinds.append((r, "re"))
                self.names.append(f"{prefix}[{r}]im")
                self.kinds.append((r, "im"))

    def declare(self, problem: SdpProblem):
        for name in self.names:
            problem.add_free(name)

    def rows_from_complex(self, cvec):
        """Real/imag row coefficient dicts of sum_r c_r beta_r."""
        re_row, im_row = {}, {}
        cvec = np.asarray(cvec, dtype=complex)
        for name, (r, kind) in zip(self.names, self.kinds):
            radj = int(self.basis.adjoint[r])
            if kind == "self":
                c = cvec[r]
            elif kind == "re":
                c = cvec[r] + cvec[radj]
            else:
                c = 1j * (cvec[r] - cvec[radj])
            if c.real != 0.0:
                re_row[name] = float(c.real)
            if c.imag != 0.0:
                im_row[name] = float(c.imag)
        return re_row, im_row

    def coefficient_matrices(self, mats_of_orbit):
        """Hermitian matrix coefficient of each parameter.

        ``mats_of_orbit(r)`` returns the (complex) matrix multiplying the
        orbit-r coefficient; the conjugate orbit contributes its adjoint.
        """
        out = {}
        for name, (r, kind) in zip(self.names, self.kinds):
            m = mats_of_orbit(r)
            if kind == "self":
                out[name] = m
            elif kind == "re":
                out[name] = m + m.conj().T
            else:
                out[name] = 1j * (m - m.conj().T)
        return out

    def values_to_coeffs(self, values):
        """Complex orbit-coefficient vector from solved parameter values."""
        coeffs = np.zeros(self.basis.size, dtype=complex)
        for name, (r, kind) in zip(self.names, self.kinds):
            v = values[name]
            radj = int(self.basis.adjoint[r])
            if kind == "self":
                coeffs[r] += v
            elif kind == "re":
                coeffs[r] += v
                coeffs[radj] += v
            else:
                coeffs[r] += 1j * v
                coeffs[radj] += -1j * v
        return coeffs


def _gamma_power_trace(basis: OrbitBasis, t: int, gamma: np.ndarray) -> complex:
    """Tr[C^t Gamma^(x n)] via the per-copy entry product (exact)."""
    i, j = basis.pairs[t]
    val = 1.0 + 0.0j
    for a, b in zip(i, j):
        val *= gamma[b, a]
    return val * basis.orbit_size[t]


@dataclass
class ReducedCapacitySdp:
    problem: SdpProblem
    n: int
    k: int
    eps: float
    ppt: bool
    basis_x: OrbitBasis
    basis_a: OrbitBasis
    beta: dict          # y-tuple -> _ParamSpace
    alpha: "_ParamSpace"


def build_reduced_capacity_sdp(channel: Channel, n: int, eps: float,
                               k: int = 1, ppt: bool = True,
                               seed: int = DEFAULT_SEED,
                               max_params: int = 4000) -> ReducedCapacitySdp:
    """Reduced SDP for the n-fold tensor power of the capacity program.

    Variables are orbit-basis coefficients of the permutation-invariant
    representatives of rho and the Q operators; positivity is imposed
    through the block decomposition.  The optimal value equals the direct
    program on the tensor-power channel.
    """
    if n < 1 or n > 3:
        raise ValidationError(f"reduced capacity SDP supports 1 <= n <= 3, got {n}")
    if k < 1 or k > 2:
        raise ValidationError(f"reduced capacity SDP supports 1 <= k <= 2, got {k}")
    if not 0.0 <= eps < 1.0 - 1e-9:
        raise ValidationError(f"epsilon must lie in [0, 1), got {eps}")
    d_a, d_b = channel.dim_in, channel.dim_out
    b_labels = [f"B{i}" for i in range(1, k + 1)]
    factors_x = (("A", d_a),) + tuple((lbl, d_b) for lbl in b_labels)
    d_x = d_a * d_b ** k

    basis_x = orbit_basis(n, d_x, factors=factors_x)
    n_params = (2 ** k) * basis_x.size
    if n_params > max_params:
        from .errors import DimensionCapError

        raise DimensionCapError(
            f"reduced program needs {n_params} orbit parameters, over the "
            f"cap {max_params}; shrink n, k, or the channel dimensions"
        )
    basis_a, map_a = marginal_map(basis_x, set(b_labels))
    basis_ball, map_tr_a = marginal_map(basis_x, {"A"})
    if k >= 2:
        basis_bm1, map_tr_abk = marginal_map(basis_x, {"A", b_labels[-1]})
        _, map_ball_tr_bk = marginal_map(basis_ball, {b_labels[-1]})
    basis_ab1, map_h = marginal_map(basis_x, set(b_labels[1:]))

    phi_x = block_decompose(n, d_x, seed=seed)
    phi_b = block_decompose(n, d_b ** k, seed=seed)
    phi_a = block_decompose(n, d_a, seed=seed)

    phix_mats = [phi_x.apply(basis_x.to_matrix(r)) for r in range(basis_x.size)]
    phib_mats = [phi_b.apply(basis_ball.to_matrix(t)) for t in range(basis_ball.size)]
    phia_mats = [phi_a.apply(basis_a.to_matrix(s)) for s in range(basis_a.size)]

    y_tuples = list(itertools.product((0, 1), repeat=k))
    prob = SdpProblem()
    alpha = _ParamSpace(basis_a, "al")
    alpha.declare(prob)
    beta = {}
    for y in y_tuples:
        beta[y] = _ParamSpace(basis_x, f"be{''.join(map(str, y))}")
        beta[y].declare(prob)
    prob.add_psd_block("lam", 1)
    prob.add_psd_block("succ_slack", 1)
    prob.add_objective({"lam": np.array([[1.0]])})

    zero_x = np.zeros(basis_x.size)

    def emit_scalar_complex(coeff_by_space, rhs=0.0, tag=""):
        """coeff_by_space: list of (_ParamSpace, complex coefficient vector)."""
        re_row, im_row = {}, {}
        for space, cvec in coeff_by_space:
            r_part, i_part = space.rows_from_complex(cvec)
            for k2, v in r_part.items():
                re_row[k2] = re_row.get(k2, 0.0) + v
            for k2, v in i_part.items():
                im_row[k2] = im_row.get(k2, 0.0) + v
        if re_row or rhs != 0.0:
            prob.add_equality(free=re_row, rhs=float(np.real(rhs)), tag=tag)
        if im_row or abs(float(np.imag(rhs))) > 0.0:
            prob.add_equality(free=im_row, rhs=float(np.imag(rhs)), tag=tag)

    # completeness: per X-orbit v, sum_y beta^y_v = [B-diagonal] alpha_{A-orbit(v)}
    for v in range(basis_x.size):
        if int(basis_x.adjoint[v]) < v:
            continue
        cx = np.zeros(basis_x.size)
        cx[v] = 1.0
        ca = np.zeros(basis_a.size)
        t, omega = map_a[v]
        if omega > 0.0:
            ca[t] = -1.0
        emit_scalar_complex(
            [(beta[y], cx) for y in y_tuples] + [(alpha, ca)],
            tag="completeness",
        )

    # trace normalization of rho
    tr_vec = np.zeros(basis_a.size)
    for s, (i, j) in enumerate(basis_a.pairs):
        if i == j:
            tr_vec[s] = float(basis_a.orbit_size[s])
    emit_scalar_complex([(alpha, tr_vec)], rhs=1.0, tag="rho-trace")

    # label-permutation ties (k >= 2): beta^{y o pi}_r = beta^y_{f_pi(r)}
    if k >= 2:
        perms = [p for p in itertools.permutations(range(k)) if p != tuple(range(k))]
        fpi = {}
        for p in perms:
            inv = [0] * k
            for i2, dest in enumerate(p):
                inv[dest] = i2

            def letter_fn(letter, inv=inv):
                digits = list(_split_letter(basis_x, letter))
                bs = digits[1:]
                new = [digits[0]] + [bs[inv[c]] for c in range(k)]
                return _join_letter(basis_x.factors, new)

            fpi[p] = relabel_map(basis_x, letter_fn)
        seen = set()
        for p in perms:
            invp = tuple(int(i) for i in np.argsort(p))
            for y in y_tuples:
                src = tuple(y[p[i]] for i in range(k))
                if (invp, src) in seen:
                    continue
                seen.add((p, y))
                for r in range(basis_x.size):
                    if int(basis_x.adjoint[r]) < r:
                        continue
                    c1 = np.zeros(basis_x.size)
                    c1[r] = 1.0
                    c2 = np.zeros(basis_x.size)
                    c2[int(fpi[p][r])] -= 1.0
                    if src == y:
                        emit_scalar_complex([(beta[y], c1 + c2)], tag="perm")
                    else:
                        emit_scalar_complex(
                            [(beta[src], c1), (beta[y], c2)], tag="perm"
                        )

    # positivity of every Q^y through the block decomposition
    def phi_of(mats, c):
        return lambda r: mats[r][c]

    def param_stack(space, mat_of_orbit, m_dim):
        mats = space.coefficient_matrices(mat_of_orbit)
        stack = np.stack([mats[p] for p in space.names]) if space.names else (
            np.zeros((0, m_dim, m_dim), dtype=complex)
        )
        return space.names, stack

    for y in y_tuples:
        for c, m_dim in enumerate(phi_x.block_dims):
            name = f"pos{''.join(map(str, y))}|{c}"
            prob.add_psd_block(name, m_dim, complex=True)
            names, stack = param_stack(beta[y], phi_of(phix_mats, c), m_dim)
            emit_param_block_link(prob, m_dim, name, names, stack, tag="positivity")

    # PPT blocks: transpose the first l B columns of every copy
    if ppt:
        for l in range(1, k + 1):
            tmap = transpose_map(basis_x, set(b_labels[:l]))
            for y in y_tuples:
                for c, m_dim in enumerate(phi_x.block_dims):
                    name = f"ppt{l}{''.join(map(str, y))}|{c}"
                    prob.add_psd_block(name, m_dim, complex=True)
                    names, stack = param_stack(
                        beta[y],
                        lambda r, tmap=tmap, c=c: phix_mats[int(tmap[r])][c],
                        m_dim,
                    )
                    emit_param_block_link(prob, m_dim, name, names, stack, tag="ppt")

    # rho positivity through the A-side decomposition
    for c, m_dim in enumerate(phi_a.block_dims):
        name = f"rhopos|{c}"
        prob.add_psd_block(name, m_dim, complex=True)
        names, stack = param_stack(alpha, phi_of(phia_mats, c), m_dim)
        emit_param_block_link(prob, m_dim, name, names, stack, tag="rho-psd")

    # eigenvalue cap: lam I - sum_{y: y1=0} Tr_A[Q^y] >= 0, per B-side block
    def cap_orbit_matrix(r, c):
        t, omega = map_tr_a[r]
        if omega == 0.0:
            m_dim = phi_b.block_dims[c]
            return np.zeros((m_dim, m_dim), dtype=complex)
        return omega * phib_mats[t][c]

    for c, m_dim in enumerate(phi_b.block_dims):
        name = f"cap|{c}"
        prob.add_psd_block(name, m_dim, complex=True)
        all_names = []
        stacks = []
        for y in y_tuples:
            if y[0] != 0:
                continue
            names, stack = param_stack(
                beta[y], lambda r, c=c: cap_orbit_matrix(r, c), m_dim
            )
            all_names.extend(names)
            stacks.append(stack)
        # S_cap = lam I - sum x F  <=>  S = sum x (-F) - (-1) lam I
        emit_param_block_link(
            prob, m_dim, name, all_names,
            -np.concatenate(stacks, axis=0), lam_name="lam", lam_sign=-1.0,
            tag="cap",
        )

    # non-signaling rows (k >= 2)
    if k >= 2:
        expand_members = {}
        for w in range(basis_ball.size):
            z, om = map_ball_tr_bk[w]
            if om > 0.0:
                expand_members.setdefault(z, []).append(w)
        for y_head in itertools.product((0, 1), repeat=k - 1):
            # one Hermitian equality on the B-systems space, assembled per
            # target orbit w: sum_{y_k} Tr_A[Q] = (1/|B|^n) sum Tr_{A Bk}[Q] (x) I
            coeffs_by_w = {}
            for yk in (0, 1):
                y = y_head + (yk,)
                for r in range(basis_x.size):
                    t, om = map_tr_a[r]
                    if om > 0.0:
                        coeffs_by_w.setdefault(t, {}).setdefault(y, np.zeros(basis_x.size, dtype=complex))
                        coeffs_by_w[t][y][r] += om
                    z, om2 = map_tr_abk[r]
                    if om2 > 0.0:
                        for w in expand_members.get(z, ()):
                            coeffs_by_w.setdefault(w, {}).setdefault(y, np.zeros(basis_x.size, dtype=complex))
                            coeffs_by_w[w][y][r] -= om2 / d_b ** n
            for w, per_y in sorted(coeffs_by_w.items()):
                if int(basis_ball.adjoint[w]) < w:
                    continue
                emit_scalar_complex(
                    [(beta[y], cv) for y, cv in sorted(per_y.items())],
                    tag="nonsig",
                )

    # success probability row
    gamma = channel.choi.entries
    succ = np.zeros(basis_x.size, dtype=complex)
    for r in range(basis_x.size):
        t, om = map_h[r]
        if om > 0.0:
            succ[r] = om * _gamma_power_trace(basis_ab1, t, gamma)
    succ /= float(d_b) ** (n * (k - 1))
    re_row = {}
    for y in y_tuples:
        if y[0] != 0:
            continue
        r_part, _ = beta[y].rows_from_complex(succ)
        for p, v in r_part.items():
            re_row[p] = re_row.get(p, 0.0) + v
    prob.add_equality(
        coeffs={"succ_slack": np.array([[-1.0]])}, free=re_row,
        rhs=1.0 - eps, tag="success",
    )

    return ReducedCapacitySdp(
        problem=prob, n=n, k=k, eps=eps, ppt=ppt,
        basis_x=basis_x, basis_a=basis_a, beta=beta, alpha=alpha,
    )


@dataclass
class ReducedBound:
    lambda_star: float
    bound_bits: float
    status: str
    gap: float
    iterations: int
    wall_ms: float
    ncoord: int
    rho: np.ndarray = None
    q_ops: dict = None


def reduced_capacity_bound(channel: Channel, n: int, eps: float, k: int = 1,
                           ppt: bool = True, seed: int = DEFAULT_SEED,
                           opts=None) -> ReducedBound:
    """Solve the reduced n-shot program; returns -log2 lambda* for N^(x n)."""
    import time as _time

    from .sdpcore import SolveOptions, solve

    t0 = _time.perf_counter()
    built = build_reduced_capacity_sdp(channel, n, eps, k=k, ppt=ppt, seed=seed)
    sol = solve(built.problem, opts or SolveOptions())
    wall = (_time.perf_counter() - t0) * 1e3
    lam = float(sol.primal_blocks["lam"][0, 0])
    rho = reconstruct(built.alpha.values_to_coeffs(sol.free_values), built.basis_a)
    q_ops = {
        y: reconstruct(built.beta[y].values_to_coeffs(sol.free_values), built.basis_x)
        for y in built.beta
    }
    return ReducedBound(
        lambda_star=lam,
        bound_bits=-math.log2(lam) if lam > 0 else math.inf,
        status=sol.status,
        gap=sol.duality_gap,
        iterations=sol.iterations,
        wall_ms=wall,
        ncoord=built.problem.ncoord,
        rho=rho,
        q_ops=q_ops,
    )
