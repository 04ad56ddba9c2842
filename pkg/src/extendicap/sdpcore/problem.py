"""Block-structured standard-form semidefinite programs.

A problem is

    min  <C, X> + f.z   s.t.   <A_i, X> + a_i.z = b_i,   X_b >= 0,  z free,

where X ranges over a list of named PSD blocks and z over free scalars.
Blocks are real symmetric, or complex Hermitian lowered to the real
symmetric embedding [[Re H, -Im H], [Im H, Re H]].  Coefficient matrices
for complex blocks are supplied as complex Hermitian arrays of the
complex dimension; the lowering and the lift back are handled here.

Internally every block has an orthonormal coordinate basis (a scaled
svec), so <A, X> is a plain dot product of coordinate vectors.  Rows are
stored sparsely in those coordinates.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError


def herm_embed(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[R, -J], [J, R]] of a Hermitian matrix."""
    r, j = h.real, h.imag
    return np.block([[r, -j], [j, r]])


def herm_lift(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`herm_embed`, averaging over the embedded structure.

    For any symmetric PSD ``x`` the lift is Hermitian PSD, and
    ``herm_lift(herm_embed(h)) == h`` exactly.
    """
    d = x.shape[0] // 2
    r = (x[:d, :d] + x[d:, d:]) / 2.0
    j = (x[d:, :d] - x[:d, d:]) / 2.0
    return r + 1j * j


@dataclass
class BlockSpec:
    name: str
    dim: int            # complex dimension for complex blocks
    complex: bool
    coord_offset: int

    @property
    def real_dim(self) -> int:
        return 2 * self.dim if self.complex else self.dim

    @property
    def coord_dim(self) -> int:
        return self.dim * self.dim if self.complex else self.dim * (self.dim + 1) // 2


_SQRT2 = np.sqrt(2.0)


def _sym_coord_maps(n):
    """Index arrays mapping a real symmetric n x n matrix to svec coords."""
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, _SQRT2)
    return iu, scale


def sym_to_coords(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    iu, scale = _sym_coord_maps(n)
    return a[iu] * scale


def coords_to_sym(v: np.ndarray, n: int) -> np.ndarray:
    iu, scale = _sym_coord_maps(n)
    out = np.zeros((n, n))
    out[iu] = v / scale
    out = out + out.T - np.diag(np.diag(out))
    return out


def _herm_index_maps(d):
    iu = np.triu_indices(d, k=1)
    return iu


def herm_to_coords(a: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian coefficient matrix.

    Scaled so that, against the variable coordinates used for complex
    blocks, the dot product equals <A, H> = Tr[A H].
    """
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    iu = _herm_index_maps(d)
    off = a[iu]
    # hvec(A)/sqrt(2): [diag/sqrt2 ; Re off ; Im off]
    return np.concatenate([a.diagonal().real / _SQRT2, off.real, off.imag])


def coords_to_herm(v: np.ndarray, d: int) -> np.ndarray:
    """Hermitian matrix whose variable coordinates are ``v``.

    Variable coordinates are sqrt(2) * hvec(H), the orthonormal
    coordinates of the real embedding.
    """
    iu = _herm_index_maps(d)
    noff = iu[0].size
    out = np.zeros((d, d), dtype=complex)
    out[np.arange(d), np.arange(d)] = v[:d] / _SQRT2
    off = (v[d:d + noff] + 1j * v[d + noff:]) / 2.0
    out[iu] = off
    out[iu[1], iu[0]] = off.conj()
    return out


def block_materialization(spec: BlockSpec) -> sp.csr_matrix:
    """Sparse map: block coordinates -> flattened real symmetric matrix.

    Columns form an orthonormal basis of the block's matrix subspace
    under the trace inner product, so coordinate dot products equal
    matrix inner products.
    """
    if not spec.complex:
        n = spec.dim
        iu, _ = _sym_coord_maps(n)
        rows, cols, vals = [], [], []
        for k, (i, j) in enumerate(zip(*iu)):
            if i == j:
                rows.append(i * n + j)
                cols.append(k)
                vals.append(1.0)
            else:
                for (a, b) in ((i, j), (j, i)):
                    rows.append(a * n + b)
                    cols.append(k)
                    vals.append(1.0 / _SQRT2)
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(n * n, spec.coord_dim)
        )
    d = spec.dim
    n = 2 * d
    iu = _herm_index_maps(d)
    noff = iu[0].size
    rows, cols, vals = [], [], []
    # diagonal coords: emb(E_jj)/sqrt(2)
    for j in range(d):
        for a in (j, j + d):
            rows.append(a * n + a)
            cols.append(j)
            vals.append(1.0 / _SQRT2)
    # real off-diagonal coords: emb((E_ij + E_ji)/sqrt(2))/sqrt(2)
    for k, (i, j) in enumerate(zip(*iu)):
        col = d + k
        for (a, b) in ((i, j), (j, i), (i + d, j + d), (j + d, i + d)):
            rows.append(a * n + b)
            cols.append(col)
            vals.append(0.5)
    # imaginary off-diagonal coords: emb(i(E_ij - E_ji)/sqrt(2))/sqrt(2)
    for k, (i, j) in enumerate(zip(*iu)):
        col = d + noff + k
        for (a, b, v) in (
            (i, j + d, -0.5),
            (j, i + d, 0.5),
            (i + d, j, 0.5),
            (j + d, i, -0.5),
        ):
            rows.append(a * n + b)
            cols.append(col)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n * n, d * d))


class SdpProblem:
    """Incrementally built standard-form SDP."""

    def __init__(self):
        self.blocks: list[BlockSpec] = []
        self._block_index: dict[str, int] = {}
        self.free_names: list[str] = []
        self._free_index: dict[str, int] = {}
        self._ncoord = 0
        self._obj_entries: dict[int, float] = {}
        # sparse rows: triplets
        self._row_ptr: list[int] = [0]
        self._col_idx: list[int] = []
        self._val: list[float] = []
        self.rhs: list[float] = []
        self.row_tags: list[str] = []

    # ------------------------------------------------------------------
    # construction

    def add_psd_block(self, name: str, dim: int, complex: bool = False) -> str:
        if name in self._block_index:
            raise ValidationError(f"duplicate block name {name!r}")
        spec = BlockSpec(name, int(dim), bool(complex), self._ncoord)
        self._block_index[name] = len(self.blocks)
        self.blocks.append(spec)
        self._ncoord += spec.coord_dim
        return name

    def add_free(self, name: str) -> str:
        if name in self._block_index or name in self._free_index:
            raise ValidationError(f"duplicate variable name {name!r}")
        self._free_index[name] = len(self.free_names)
        self.free_names.append(name)
        return name

    @property
    def nfree(self) -> int:
        return len(self.free_names)

    @property
    def ncoord(self) -> int:
        return self._ncoord + self.nfree

    @property
    def nrows(self) -> int:
        return len(self.rhs)

    def block(self, name: str) -> BlockSpec:
        return self.blocks[self._block_index[name]]

    def _free_offset(self, name: str) -> int:
        return self._ncoord + self._free_index[name]

    def _free_ref(self, name: str) -> int:
        # frees are stored as negative indices until the coordinate layout is
        # final, since adding blocks shifts the free-variable offsets
        return -(self._free_index[name] + 1)

    def _resolve(self, idx: int) -> int:
        return idx if idx >= 0 else self._ncoord + (-idx - 1)

    def _coords_of(self, name: str, matrix) -> tuple:
        spec = self.block(name)
        arr = np.asarray(matrix)
        expect = (spec.dim, spec.dim)
        if arr.shape != expect:
            raise ValidationError(
                f"coefficient for block {name!r} has shape {arr.shape}, expected {expect}"
            )
        if spec.complex:
            if np.max(np.abs(arr - arr.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(arr))):
                raise ValidationError(f"coefficient for complex block {name!r} is not Hermitian")
            v = herm_to_coords(arr)
        else:
            if np.iscomplexobj(arr) and np.max(np.abs(arr.imag)) > 0:
                raise ValidationError(f"coefficient for real block {name!r} is complex")
            arr = arr.real
            if np.max(np.abs(arr - arr.T)) > 1e-12 * max(1.0, np.max(np.abs(arr))):
                raise ValidationError(f"coefficient for block {name!r} is not symmetric")
            v = sym_to_coords((arr + arr.T) / 2.0)
        nz = np.nonzero(v)[0]
        return spec.coord_offset + nz, v[nz]

    def add_objective(self, block_costs: dict = None, free_costs: dict = None):
        """Accumulate objective terms; <C_b, X_b> for blocks, coefficient * z for frees."""
        for name, mat in (block_costs or {}).items():
            idx, vals = self._coords_of(name, mat)
            for i, v in zip(idx, vals):
                self._obj_entries[int(i)] = self._obj_entries.get(int(i), 0.0) + float(v)
        for name, v in (free_costs or {}).items():
            i = self._free_ref(name)
            self._obj_entries[i] = self._obj_entries.get(i, 0.0) + float(v)

    def add_equality(self, coeffs: dict = None, free: dict = None, rhs: float = 0.0, tag: str = ""):
        """Add one scalar equality row."""
        cols, vals = [], []
        for name, mat in (coeffs or {}).items():
            idx, v = self._coords_of(name, mat)
            cols.extend(int(i) for i in idx)
            vals.extend(float(x) for x in v)
        for name, v in (free or {}).items():
            if v != 0.0:
                cols.append(self._free_ref(name))
                vals.append(float(v))
        self._col_idx.extend(cols)
        self._val.extend(vals)
        self._row_ptr.append(len(self._col_idx))
        self.rhs.append(float(rhs))
        self.row_tags.append(tag)

    # ------------------------------------------------------------------
    # assembled views

    def equality_matrix(self) -> sp.csr_matrix:
        indptr = np.asarray(self._row_ptr, dtype=np.int64)
        cols = np.asarray(self._col_idx, dtype=np.int64)
        neg = cols < 0
        if np.any(neg):
            cols = cols.copy()
            cols[neg] = self._ncoord + (-cols[neg] - 1)
        return sp.csr_matrix(
            (np.asarray(self._val), cols, indptr),
            shape=(self.nrows, self.ncoord),
        )

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.ncoord)
        for i, v in self._obj_entries.items():
            c[self._resolve(i)] = v
        return c

    def rhs_vector(self) -> np.ndarray:
        return np.asarray(self.rhs, dtype=float)

    def coords_of_solution(self, block_values: dict, free_values: dict) -> np.ndarray:
        """Coordinate vector of a candidate solution (for residual checks)."""
        x = np.zeros(self.ncoord)
        for spec in self.blocks:
            val = np.asarray(block_values[spec.name])
            if spec.complex:
                v = herm_to_coords(val) * 2.0  # variable coords are sqrt(2) hvec
            else:
                v = sym_to_coords((val + val.T) / 2.0)
            x[spec.coord_offset:spec.coord_offset + spec.coord_dim] = v
        for i, name in enumerate(self.free_names):
            x[self._ncoord + i] = float(free_values[name])
        return x

    def block_value_from_coords(self, name: str, x: np.ndarray):
        spec = self.block(name)
        v = x[spec.coord_offset:spec.coord_offset + spec.coord_dim]
        if spec.complex:
            return coords_to_herm(v, spec.dim)
        return coords_to_sym(v, spec.dim)

    def free_value_from_coords(self, name: str, x: np.ndarray) -> float:
        return float(x[self._free_offset(name)])

    def rows_touching(self, name: str) -> list:
        """Row indices with a nonzero coefficient on the named block (audit helper)."""
        spec = self.block(name)
        lo, hi = spec.coord_offset, spec.coord_offset + spec.coord_dim
        out = []
        cols = np.asarray(self._col_idx)
        for r in range(self.nrows):
            seg = cols[self._row_ptr[r]:self._row_ptr[r + 1]]
            if np.any((seg >= lo) & (seg < hi)):
                out.append(r)
        return out

    # ------------------------------------------------------------------
    # debug dump

    def dump(self, fh):
        """Plain-text sparse dump: one line per nonzero.

        Format:
            BLOCK name dim kind
            FREE name
            OBJ  coord value
            ROW  row tag rhs
            ENT  row coord value

        Coordinates index the orthonormal svec coordinates of each block
        (blocks in declaration order, frees last).
        """
        for spec in self.blocks:
            kind = "herm" if spec.complex else "sym"
            fh.write(f"BLOCK {spec.name} {spec.dim} {kind}\n")
        for name in self.free_names:
            fh.write(f"FREE {name}\n")
        for i, v in sorted((self._resolve(i0), v0) for i0, v0 in self._obj_entries.items()):
            fh.write(f"OBJ {i} {v!r}\n")
        for r in range(self.nrows):
            fh.write(f"ROW {r} {self.row_tags[r] or '-'} {self.rhs[r]!r}\n")
            for k in range(self._row_ptr[r], self._row_ptr[r + 1]):
                fh.write(f"ENT {r} {self._resolve(self._col_idx[k])} {self._val[k]!r}\n")


@dataclass
class SdpSolution:
    """Primal-dual solution bundle for an :class:`SdpProblem`."""

    status: str
    primal_blocks: dict
    free_values: dict
    primal_objective: float
    dual_objective: float
    duality_gap: float
    dual_multipliers: np.ndarray
    dual_slacks: dict
    primal_residual: float
    dual_residual: float
    iterations: int
    wall_time: float
    notes: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"
