"""Dense complex operator algebra over labeled multipartite systems.

An :class:`Operator` is a square complex matrix tagged with a
:class:`SystemLayout` describing its ordered tensor factors.  The index
convention is row-major with the leftmost subsystem most significant, so
``numpy.kron`` and C-order reshapes agree with the composite indexing.

All functions are pure; operators are immutable value objects.
"""

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import LayoutError, ValidationError

HERM_RTOL = 1e-9


@dataclass(frozen=True)
class SystemLayout:
    """Ordered list of (label, dimension) subsystems."""

    subsystems: tuple

    def __post_init__(self):
        subs = tuple((str(lbl), int(dim)) for lbl, dim in self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        labels = [lbl for lbl, _ in subs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate subsystem labels in {labels}")
        for lbl, dim in subs:
            if dim < 1:
                raise LayoutError(f"subsystem {lbl!r} has non-positive dimension {dim}")

    @property
    def labels(self) -> tuple:
        return tuple(lbl for lbl, _ in self.subsystems)

    @property
    def dims(self) -> tuple:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims)) if self.subsystems else 1

    def dim(self, label: str) -> int:
        for lbl, d in self.subsystems:
            if lbl == label:
                return d
        raise LayoutError(f"unknown subsystem label {label!r}")

    def axis(self, label: str) -> int:
        for i, (lbl, _) in enumerate(self.subsystems):
            if lbl == label:
                return i
        raise LayoutError(f"unknown subsystem label {label!r}")

    def drop(self, labels: Iterable) -> "SystemLayout":
        gone = set(labels)
        unknown = gone - set(self.labels)
        if unknown:
            raise LayoutError(f"unknown subsystem labels {sorted(unknown)}")
        return SystemLayout(tuple(s for s in self.subsystems if s[0] not in gone))


def layout(*subsystems) -> SystemLayout:
    """Shorthand: ``layout(("A", 2), ("B", 3))``."""
    return SystemLayout(tuple(subsystems))


@dataclass(frozen=True)
class Operator:
    """Dense complex matrix on an explicit subsystem layout."""

    layout: SystemLayout
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        d = self.layout.total_dim
        if arr.shape != (d, d):
            raise LayoutError(
                f"entries shape {arr.shape} does not match layout dimension {d}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "Operator":
        return Operator(self.layout, self.entries.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def tensor_view(self) -> np.ndarray:
        """Entries reshaped to (row axes..., col axes...) per subsystem."""
        dims = self.layout.dims
        return self.entries.reshape(dims + dims)


def identity(lay: SystemLayout) -> Operator:
    return Operator(lay, np.eye(lay.total_dim))


def from_matrix(lay: SystemLayout, matrix) -> Operator:
    return Operator(lay, np.asarray(matrix, dtype=complex))


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product; layout is a's subsystems followed by b's."""
    overlap = set(a.layout.labels) & set(b.layout.labels)
    if overlap:
        raise LayoutError(f"tensor factors share labels {sorted(overlap)}")
    lay = SystemLayout(a.layout.subsystems + b.layout.subsystems)
    return Operator(lay, np.kron(a.entries, b.entries))


def tensor_all(ops: Sequence[Operator]) -> Operator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def partial_trace(a: Operator, remove: Iterable) -> Operator:
    """Trace out the subsystems named in ``remove``.

    Satisfies Tr[(M (x) I_remove) a] = Tr[M partial_trace(a, remove)] for
    every M on the kept subsystems.
    """
    remove = set(remove)
    new_layout = a.layout.drop(remove)  # validates labels
    if not remove:
        return a
    n = len(a.layout.subsystems)
    arr = a.tensor_view()
    # Trace highest axis first so earlier axis numbers stay valid.
    removed_axes = sorted((a.layout.axis(lbl) for lbl in remove), reverse=True)
    nleft = n
    for ax in removed_axes:
        arr = np.trace(arr, axis1=ax, axis2=ax + nleft)
        nleft -= 1
    d = new_layout.total_dim
    return Operator(new_layout, arr.reshape(d, d))


def partial_transpose(a: Operator, transpose_on: Iterable) -> Operator:
    """Transpose in the computational basis on the selected subsystems."""
    chosen = set(transpose_on)
    unknown = chosen - set(a.layout.labels)
    if unknown:
        raise LayoutError(f"unknown subsystem labels {sorted(unknown)}")
    n = len(a.layout.subsystems)
    arr = a.tensor_view()
    axes = list(range(2 * n))
    for lbl in chosen:
        ax = a.layout.axis(lbl)
        axes[ax], axes[ax + n] = axes[ax + n], axes[ax]
    d = a.dim
    return Operator(a.layout, arr.transpose(axes).reshape(d, d))


def reorder(a: Operator, new_labels: Sequence) -> Operator:
    """Reorder subsystems to the given label order (same operator, new indexing)."""
    new_labels = [str(l) for l in new_labels]
    if sorted(new_labels) != sorted(a.layout.labels):
        raise LayoutError(
            f"reorder labels {new_labels} are not a permutation of {list(a.layout.labels)}"
        )
    n = len(a.layout.subsystems)
    src = [a.layout.axis(lbl) for lbl in new_labels]
    axes = src + [s + n for s in src]
    new_layout = SystemLayout(tuple((lbl, a.layout.dim(lbl)) for lbl in new_labels))
    d = a.dim
    return Operator(new_layout, a.tensor_view().transpose(axes).reshape(d, d))


def permutation_unitary(lay: SystemLayout, block_labels: Sequence, pi: Sequence) -> Operator:
    """Unitary permuting equal-dimension subsystems of ``lay``.

    ``pi[i]`` is the destination slot (0-based, within ``block_labels``) of
    the i-th block subsystem, so conjugation sends the basis state
    |y_1 ... y_k> of the block to |y_{pi^-1(1)} ... y_{pi^-1(k)}>.  The
    representation law W(pi) W(sigma) = W(pi o sigma) holds with
    (pi o sigma)(i) = pi(sigma(i)).
    """
    block_labels = [str(l) for l in block_labels]
    k = len(block_labels)
    if sorted(pi) != list(range(k)):
        raise LayoutError(f"pi {list(pi)} is not a permutation of 0..{k - 1}")
    dims_blk = [lay.dim(lbl) for lbl in block_labels]
    if len(set(dims_blk)) > 1:
        raise LayoutError(f"block subsystems have unequal dimensions {dims_blk}")

    n = len(lay.subsystems)
    dims = lay.dims
    d = lay.total_dim
    block_axes = [lay.axis(lbl) for lbl in block_labels]
    inv = [0] * k
    for i, p in enumerate(pi):
        inv[p] = i

    # For every old composite index, compute the image index after moving
    # the content of block slot i to block slot pi[i].
    idx = np.unravel_index(np.arange(d), dims)
    new_idx = list(idx)
    for j in range(k):
        new_idx[block_axes[j]] = idx[block_axes[inv[j]]]
    dest = np.ravel_multi_index(tuple(new_idx), dims)
    w = np.zeros((d, d))
    w[dest, np.arange(d)] = 1.0
    return Operator(lay, w)


def max_entangled(d: int, labels=("A", "B")) -> Operator:
    """Standard maximally entangled state (1/d) sum_ij |ii><jj|."""
    if d < 1:
        raise LayoutError(f"dimension must be positive, got {d}")
    vec = np.zeros(d * d)
    vec[np.arange(d) * d + np.arange(d)] = 1.0
    phi = np.outer(vec, vec) / d
    return Operator(layout((labels[0], d), (labels[1], d)), phi)


@dataclass(frozen=True)
class Spectra:
    eigenvalues: np.ndarray
    trace_norm: float
    operator_norm: float
    min_eigenvalue: float


def hermitian_defect(a: Operator) -> float:
    """Operator norm of a - a^dag."""
    skew = (a.entries - a.entries.conj().T) / 2.0
    if not np.any(skew):
        return 0.0
    return 2.0 * float(np.max(np.abs(np.linalg.eigvalsh(1j * skew))))


def spectra_and_norms(a: Operator) -> Spectra:
    """Eigenvalues (ascending) and norms of a Hermitian operator.

    The input is symmetrized as (a + a^dag)/2 before eigendecomposition;
    inputs failing the Hermiticity tolerance are rejected.
    """
    herm = (a.entries + a.entries.conj().T) / 2.0
    eigs = np.linalg.eigvalsh(herm)
    opnorm = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    defect = hermitian_defect(a)
    if defect > HERM_RTOL * max(1.0, opnorm):
        raise ValidationError(
            f"operator is not Hermitian: ||a - a^dag|| = {defect:.3e}"
        )
    return Spectra(
        eigenvalues=eigs,
        trace_norm=float(np.sum(np.abs(eigs))),
        operator_norm=opnorm,
        min_eigenvalue=float(eigs[0]) if eigs.size else 0.0,
    )


def min_eig(a: Operator) -> float:
    herm = (a.entries + a.entries.conj().T) / 2.0
    return float(np.linalg.eigvalsh(herm)[0])


def psd_sqrt(matrix: np.ndarray, inverse: bool = False, cutoff: float = 1e-12):
    """Square root (or pseudo-inverse square root) of a PSD matrix.

    Eigenvalues below ``cutoff`` times the largest are treated as zero;
    with ``inverse`` the root is taken on the support only.  Also returns
    the support projector.
    """
    herm = (matrix + matrix.conj().T) / 2.0
    eigs, vecs = np.linalg.eigh(herm)
    top = float(eigs[-1]) if eigs.size else 0.0
    if top < 0:
        raise ValidationError("matrix is negative definite, no PSD square root")
    keep = eigs > cutoff * max(top, 1e-300)
    vals = np.zeros_like(eigs)
    if inverse:
        vals[keep] = 1.0 / np.sqrt(eigs[keep])
    else:
        vals[keep] = np.sqrt(eigs[keep])
    root = (vecs * vals) @ vecs.conj().T
    support = (vecs * keep.astype(float)) @ vecs.conj().T
    return root, support
