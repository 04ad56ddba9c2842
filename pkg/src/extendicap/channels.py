"""Quantum channels as Choi operators.

The Choi operator of a channel N from a d-dimensional input to an output
system B is N applied to d times the maximally entangled state, with the
untouched reference system R as the *left* tensor factor:

    Choi = (id_R (x) N)(d Phi_RA),   Tr_B[Choi] = I_R,   Choi >= 0.

Note Tr[Choi] = dim_in, not 1; the unit-trace Choi state is obtained by
dividing by dim_in explicitly where needed, never implicitly.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import qlinalg as ql
from .config import check_dim
from .errors import ValidationError
from .serialize import matrix_from_json, matrix_to_json

CP_TOL = 1e-9
TP_TOL = 1e-9


@dataclass(frozen=True)
class Channel:
    dim_in: int
    dim_out: int
    choi: ql.Operator  # layout [("R", dim_in), ("B", dim_out)]


def channel_from_choi(dim_in: int, dim_out: int, choi) -> Channel:
    """Validate a Choi operator and wrap it as a Channel.

    Raises :class:`ValidationError` with the offending residual when the
    operator fails complete positivity or trace preservation.
    """
    dim_in, dim_out = int(dim_in), int(dim_out)
    check_dim(dim_in * dim_out, "Choi operator")
    if isinstance(choi, ql.Operator):
        mat = choi.entries
    else:
        mat = np.asarray(choi, dtype=complex)
    if mat.shape != (dim_in * dim_out, dim_in * dim_out):
        raise ValidationError(
            f"Choi matrix has shape {mat.shape}, expected {(dim_in * dim_out,) * 2}"
        )
    op = ql.Operator(ql.layout(("R", dim_in), ("B", dim_out)), mat)

    defect = ql.hermitian_defect(op)
    norm = float(np.linalg.norm(mat, 2))
    if defect > CP_TOL * max(1.0, norm):
        raise ValidationError(f"Choi operator is not Hermitian: defect {defect:.3e}")
    min_eig = ql.min_eig(op)
    if min_eig < -CP_TOL * max(1.0, norm):
        raise ValidationError(
            f"channel is not completely positive: min Choi eigenvalue {min_eig:.3e}"
        )
    marg = ql.partial_trace(op, {"B"}).entries - np.eye(dim_in)
    tp_res = float(np.linalg.norm(marg, 2))
    if tp_res > TP_TOL:
        raise ValidationError(
            f"channel is not trace preserving: ||Tr_B Choi - I|| = {tp_res:.3e}"
        )
    return Channel(dim_in, dim_out, op)


def example_channel() -> Channel:
    """The qutrit channel with Choi (6/7) Phi+ + (15/7) sigma+.

    Phi+ is the rank-three maximally entangled state and sigma+ the
    uniform mixture of |01>, |12>, |20>.
    """
    phi = ql.max_entangled(3, labels=("R", "B")).entries
    sigma = np.zeros((9, 9))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        k = 3 * a + b
        sigma[k, k] = 1.0 / 3.0
    choi = (6.0 / 7.0) * phi + (15.0 / 7.0) * sigma
    return channel_from_choi(3, 3, choi)


def identity_channel(d: int) -> Channel:
    gamma = d * ql.max_entangled(d, labels=("R", "B")).entries
    return channel_from_choi(d, d, gamma)


def replacer_channel(d: int, sigma=None) -> Channel:
    """Trace-and-replace channel rho -> Tr[rho] sigma (default: I/d)."""
    if sigma is None:
        sigma = np.eye(d) / d
    sigma = np.asarray(sigma, dtype=complex)
    gamma = np.kron(np.eye(d), sigma)
    return channel_from_choi(d, d, gamma)


def depolarizing_channel(d: int, p: float) -> Channel:
    """rho -> (1-p) rho + p Tr[rho] I/d."""
    if not 0.0 <= p <= 1.0 + 1e-12:
        raise ValidationError(f"depolarizing parameter must be in [0, 1], got {p}")
    gamma = (1.0 - p) * d * ql.max_entangled(d, labels=("R", "B")).entries
    gamma = gamma + (p / d) * np.eye(d * d)
    return channel_from_choi(d, d, gamma)


def apply(channel: Channel, state: ql.Operator) -> ql.Operator:
    """Apply the channel through its Choi operator: Tr_R[(rho^T (x) I) Choi]."""
    rho = state.entries if isinstance(state, ql.Operator) else np.asarray(state, dtype=complex)
    if rho.shape != (channel.dim_in, channel.dim_in):
        raise ValidationError(
            f"state dimension {rho.shape} does not match channel input {channel.dim_in}"
        )
    lifted = np.kron(rho.T, np.eye(channel.dim_out)) @ channel.choi.entries
    op = ql.Operator(channel.choi.layout, lifted)
    return ql.partial_trace(op, {"R"})


def kraus_operators(channel: Channel, cutoff: float = 1e-12) -> list:
    """Kraus operators from the Choi eigendecomposition (for cross-checks)."""
    w, v = np.linalg.eigh(channel.choi.entries)
    top = max(float(w[-1]), 0.0)
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > cutoff * max(top, 1e-300):
            ops.append(np.sqrt(lam) * vec.reshape(channel.dim_in, channel.dim_out).T)
    return ops


def apply_kraus(channel: Channel, state) -> np.ndarray:
    rho = state.entries if isinstance(state, ql.Operator) else np.asarray(state, dtype=complex)
    return sum(k @ rho @ k.conj().T for k in kraus_operators(channel))


def tensor_power(channel: Channel, n: int) -> Channel:
    """Choi of the n-fold tensor power, ordered R_1..R_n B_1..B_n."""
    if n < 1:
        raise ValidationError(f"tensor power requires n >= 1, got {n}")
    if n == 1:
        return channel
    check_dim((channel.dim_in * channel.dim_out) ** n, "tensor power Choi")
    parts = []
    for i in range(1, n + 1):
        lay = ql.layout((f"R{i}", channel.dim_in), (f"B{i}", channel.dim_out))
        parts.append(ql.Operator(lay, channel.choi.entries))
    big = ql.tensor_all(parts)
    order = [f"R{i}" for i in range(1, n + 1)] + [f"B{i}" for i in range(1, n + 1)]
    big = ql.reorder(big, order)
    return channel_from_choi(channel.dim_in ** n, channel.dim_out ** n, big.entries)


def named_channel(name: str) -> Channel:
    """Built-in channels: example29, identity:d, replacer:d, depolarizing:d:p."""
    parts = name.split(":")
    kind = parts[0]
    try:
        if kind == "example29" and len(parts) == 1:
            return example_channel()
        if kind == "identity" and len(parts) == 2:
            return identity_channel(int(parts[1]))
        if kind == "replacer" and len(parts) == 2:
            return replacer_channel(int(parts[1]))
        if kind == "depolarizing" and len(parts) == 3:
            return depolarizing_channel(int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValidationError(f"bad channel spec {name!r}: {exc}") from exc
    raise ValidationError(f"unknown channel {name!r}")


def channel_to_json(channel: Channel) -> dict:
    return {
        "dim_in": channel.dim_in,
        "dim_out": channel.dim_out,
        "choi": matrix_to_json(channel.choi.entries),
    }


def channel_from_json(data) -> Channel:
    if isinstance(data, str):
        data = json.loads(data)
    for key in ("dim_in", "dim_out", "choi"):
        if key not in data:
            raise ValidationError(f"channel JSON is missing {key!r}")
    return channel_from_choi(
        int(data["dim_in"]), int(data["dim_out"]), matrix_from_json(data["choi"])
    )


def load_channel(spec: str) -> Channel:
    """Resolve a CLI channel argument: a built-in name or a JSON file path."""
    import os

    if os.path.exists(spec):
        with open(spec) as fh:
            return channel_from_json(json.load(fh))
    return named_channel(spec)
