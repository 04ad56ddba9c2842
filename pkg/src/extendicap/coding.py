"""Coding-side machinery: codes, pretty-good measurement, bound chain.

A code is a finite family of encoder states with a decoder POVM.  The
module verifies the algebraic identities that drive the capacity upper
bound: measuring the channel output of the canonical purification of the
average encoded state with the local tester built from the pretty-good
measurement and the decoder yields the average success probability, and
replacing the channel by any trace-and-replace channel yields exactly
1/|M| regardless of the code.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import qlinalg as ql
from .channels import Channel, apply
from .errors import ValidationError
from .extendibility import Povm, make_povm, povm_from_json, povm_to_json
from .serialize import matrix_from_json, matrix_to_json

PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class Code:
    """Encoder states rho^m on A with a decoder POVM {Lambda^m} on B."""

    states: tuple          # of Operator
    decoder: Povm

    @property
    def size(self) -> int:
        return len(self.states)


def make_code(states, decoder: Povm) -> Code:
    ops = []
    for i, s in enumerate(states):
        op = s if isinstance(s, ql.Operator) else ql.Operator(
            ql.layout(("A", np.asarray(s).shape[0])), s
        )
        tr = float(np.real(op.trace()))
        if abs(tr - 1.0) > 1e-9 or ql.min_eig(op) < -1e-9:
            raise ValidationError(f"encoder state {i} is not a valid state")
        ops.append(op)
    if len(decoder.outcomes) != len(ops):
        raise ValidationError(
            f"decoder has {len(decoder.outcomes)} outcomes for {len(ops)} messages"
        )
    return Code(tuple(ops), decoder)


def error_probabilities(code: Code, channel: Channel):
    """(worst-case, average) decoding error over the uniform message prior."""
    decoder_ops = code.decoder.elements()
    worst = 0.0
    total = 0.0
    for rho, lam in zip(code.states, decoder_ops):
        out = apply(channel, rho)
        succ = float(np.real(np.vdot(lam.entries, out.entries)))
        worst = max(worst, 1.0 - succ)
        total += succ
    avg = 1.0 - total / code.size
    return worst, avg


def unnormalized_mes(d: int) -> np.ndarray:
    vec = np.zeros(d * d)
    vec[np.arange(d) * d + np.arange(d)] = 1.0
    return np.outer(vec, vec)


def canonical_purification(rho: ql.Operator) -> ql.Operator:
    """(I (x) sqrt(rho)) Gamma (I (x) sqrt(rho)) on systems R, A."""
    d = rho.dim
    tr = float(np.real(rho.trace()))
    if abs(tr - 1.0) > 1e-9 or ql.min_eig(rho) < -1e-9:
        raise ValidationError("purification input must be a state")
    root, _ = ql.psd_sqrt(rho.entries)
    lift = np.kron(np.eye(d), root)
    psi = lift @ unnormalized_mes(d) @ lift
    return ql.Operator(ql.layout(("R", d), ("A", d)), psi)


def pretty_good_measurement(states) -> Povm:
    """PGM of an ensemble with uniform weights, as a POVM on the reference.

    Elements are (1/|M|) (avg^-1/2 rho^m avg^-1/2)^T with the inverse on
    the support of the average state; when the average is rank-deficient
    the elements sum to the support projector only, so a final reject
    outcome (identity minus the support projector) completes the POVM.
    """
    ops = [s.entries if isinstance(s, ql.Operator) else np.asarray(s, dtype=complex)
           for s in states]
    if not ops:
        raise ValidationError("pretty-good measurement needs at least one state")
    d = ops[0].shape[0]
    avg = sum(ops) / len(ops)
    inv_root, support = ql.psd_sqrt(avg, inverse=True, cutoff=PINV_CUTOFF)
    lay = ql.layout(("R", d))
    outcomes = []
    for m, rho in enumerate(ops):
        theta = (inv_root @ rho @ inv_root).T / len(ops)
        outcomes.append((m, theta))
    reject = np.eye(d) - support.T
    if float(np.linalg.norm(reject, 2)) > 1e-12:
        outcomes.append(("reject", reject))
    return make_povm(lay, outcomes)


def lo_tester(theta: Povm, lam: Povm) -> ql.Operator:
    """Same-outcome tester Omega = sum_m Theta^m (x) Lambda^m.

    A trailing "reject" outcome (as added by a rank-deficient PGM) never
    matches any counterpart, so it is skipped on either side.
    """
    t_out = [op for lbl, op in theta.outcomes if lbl != "reject"]
    l_out = [op for lbl, op in lam.outcomes if lbl != "reject"]
    if len(t_out) != len(l_out):
        raise ValidationError(
            f"outcome counts differ: {len(t_out)} vs {len(l_out)}"
        )
    total = 0.0
    for t_op, l_op in zip(t_out, l_out):
        total = total + np.kron(t_op.entries, l_op.entries)
    lay = ql.SystemLayout(theta.layout.subsystems + lam.layout.subsystems)
    return ql.Operator(lay, total)


@dataclass
class BoundChainReport:
    accept_channel: float        # Tr[Omega N(psi_bar)]
    accept_replace: float        # Tr[Omega R_sigma(psi_bar)]
    average_error: float
    worst_error: float
    identity_channel_residual: float   # |accept_channel - (1 - avg error)|
    identity_replace_residual: float   # |accept_replace - 1/|M||
    implied_bits: float                # -log2 accept_replace
    capacity_bits: float = math.nan    # k=1 bound at eps = worst error
    bound_ordering_ok: bool = True


def verify_bound_chain(code: Code, channel: Channel, sigma: ql.Operator,
                       check_capacity: bool = False) -> BoundChainReport:
    """Check the two tester identities and the implied rate bound.

    With ``check_capacity`` the k = 1 capacity bound is solved at the
    code's worst-case error and compared against log2 |M|.
    """
    d_b = channel.dim_out
    sig = sigma.entries if isinstance(sigma, ql.Operator) else np.asarray(sigma)
    if sig.shape != (d_b, d_b):
        raise ValidationError("sigma must be a state on the channel output")

    worst, avg = error_probabilities(code, channel)
    avg_state = ql.Operator(code.states[0].layout,
                            sum(s.entries for s in code.states) / code.size)
    psi = canonical_purification(avg_state)
    theta = pretty_good_measurement(code.states)
    omega = lo_tester(theta, code.decoder)

    # N acts on the A half of the purification
    d_r = avg_state.dim
    n_psi = _apply_on_second(channel, psi)
    accept_channel = float(np.real(np.vdot(omega.entries, n_psi)))

    # trace-and-replace output: psi_R (x) sigma = avg_state^T (x) sigma
    r_psi = np.kron(ql.partial_trace(psi, {"A"}).entries, sig)
    accept_replace = float(np.real(np.vdot(omega.entries, r_psi)))

    report = BoundChainReport(
        accept_channel=accept_channel,
        accept_replace=accept_replace,
        average_error=avg,
        worst_error=worst,
        identity_channel_residual=abs(accept_channel - (1.0 - avg)),
        identity_replace_residual=abs(accept_replace - 1.0 / code.size),
        implied_bits=-math.log2(accept_replace),
    )
    if check_capacity:
        from .capacity import CapacityQuery, capacity_bound

        eps = min(worst, 1.0 - 1e-9 - 1e-12)
        res = capacity_bound(CapacityQuery(channel=channel, epsilon=eps, k=1,
                                           ppt=True))
        report.capacity_bits = res.bound_bits
        report.bound_ordering_ok = (
            math.log2(code.size) <= res.bound_bits + 1e-4 and res.status == "optimal"
        )
    return report


def _apply_on_second(channel: Channel, psi: ql.Operator) -> np.ndarray:
    """(id_R (x) N)(psi) for psi on R, A via the Choi contraction."""
    d_r = psi.layout.dim("R")
    d_a = psi.layout.dim("A")
    d_b = channel.dim_out
    # Tr_A[(I_R (x) rho^T_A (x) I_B)(I_R (x) Choi_{AB})] computed by index algebra
    t = psi.entries.reshape(d_r, d_a, d_r, d_a)
    gamma = channel.choi.entries.reshape(d_a, d_b, d_a, d_b)
    # out[r b, r' b'] = sum_{a a'} psi[r a, r' a'] gamma[a b, a' b']
    out = np.einsum("rasc,abce->rbse", t, gamma, optimize=True)
    return out.reshape(d_r * d_b, d_r * d_b)


def code_to_json(code: Code) -> dict:
    return {
        "states": [matrix_to_json(s.entries) for s in code.states],
        "decoder": povm_to_json(code.decoder),
    }


def code_from_json(data) -> Code:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        states = [matrix_from_json(s) for s in data["states"]]
        decoder = povm_from_json(data["decoder"])
    except KeyError as exc:
        raise ValidationError(f"code JSON is missing {exc}") from exc
    return make_code(states, decoder)
