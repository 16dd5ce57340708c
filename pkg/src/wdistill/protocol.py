"""Three-copies-to-one recurrence distillation of the 3-qubit W state.

Three parties A, B, C share three copies of an 8-dimensional mixed state.
The joint 9-qubit state gamma = rho^(x3) is laid out copy-major: global
qubits (0..8) are A1, B1, C1, A2, B2, C2, A3, B3, C3, so party A holds
qubits {0, 3, 6}, B holds {1, 4, 7} and C holds {2, 5, 8}.  Each party
measures two commuting stabilizer products on its own triple (local qubit
j = its qubit from copy j), keeps runs where all three parties saw the
same outcome, and contracts its triple to a single qubit by a majority
rule.  The main subprotocol keeps the three mixed outcomes; the dual
subprotocol first rotates every party's local computational basis by the
exchange permutation V, measures the complementary (mutually unbiased)
stabilizers instead, and keeps only the remaining outcome.

Because the contraction is supported exactly on the measured eigenspace,
each branch is a single 2x8 operator per party; the full branch map is the
8x512 composition of the three, applied to gamma directly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .qmath import basis_ket, clip_to_physical, dag, fidelity_with_pure, kron, H
from .wbasis import (
    dual_w_basis_vector,
    lambda_op,
    relabel_unitary,
    stabilizer,
    v_exchange,
    w_basis_matrix,
    w_basis_vector,
)

# 2-bit measurement outcomes [m1, m2].  The three kept by the main
# subprotocol pair a majority-0 basis label with its complement.
OUTCOME_0 = (0, 0)
OUTCOME_1 = (0, 1)
OUTCOME_2 = (1, 0)
OUTCOME_3 = (1, 1)
COINCIDENT_OUTCOMES = (OUTCOME_1, OUTCOME_2, OUTCOME_3)
ALL_OUTCOMES = (OUTCOME_0, OUTCOME_1, OUTCOME_2, OUTCOME_3)

PARTIES = ("A", "B", "C")
PARTY_QUBITS = {"A": (0, 3, 6), "B": (1, 4, 7), "C": (2, 5, 8)}
COPY_QUBITS = ((0, 1, 2), (3, 4, 5), (6, 7, 8))

PER_PARTY = "per-party"
PER_COPY = "per-copy"
V_PLACEMENTS = (PER_PARTY, PER_COPY)
# Pinned by reproducing the published behaviour of the dual subprotocol
# (depolarizing retrieval threshold near 0.48 and the undistillable fixed
# point); also the only placement each party can perform locally.
DEFAULT_V_PLACEMENT = PER_PARTY

# A branch whose success probability falls below this is treated as exactly
# degenerate: tr of an 8x512 * 512x512 * 512x8 product carries absolute
# roundoff up to ~1e-13, so smaller values are indistinguishable from zero.
DEGENERATE_P = 1e-14
# Floor used by the greedy step selector before trusting a branch output.
P_FLOOR = 1e-12

FIXED_POINT_ATOL = 1e-9
FIXED_POINT_STREAK = 2
TIE_TOL = 1e-12


class DegenerateOutcomeError(RuntimeError):
    """The selected outcomes never occur on this input state."""


@dataclass(frozen=True)
class StepResult:
    """Output of one recurrence step."""

    rho_out: np.ndarray
    p_success: float
    subprotocol: str            # "P" or "Pbar"
    fidelity: float             # <W_000| rho_out |W_000>
    relabel_applied: int | None = None


@dataclass
class Trajectory:
    """A full distillation run and its bookkeeping."""

    steps: list[StepResult]
    final_rho: np.ndarray
    reason: str                 # "target", "fixed_point" or "max_steps"
    yield_estimate: float
    classification: str | None = None

    def fidelities(self) -> list[float]:
        return [s.fidelity for s in self.steps]


def party_of(qubit: int) -> str:
    """Party owning a global qubit index."""
    if not 0 <= qubit < 9:
        raise ValueError(f"global qubit index must be in 0..8, got {qubit}")
    return PARTIES[qubit % 3]


def copy_of(qubit: int) -> int:
    """Copy (1..3) owning a global qubit index."""
    if not 0 <= qubit < 9:
        raise ValueError(f"global qubit index must be in 0..8, got {qubit}")
    return qubit // 3 + 1


def outcome_labels(m: tuple[int, int]) -> tuple[int, int]:
    """The two basis labels selected by an outcome, majority-0 label first.

    Outcome [m1, m2] selects the labels with k1+k2 = m1 and k1+k3 = m2
    (mod 2): a complementary pair {x, 7-x}.
    """
    if m not in ALL_OUTCOMES:
        raise ValueError(f"outcome must be one of {ALL_OUTCOMES}, got {m}")
    m1, m2 = m
    low = (m1 << 1) | m2          # the member with k1 = 0
    if bin(low).count("1") > 1:   # majority rule orders the pair
        low = 7 - low
    return low, 7 - low


def measurement_operator(m: tuple[int, int], dual: bool = False) -> np.ndarray:
    """Rank-two projector for one local measurement outcome.

    (1/4) (1 + (-1)^m1 K1 K2)(1 + (-1)^m2 K1 K3), with the stabilizers
    conjugated into the complementary basis when ``dual`` is set.  The four
    projectors are orthogonal and sum to the identity.
    """
    if m not in ALL_OUTCOMES:
        raise ValueError(f"outcome must be one of {ALL_OUTCOMES}, got {m}")
    m1, m2 = m
    eye = np.eye(8, dtype=complex)
    k12 = stabilizer({1, 2}).matrix
    k13 = stabilizer({1, 3}).matrix
    if dual:
        lam = lambda_op()
        k12 = dag(lam) @ k12 @ lam
        k13 = dag(lam) @ k13 @ lam
    return 0.25 * (eye + (-1) ** m1 * k12) @ (eye + (-1) ** m2 * k13)


def contraction(m: tuple[int, int], dual: bool = False) -> np.ndarray:
    """The 2x8 majority-rule contraction for one coincident outcome.

    Main subprotocol (outcomes 1, 2, 3): |0><W_low| + |1><W_high| with
    (low, high) the outcome's majority-ordered label pair.  Dual
    subprotocol (outcome 0 only): the opposite assignment through a final
    Hadamard, H|1><dual_000| + H|0><dual_111|.  Either way L L^dag = 1.
    """
    if dual:
        if m != OUTCOME_0:
            raise ValueError(f"dual contraction exists only for outcome {OUTCOME_0}, got {m}")
        return (np.outer(H @ basis_ket(1, 1), dual_w_basis_vector(0b000).conj())
                + np.outer(H @ basis_ket(0, 1), dual_w_basis_vector(0b111).conj()))
    if m not in COINCIDENT_OUTCOMES:
        raise ValueError(f"contraction exists only for outcomes {COINCIDENT_OUTCOMES}, got {m}")
    low, high = outcome_labels(m)
    return (np.outer(basis_ket(0, 1), w_basis_vector(low).conj())
            + np.outer(basis_ket(1, 1), w_basis_vector(high).conj()))


@lru_cache(maxsize=1)
def _party_major_index() -> np.ndarray:
    """Column permutation from copy-major to party-major qubit order."""
    order = PARTY_QUBITS["A"] + PARTY_QUBITS["B"] + PARTY_QUBITS["C"]
    pm = np.zeros(512, dtype=np.intp)
    for j in range(512):
        bits = [(j >> (8 - g)) & 1 for g in range(9)]
        pm[j] = sum(bits[order[p]] << (8 - p) for p in range(9))
    return pm


def branch_operator(local_op: np.ndarray) -> np.ndarray:
    """The 8x512 joint branch map applying the same 2x8 local operator to
    every party's qubit triple of the copy-major 9-qubit state."""
    return kron(local_op, local_op, local_op)[:, _party_major_index()]


@lru_cache(maxsize=None)
def _branch_tensors(subprotocol: str, v_placement: str) -> tuple:
    """Branch operators reshaped to (out, copy1, copy2, copy3) plus their
    conjugates, cached per configuration."""
    if subprotocol == "P":
        ops = [branch_operator(contraction(m)) for m in COINCIDENT_OUTCOMES]
    else:
        local = contraction(OUTCOME_0, dual=True)
        if v_placement == PER_PARTY:
            local = local @ v_exchange()
        ops = [branch_operator(local)]
    tensors = []
    for t in ops:
        r = t.reshape(8, 8, 8, 8)
        tensors.append((r, r.conj()))
    return tuple(tensors)


def _branch_sum(rho: np.ndarray, tensors) -> tuple[np.ndarray, float]:
    """sum_m T_m rho^(x3) T_m^dag evaluated by tensor contraction, without
    ever forming the 512x512 product state."""
    out = np.zeros((8, 8), dtype=complex)
    for r, rc in tensors:
        x = np.tensordot(r, rho, axes=([1], [0]))        # out, c2, c3, j1
        x = np.tensordot(x, rho, axes=([1], [0]))        # out, c3, j1, j2
        x = np.tensordot(x, rho, axes=([1], [0]))        # out, j1, j2, j3
        out += np.tensordot(x, rc, axes=([1, 2, 3], [1, 2, 3]))
    return out, float(np.trace(out).real)


def _check_state(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (8, 8):
        raise ValueError(f"expected an 8x8 density matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - dag(rho))) > 1e-8:
        raise ValueError("input state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise ValueError("input state is not normalized")
    return rho


def _finalize(unnormalized: np.ndarray, p: float, subprotocol: str,
              relabel_applied: int | None = None) -> StepResult:
    if p < DEGENERATE_P:
        raise DegenerateOutcomeError(
            f"{subprotocol}: coincident outcomes have probability {p:.3e}")
    rho_out = unnormalized / p
    return StepResult(
        rho_out=rho_out,
        p_success=p,
        subprotocol=subprotocol,
        fidelity=fidelity_with_pure(rho_out, w_basis_vector(0)),
        relabel_applied=relabel_applied,
    )


def run_P(rho_in: np.ndarray) -> StepResult:
    """Main subprotocol: keep the three mixed coincident outcomes of the
    local stabilizer measurements on rho_in^(x3) and contract."""
    rho = _check_state(rho_in)
    out, p = _branch_sum(rho, _branch_tensors("P", PER_PARTY))
    return _finalize(out, p, "P")


def run_Pbar(rho_in: np.ndarray, v_placement: str = DEFAULT_V_PLACEMENT) -> StepResult:
    """Dual subprotocol: exchange-rotate the local computational bases,
    measure the complementary stabilizers, keep only the all-zero outcome.

    ``v_placement`` selects where the basis exchange V acts: on each
    party's qubit triple (the default, a genuinely local operation) or on
    each copy, which amounts to replacing the input by V rho V^dag.
    """
    rho = _check_state(rho_in)
    if v_placement not in V_PLACEMENTS:
        raise ValueError(f"v_placement must be one of {V_PLACEMENTS}, got {v_placement!r}")
    if v_placement == PER_COPY:
        v = v_exchange()
        rho = v @ rho @ dag(v)
    out, p = _branch_sum(rho, _branch_tensors("Pbar", v_placement))
    return _finalize(out, p, "Pbar")


def w_diagonal(rho: np.ndarray) -> np.ndarray:
    """The eight diagonal elements <W_k|rho|W_k>."""
    w = w_basis_matrix()
    return np.einsum("ik,ij,jk->k", w.conj(), np.asarray(rho, dtype=complex), w).real


def relabel_to_canonical(rho: np.ndarray) -> tuple[np.ndarray, int]:
    """Rotate the largest W-basis diagonal element onto label 000.

    Returns the relabeled state and the label that was moved; ties within
    1e-12 resolve to the smallest label, so an already-canonical state
    returns label 0 unchanged.
    """
    rho = np.asarray(rho, dtype=complex)
    d = w_diagonal(rho)
    best = int(np.argmax(d))
    for k in range(best):
        if d[k] >= d[best] - TIE_TOL:
            best = k
            break
    if best == 0:
        return rho, 0
    u = relabel_unitary(best)
    return dag(u) @ rho @ u, best


def _settled_result(result: StepResult, relabel_applied: int | None,
                    canonicalize: bool) -> StepResult:
    """Project a raw subprotocol output back to the physical set and, when
    canonicalizing, rotate it to canonical labeling; the recorded fidelity
    always refers to the returned state."""
    rho = clip_to_physical(result.rho_out)
    if canonicalize:
        rho, _ = relabel_to_canonical(rho)
    return replace(
        result,
        rho_out=rho,
        fidelity=fidelity_with_pure(rho, w_basis_vector(0)),
        relabel_applied=relabel_applied,
    )


def distill_step(rho: np.ndarray,
                 v_placement: str = DEFAULT_V_PLACEMENT,
                 relabel: bool = True) -> StepResult:
    """One greedy recurrence step: relabel to canonical, run both
    subprotocols, return the result with the higher output fidelity.

    Output fidelity is compared after relabeling each candidate to
    canonical form, matching the convention that the W component of any
    state is the largest W-basis diagonal element.  Ties within 1e-12 go
    to the main subprotocol.  A branch is discarded when its success
    probability is numerically degenerate; only when both branches are
    degenerate does the error propagate.
    """
    rho = _check_state(rho)
    if relabel:
        rho, moved = relabel_to_canonical(rho)
        relabel_applied = moved if moved != 0 else None
    else:
        relabel_applied = None

    candidates: list[StepResult] = []
    errors: list[DegenerateOutcomeError] = []
    for runner in (run_P, lambda r: run_Pbar(r, v_placement)):
        try:
            result = runner(rho)
        except DegenerateOutcomeError as exc:
            errors.append(exc)
            continue
        if result.p_success < P_FLOOR:
            continue
        candidates.append(_settled_result(result, relabel_applied, canonicalize=relabel))

    if not candidates:
        raise DegenerateOutcomeError(
            "both subprotocols are degenerate on this input: "
            + "; ".join(str(e) for e in errors))
    if len(candidates) == 1:
        return candidates[0]
    main, dual = candidates
    return main if main.fidelity >= dual.fidelity - TIE_TOL else dual


def distill_run(rho: np.ndarray,
                max_steps: int = 200,
                target_f: float = 0.99,
                v_placement: str = DEFAULT_V_PLACEMENT,
                relabel_each_step: bool = True) -> Trajectory:
    """Iterate greedy steps until the fidelity target, a fixed point, or
    the step budget is reached.

    A fixed point is declared when the state returns to within 1e-9
    (entrywise) of one of its previous two values on two consecutive
    steps; comparing two steps back also catches period-two cycles, which
    the greedy selection produces near some fixed points.  The yield
    estimate is prod(p_i) / 3^k over the k steps actually taken (1 when
    the input already meets the target).
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    if not 0.0 < target_f < 1.0:
        raise ValueError(f"target_f must be in (0, 1), got {target_f}")
    rho = _check_state(rho)
    if relabel_each_step:
        rho, _ = relabel_to_canonical(rho)
    if fidelity_with_pure(rho, w_basis_vector(0)) >= target_f:
        return Trajectory(steps=[], final_rho=rho, reason="target", yield_estimate=1.0)

    steps: list[StepResult] = []
    prev1 = prev2 = None
    streak = 0
    reason = "max_steps"
    current = rho
    for _ in range(max_steps):
        step = distill_step(current, v_placement=v_placement, relabel=relabel_each_step)
        steps.append(step)
        current = step.rho_out
        if step.fidelity >= target_f:
            reason = "target"
            break
        near_prev = prev1 is not None and np.max(np.abs(current - prev1)) <= FIXED_POINT_ATOL
        near_prev2 = prev2 is not None and np.max(np.abs(current - prev2)) <= FIXED_POINT_ATOL
        if near_prev or near_prev2:
            streak += 1
            if streak >= FIXED_POINT_STREAK:
                reason = "fixed_point"
                break
        else:
            streak = 0
        prev2, prev1 = prev1, current

    yield_estimate = 1.0
    for step in steps:
        yield_estimate *= step.p_success / 3.0
    return Trajectory(steps=steps, final_rho=current, reason=reason,
                      yield_estimate=yield_estimate)
