"""Experiment drivers: distillation curves, thresholds, fixed-point
classification, and randomized branch statistics.

Everything here is deterministic given its arguments.  Randomized
experiments derive each sample's randomness from an independent substream
``default_rng([seed, sample_index])``, so results do not depend on
execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channels, protocol
from .channels import (
    DEPHASING,
    DEPHASING_F_RANGE,
    DEPOLARIZING,
    ChannelSpec,
    dephasing_fidelity_map,
    mu_for_fidelity,
    noisy_w,
)
from .protocol import Trajectory, distill_run, relabel_to_canonical, run_P
from .qmath import (
    basis_ket,
    clip_to_physical,
    dag,
    fidelity_with_pure,
    hermitian_eigenvalues,
    partial_transpose,
    projector,
    random_density_hs,
)
from .wbasis import (
    LABELS,
    dual_w_basis_vector,
    lambda_op,
    relabel_unitary,
    stabilizer,
    stabilizer_spectral,
    v_exchange,
    w_basis_unitary,
    w_basis_vector,
)

CLASSIFICATIONS = ("W", "Bell", "Undistillable", "Transient")

PARTY_QUBIT = {"A": 0, "B": 1, "C": 2}


@dataclass(frozen=True)
class ThresholdResult:
    kind: str
    f_threshold: float
    bracket_width: float


@dataclass
class BranchStats:
    """Aggregated outcome of a randomized distillation ensemble."""

    n_samples: int
    counts: dict[str, int]
    # branch -> [(step, mean fidelity, std fidelity), ...]; trajectories
    # shorter than the branch maximum are extended at their final value.
    mean_fidelity_by_step: dict[str, list[tuple[int, float, float]]]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


# ---------------------------------------------------------------------------
# reference states


def chi_state() -> np.ndarray:
    """The undistillable fixed point: an equal mixture of
    (|001>+|010>+|100>-|111>)/2 and (-|000>+|011>+|101>+|110>)/2, with
    W fidelity 3/8."""
    phi = np.zeros(8, dtype=complex)
    phi[0b001] = phi[0b010] = phi[0b100] = 0.5
    phi[0b111] = -0.5
    phi_prime = np.zeros(8, dtype=complex)
    phi_prime[0b000] = -0.5
    phi_prime[0b011] = phi_prime[0b101] = phi_prime[0b110] = 0.5
    return 0.5 * (projector(phi) + projector(phi_prime))


def bell_pair_states() -> list[np.ndarray]:
    """(|01>+|10>)/sqrt(2) on two of the parties, |0> on the third, for the
    three party placements."""
    states = []
    for pair in ((0, 1), (0, 2), (1, 2)):
        v = np.zeros(8, dtype=complex)
        for one in pair:
            v[1 << (2 - one)] = 1 / np.sqrt(2)
        states.append(v)
    return states


def fidelity_mixed(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2."""
    vals, vecs = np.linalg.eigh(np.asarray(sigma, dtype=complex))
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ dag(vecs)
    inner = np.clip(np.linalg.eigvalsh(root @ np.asarray(rho, dtype=complex) @ root), 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(inner)) ** 2))


def _bell_candidates() -> list[np.ndarray]:
    cands = []
    for psi in bell_pair_states():
        for k in LABELS:
            u = relabel_unitary(k)
            cands.append(u @ psi)
            cands.append(dag(u) @ psi)
    return cands


def _chi_candidates() -> list[np.ndarray]:
    chi = chi_state()
    cands = []
    for k in LABELS:
        u = relabel_unitary(k)
        cands.append(u @ chi @ dag(u))
        cands.append(dag(u) @ chi @ u)
    return cands


def bell_match(rho: np.ndarray) -> float:
    """Best overlap with any relabeled Bell-pair-plus-free-qubit state."""
    return max(fidelity_with_pure(rho, c) for c in _bell_candidates())


def chi_match(rho: np.ndarray) -> float:
    """Best Uhlmann fidelity with any relabeled copy of the undistillable
    fixed point."""
    rho = clip_to_physical(rho)
    return max(fidelity_mixed(rho, c) for c in _chi_candidates())


def classify_state(traj: Trajectory,
                   w_threshold: float = 0.99,
                   match_threshold: float = 0.99) -> str:
    """Terminal classification of a finished trajectory.

    W when the final fidelity meets the target; Bell when a fixed point was
    detected at a relabeled Bell-pair state; Undistillable when the final
    state matches the undistillable fixed point up to relabeling; Transient
    otherwise.
    """
    final_f = fidelity_with_pure(traj.final_rho, w_basis_vector(0))
    if final_f >= w_threshold:
        return "W"
    if traj.reason == "fixed_point" and bell_match(traj.final_rho) >= match_threshold:
        return "Bell"
    if chi_match(traj.final_rho) >= match_threshold:
        return "Undistillable"
    return "Transient"


# ---------------------------------------------------------------------------
# curves and thresholds


def dephasing_curve(grid) -> list[tuple[float, float, float, float]]:
    """Rows (F, simulated F', closed-form F', success probability) for the
    dephased family."""
    rows = []
    for f in grid:
        f = float(f)
        lo, hi = DEPHASING_F_RANGE
        if not lo - 1e-12 <= f <= hi + 1e-12:
            raise ValueError(f"grid point {f} outside [{lo}, {hi}]")
        sigma = noisy_w(ChannelSpec(DEPHASING, mu_for_fidelity(DEPHASING, f)))
        step = run_P(sigma)
        f_formula, _ = dephasing_fidelity_map(f)
        rows.append((f, step.fidelity, float(f_formula), step.p_success))
    return rows


def yield_curve(grid, target_f: float = 0.99) -> list[tuple[float, int, float]]:
    """Rows (F, recurrence steps to reach target, expected yield) computed
    from the closed-form fidelity map.

    The yield is prod(p_i)/3^k over the k steps; it jumps exactly where
    the required step count changes and equals 1 at or above the target.
    """
    rows = []
    for f in grid:
        f = float(f)
        if not 1 / 3 < f <= 1.0 + 1e-12:
            raise ValueError(f"grid point {f} must lie in (1/3, 1]")
        steps = 0
        y = 1.0
        current = f
        while current < target_f:
            current, p = dephasing_fidelity_map(current)
            current, p = float(current), float(p)
            y *= p / 3.0
            steps += 1
            if steps > 10_000:
                raise RuntimeError(f"fidelity map failed to reach {target_f} from {f}")
        rows.append((f, steps, y))
    return rows


def is_retrieved(kind: str, f: float,
                 max_steps: int = 200,
                 target_f: float = 0.99,
                 v_placement: str = protocol.DEFAULT_V_PLACEMENT) -> bool:
    """Whether the noisy W input of the given initial fidelity distills to
    the target within the step budget."""
    rho = noisy_w(ChannelSpec(kind, mu_for_fidelity(kind, f)))
    return distill_run(rho, max_steps=max_steps, target_f=target_f,
                       v_placement=v_placement).reason == "target"


def retrieval_threshold(kind: str,
                        resolution: float,
                        max_steps: int = 200,
                        target_f: float = 0.99,
                        v_placement: str = protocol.DEFAULT_V_PLACEMENT) -> ThresholdResult:
    """Bisect the initial fidelity separating retrieved from unretrieved
    noisy W inputs."""
    if resolution < 1e-4:
        raise ValueError(f"resolution must be >= 1e-4, got {resolution}")
    if kind == DEPHASING:
        lo, hi = 1 / 3, 0.9
    elif kind == DEPOLARIZING:
        lo, hi = 0.2, 0.9
    else:
        raise ValueError(f"unknown channel kind {kind!r}")

    def retrieved(f):
        return is_retrieved(kind, f, max_steps=max_steps, target_f=target_f,
                            v_placement=v_placement)

    if retrieved(lo):
        raise RuntimeError(f"lower bracket {lo} unexpectedly distills")
    if not retrieved(hi):
        raise RuntimeError(f"upper bracket {hi} unexpectedly fails to distill")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if retrieved(mid):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(kind=kind, f_threshold=0.5 * (lo + hi), bracket_width=hi - lo)


def ppt_minimum_eigenvalue(rho: np.ndarray, party: str) -> float:
    """Smallest eigenvalue of the state partially transposed on one party's
    qubit; negativity witnesses distillable entanglement across that cut."""
    if party not in PARTY_QUBIT:
        raise ValueError(f"party must be one of {tuple(PARTY_QUBIT)}, got {party!r}")
    pt = partial_transpose(np.asarray(rho, dtype=complex), [PARTY_QUBIT[party]])
    return float(hermitian_eigenvalues(pt)[0])


def ppt_zero_crossing(kind: str, tol: float = 1e-7, party: str = "A") -> float:
    """Initial fidelity at which the partial-transpose minimum eigenvalue of
    the noisy W family crosses zero."""
    lo = DEPHASING_F_RANGE[0] if kind == DEPHASING else channels.DEPOLARIZING_F_RANGE[0]
    hi = 1.0

    def min_eig(f):
        return ppt_minimum_eigenvalue(noisy_w(ChannelSpec(kind, mu_for_fidelity(kind, f))), party)

    if min_eig(hi) >= 0:
        raise RuntimeError("pure W state should violate the partial-transpose criterion")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if min_eig(mid) < 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def find_nonmonotonic_witness(f_grid=None,
                              max_steps: int = 200,
                              target_f: float = 0.99) -> dict | None:
    """Search depolarized W inputs for a run whose fidelity dips at some
    step yet still distills; single-parameter monotonicity fails for this
    family."""
    if f_grid is None:
        f_grid = np.arange(0.50, 0.61, 0.02)
    for f in f_grid:
        f = float(f)
        rho = noisy_w(ChannelSpec(DEPOLARIZING, mu_for_fidelity(DEPOLARIZING, f)))
        traj = distill_run(rho, max_steps=max_steps, target_f=target_f)
        if classify_state(traj) != "W":
            continue
        fids = [f] + traj.fidelities()
        for i in range(len(fids) - 1):
            if fids[i + 1] < fids[i] - 1e-12:
                return {"initial_f": f, "step": i + 1,
                        "drop": fids[i] - fids[i + 1], "steps_total": len(traj.steps)}
    return None


# ---------------------------------------------------------------------------
# randomized branch statistics


def sample_fixed_fidelity_state(f_target: float,
                                f_window: float,
                                rng: np.random.Generator,
                                max_attempts: int = 10_000) -> np.ndarray:
    """A random mixed state conditioned on its canonical W fidelity.

    Draws a Hilbert-Schmidt random state, relabels it to canonical form,
    and raises its W component to a fidelity drawn uniformly from the
    window by mixing with the pure W projector.  The max of the W-basis
    diagonal of a Hilbert-Schmidt sample concentrates near 1/8, so plain
    rejection cannot reach the fidelities of interest; mixing is the
    conditioning step.  Draws whose fidelity already exceeds the window
    are rejected and redrawn.
    """
    if not 1 / 8 < f_target < 1.0:
        raise ValueError(f"f_target must be in (1/8, 1), got {f_target}")
    if f_window <= 0:
        raise ValueError(f"f_window must be positive, got {f_window}")
    w_proj = projector(w_basis_vector(0))
    for _ in range(max_attempts):
        rho0, _ = relabel_to_canonical(random_density_hs(8, rng))
        f0 = fidelity_with_pure(rho0, w_basis_vector(0))
        if abs(f0 - f_target) <= f_window:
            return rho0
        if f0 < f_target - f_window:
            f_star = rng.uniform(f_target - f_window, f_target + f_window)
            t = (f_star - f0) / (1.0 - f0)
            return t * w_proj + (1.0 - t) * rho0
    raise RuntimeError(
        f"could not condition a sample on fidelity {f_target} +- {f_window} "
        f"within {max_attempts} attempts")


def random_branch_stats(f_target: float,
                        f_window: float,
                        n_samples: int,
                        seed: int,
                        max_steps: int = 200,
                        target_f: float = 0.99,
                        v_placement: str = protocol.DEFAULT_V_PLACEMENT) -> BranchStats:
    """Distill ``n_samples`` random states of fixed initial fidelity and
    aggregate per-branch counts and per-step fidelity statistics.

    Sample ``i`` uses the dedicated stream ``default_rng([seed, i])``, so
    the result is reproducible and independent of evaluation order.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    counts = {name: 0 for name in CLASSIFICATIONS}
    fidelity_paths: dict[str, list[list[float]]] = {name: [] for name in CLASSIFICATIONS}

    for i in range(n_samples):
        rng = np.random.default_rng([seed, i])
        rho = sample_fixed_fidelity_state(f_target, f_window, rng)
        initial_f = fidelity_with_pure(rho, w_basis_vector(0))
        traj = distill_run(rho, max_steps=max_steps, target_f=target_f,
                           v_placement=v_placement)
        branch = classify_state(traj, w_threshold=target_f)
        traj.classification = branch
        counts[branch] += 1
        fidelity_paths[branch].append([initial_f] + traj.fidelities())

    by_step: dict[str, list[tuple[int, float, float]]] = {}
    for branch, paths in fidelity_paths.items():
        if not paths:
            by_step[branch] = []
            continue
        horizon = max(len(p) for p in paths)
        padded = np.array([p + [p[-1]] * (horizon - len(p)) for p in paths])
        by_step[branch] = [
            (step, float(np.mean(padded[:, step])), float(np.std(padded[:, step])))
            for step in range(horizon)
        ]
    return BranchStats(n_samples=n_samples, counts=counts, mean_fidelity_by_step=by_step)


# ---------------------------------------------------------------------------
# structural verification suite


def structural_checks() -> list[CheckResult]:
    """Fast self-tests of the algebraic structure everything else rests on:
    basis orthonormality, stabilizer group relations, measurement
    completeness, mutual unbiasedness, relabeling, and the closed-form
    recurrence oracle."""
    checks: list[CheckResult] = []

    def record(name, max_err, tol):
        checks.append(CheckResult(name, bool(max_err <= tol), f"max error {max_err:.3e}"))

    vectors = [w_basis_vector(k) for k in LABELS]
    gram = np.array([[vectors[j].conj() @ vectors[k] for k in LABELS] for j in LABELS])
    record("w basis orthonormality", np.max(np.abs(gram - np.eye(8))), 1e-12)

    u = w_basis_unitary()
    record("basis unitary unitarity", np.max(np.abs(dag(u) @ u - np.eye(8))), 1e-12)
    err = max(np.max(np.abs(u @ basis_ket(k, 3) - vectors[k])) for k in LABELS)
    record("basis unitary generates basis", err, 1e-12)

    subsets = [frozenset(s) for s in
               [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]]
    elements = {s: stabilizer(s) for s in subsets}
    err = max(
        np.max(np.abs(elements[s].matrix @ vectors[k] - elements[s].eigenvalue(k) * vectors[k]))
        for s in subsets for k in LABELS)
    record("stabilizer eigenvalue table (64 pairs)", err, 1e-10)

    err = max(
        np.max(np.abs(elements[s].matrix @ elements[t].matrix
                      - elements[s ^ t].matrix))
        for s in subsets for t in subsets)
    record("stabilizer group closure", err, 1e-10)

    err = max(
        np.max(np.abs(elements[s].matrix @ elements[t].matrix
                      - elements[t].matrix @ elements[s].matrix))
        for s in subsets for t in subsets)
    record("stabilizer commutation", err, 1e-10)

    err = max(
        max(np.max(np.abs(e.matrix - dag(e.matrix))),
            np.max(np.abs(e.matrix @ e.matrix - np.eye(8))))
        for e in elements.values())
    record("stabilizer hermitian involutions", err, 1e-10)

    err = max(np.max(np.abs(elements[s].matrix - stabilizer_spectral(s))) for s in subsets)
    record("pauli expansion vs spectral construction", err, 1e-10)

    err = max(np.max(np.abs(relabel_unitary(k) @ vectors[0] - vectors[k])) for k in LABELS)
    record("relabel unitaries regenerate basis with signs", err, 1e-12)

    for dual, tag in ((False, "main"), (True, "dual")):
        total = sum(protocol.measurement_operator(m, dual=dual) for m in protocol.ALL_OUTCOMES)
        record(f"measurement completeness ({tag})", np.max(np.abs(total - np.eye(8))), 1e-12)
    err = max(
        np.max(np.abs(protocol.measurement_operator(m) @ protocol.measurement_operator(m2)))
        for m in protocol.ALL_OUTCOMES for m2 in protocol.ALL_OUTCOMES if m != m2)
    record("measurement orthogonality", err, 1e-12)

    err = 0.0
    for m in protocol.COINCIDENT_OUTCOMES:
        l_op = protocol.contraction(m)
        err = max(err, np.max(np.abs(l_op @ dag(l_op) - np.eye(2))))
        err = max(err, np.max(np.abs(dag(l_op) @ l_op - protocol.measurement_operator(m))))
    l_dual = protocol.contraction(protocol.OUTCOME_0, dual=True)
    err = max(err, np.max(np.abs(l_dual @ dag(l_dual) - np.eye(2))))
    err = max(err, np.max(np.abs(dag(l_dual) @ l_dual
                                 - protocol.measurement_operator(protocol.OUTCOME_0, dual=True))))
    record("contractions are coisometries onto their outcome", err, 1e-10)

    duals = [dual_w_basis_vector(k) for k in LABELS]
    overlaps = np.array([[abs(vectors[j].conj() @ duals[k]) ** 2 for k in LABELS]
                         for j in LABELS])
    record("mutual unbiasedness (all 64 overlaps = 1/8)", np.max(np.abs(overlaps - 1 / 8)), 1e-12)

    v = v_exchange()
    lam = lambda_op()
    err = max(np.max(np.abs(v @ v - np.eye(8))),
              np.max(np.abs(dag(lam) @ lam - np.eye(8))))
    record("exchange involution and basis-change unitarity", err, 1e-12)

    grid = np.linspace(1 / 3, 1.0, 20)
    err = 0.0
    for f in grid:
        sigma = noisy_w(ChannelSpec(DEPHASING, mu_for_fidelity(DEPHASING, float(f))))
        step = run_P(sigma)
        f_formula, p_formula = dephasing_fidelity_map(float(f))
        err = max(err, abs(step.fidelity - float(f_formula)),
                  abs(step.p_success - float(p_formula)))
    record("closed-form recurrence oracle (20 grid points)", err, 1e-9)

    return checks
