from fractions import Fraction

import numpy as np
import pytest

from wdistill import protocol
from wdistill.channels import DEPHASING, ChannelSpec, dephasing_fidelity_map, mu_for_fidelity, noisy_w
from wdistill.protocol import (
    ALL_OUTCOMES,
    COINCIDENT_OUTCOMES,
    OUTCOME_0,
    OUTCOME_1,
    OUTCOME_2,
    OUTCOME_3,
    PARTY_QUBITS,
    DegenerateOutcomeError,
    StepResult,
    branch_operator,
    contraction,
    copy_of,
    distill_run,
    distill_step,
    measurement_operator,
    outcome_labels,
    party_of,
    relabel_to_canonical,
    run_P,
    run_Pbar,
    w_diagonal,
)
from wdistill.qmath import (
    basis_ket,
    dag,
    embed,
    fidelity_with_pure,
    is_density_matrix,
    kron,
    projector,
    random_density_hs,
)
from wdistill.wbasis import LABELS, dual_w_basis_vector, v_exchange, w_basis_vector

W0 = w_basis_vector(0)


def sigma_state(f):
    return noisy_w(ChannelSpec(DEPHASING, mu_for_fidelity(DEPHASING, f)))


# ---------------------------------------------------------------------------
# outcomes, measurements, contractions


def test_outcome_labels_majority_ordered():
    assert outcome_labels(OUTCOME_1) == (0b001, 0b110)
    assert outcome_labels(OUTCOME_2) == (0b010, 0b101)
    assert outcome_labels(OUTCOME_3) == (0b100, 0b011)
    assert outcome_labels(OUTCOME_0) == (0b000, 0b111)
    with pytest.raises(ValueError):
        outcome_labels((2, 0))


def test_measurement_operator_outcome_1():
    expected = projector(w_basis_vector(0b001)) + projector(w_basis_vector(0b110))
    np.testing.assert_allclose(measurement_operator(OUTCOME_1), expected, atol=1e-12)


def test_measurement_operator_outcome_0():
    # [0,0] selects the labels with k1+k2 and k1+k3 both even: 000 and 111
    expected = projector(w_basis_vector(0b000)) + projector(w_basis_vector(0b111))
    np.testing.assert_allclose(measurement_operator(OUTCOME_0), expected, atol=1e-12)


def test_measurement_completeness_and_orthogonality():
    for dual in (False, True):
        ops = [measurement_operator(m, dual=dual) for m in ALL_OUTCOMES]
        np.testing.assert_allclose(sum(ops), np.eye(8), atol=1e-12)
        for i, a in enumerate(ops):
            np.testing.assert_allclose(a @ a, a, atol=1e-12)
            assert np.trace(a).real == pytest.approx(2.0, abs=1e-12)
            for b in ops[i + 1:]:
                np.testing.assert_allclose(a @ b, np.zeros((8, 8)), atol=1e-12)


def test_dual_measurement_projects_onto_dual_pair():
    expected = (projector(dual_w_basis_vector(0b000))
                + projector(dual_w_basis_vector(0b111)))
    np.testing.assert_allclose(measurement_operator(OUTCOME_0, dual=True), expected, atol=1e-12)


def test_contraction_actions():
    np.testing.assert_allclose(contraction(OUTCOME_2) @ w_basis_vector(0b010),
                               basis_ket(0, 1), atol=1e-12)
    np.testing.assert_allclose(contraction(OUTCOME_3) @ w_basis_vector(0b011),
                               basis_ket(1, 1), atol=1e-12)
    np.testing.assert_allclose(contraction(OUTCOME_1) @ w_basis_vector(0b110),
                               basis_ket(1, 1), atol=1e-12)


def test_dual_contraction_actions():
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    dual = contraction(OUTCOME_0, dual=True)
    np.testing.assert_allclose(dual @ dual_w_basis_vector(0b111), plus, atol=1e-12)
    np.testing.assert_allclose(dual @ dual_w_basis_vector(0b000), minus, atol=1e-12)


def test_contraction_is_coisometry_with_measurement_support():
    for m in COINCIDENT_OUTCOMES:
        l_op = contraction(m)
        np.testing.assert_allclose(l_op @ dag(l_op), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(dag(l_op) @ l_op, measurement_operator(m), atol=1e-12)
    dual = contraction(OUTCOME_0, dual=True)
    np.testing.assert_allclose(dag(dual) @ dual,
                               measurement_operator(OUTCOME_0, dual=True), atol=1e-12)


def test_contraction_disallowed_outcomes():
    with pytest.raises(ValueError):
        contraction(OUTCOME_0)
    with pytest.raises(ValueError):
        contraction(OUTCOME_1, dual=True)


# ---------------------------------------------------------------------------
# layout


def test_party_layout():
    assert PARTY_QUBITS == {"A": (0, 3, 6), "B": (1, 4, 7), "C": (2, 5, 8)}
    for g in range(9):
        party = party_of(g)
        copy = copy_of(g)
        ordinal = "ABC".index(party)
        assert g == 3 * (copy - 1) + ordinal
        assert g in PARTY_QUBITS[party]
        assert g in protocol.COPY_QUBITS[copy - 1]
    with pytest.raises(ValueError):
        party_of(9)
    with pytest.raises(ValueError):
        copy_of(-1)


# ---------------------------------------------------------------------------
# equivalence with the explicit 512-dimensional route


def _to_party_major(matrix):
    """Reorder a copy-major 9-qubit operator to party-major via axis moves,
    independently of the fancy-index permutation used by the package."""
    order = list(PARTY_QUBITS["A"] + PARTY_QUBITS["B"] + PARTY_QUBITS["C"])
    tensor = matrix.reshape([2] * 18)
    tensor = tensor.transpose(order + [9 + q for q in order])
    return tensor.reshape(512, 512)


def _explicit_branch_sum(rho, locals_):
    gamma_pm = _to_party_major(kron(rho, rho, rho))
    out = np.zeros((8, 8), dtype=complex)
    for local in locals_:
        joint = kron(local, local, local)
        out += joint @ gamma_pm @ dag(joint)
    return out


def test_run_P_matches_explicit_dense_route():
    rng = np.random.default_rng(101)
    for _ in range(3):
        rho = random_density_hs(8, rng)
        result = run_P(rho)
        explicit = _explicit_branch_sum(rho, [contraction(m) for m in COINCIDENT_OUTCOMES])
        p = np.trace(explicit).real
        assert result.p_success == pytest.approx(p, abs=1e-12)
        np.testing.assert_allclose(result.rho_out, explicit / p, atol=1e-12)


def test_run_P_matches_project_then_contract():
    # the 2x8 branch operators are exactly contraction o measurement
    rng = np.random.default_rng(103)
    rho = random_density_hs(8, rng)
    gamma_pm = _to_party_major(kron(rho, rho, rho))
    out = np.zeros((8, 8), dtype=complex)
    for m in COINCIDENT_OUTCOMES:
        proj = kron(*[measurement_operator(m)] * 3)
        joint = kron(*[contraction(m)] * 3) @ proj
        out += joint @ gamma_pm @ dag(joint)
    result = run_P(rho)
    np.testing.assert_allclose(result.rho_out * result.p_success, out, atol=1e-12)


def test_run_Pbar_matches_explicit_dense_route():
    rng = np.random.default_rng(107)
    rho = random_density_hs(8, rng)
    dual = contraction(OUTCOME_0, dual=True)

    result = run_Pbar(rho, v_placement="per-party")
    explicit = _explicit_branch_sum(rho, [dual @ v_exchange()])
    p = np.trace(explicit).real
    assert result.p_success == pytest.approx(p, abs=1e-12)
    np.testing.assert_allclose(result.rho_out, explicit / p, atol=1e-12)

    result = run_Pbar(rho, v_placement="per-copy")
    rho_v = v_exchange() @ rho @ dag(v_exchange())
    explicit = _explicit_branch_sum(rho_v, [dual])
    p = np.trace(explicit).real
    assert result.p_success == pytest.approx(p, abs=1e-12)
    np.testing.assert_allclose(result.rho_out, explicit / p, atol=1e-12)


def test_branch_operator_shape_and_isometry():
    t = branch_operator(contraction(OUTCOME_1))
    assert t.shape == (8, 512)
    # rows orthonormal: the branch map is a coisometry onto its support
    np.testing.assert_allclose(t @ dag(t), np.eye(8), atol=1e-12)


# ---------------------------------------------------------------------------
# run_P / run_Pbar values


def test_run_P_pure_w_is_fixed_point():
    result = run_P(projector(W0))
    assert result.fidelity == pytest.approx(1.0, abs=1e-12)
    assert result.p_success == pytest.approx(25 / 81, abs=1e-12)
    np.testing.assert_allclose(result.rho_out, projector(W0), atol=1e-10)


def test_run_P_success_probability_covariant_under_relabeling():
    for k in LABELS:
        result = run_P(projector(w_basis_vector(k)))
        assert result.p_success == pytest.approx(25 / 81, abs=1e-12)


def test_run_P_computational_product_states():
    # party l holds |aaa>, and <aaa|M_m|aaa> = 1/3 for every outcome, so the
    # three coincident branches give p = 3 * (1/3)^3 = 1/9
    for index in range(8):
        result = run_P(projector(basis_ket(index, 3)))
        assert result.p_success == pytest.approx(1 / 9, abs=1e-12)


def test_run_P_maximally_mixed():
    # each joint branch projector has rank 2^3, so tr = 3 * 8/512
    result = run_P(np.eye(8) / 8)
    assert result.p_success == pytest.approx(3 / 64, abs=1e-12)


def test_run_Pbar_maximally_mixed():
    # single kept branch of rank 8, and V leaves the identity invariant
    for placement in protocol.V_PLACEMENTS:
        result = run_Pbar(np.eye(8) / 8, v_placement=placement)
        assert result.p_success == pytest.approx(1 / 64, abs=1e-12)


def test_run_Pbar_does_not_fix_pure_w():
    result = run_Pbar(projector(W0))
    assert result.p_success > 0
    assert fidelity_with_pure(result.rho_out, W0) < 1 - 1e-6


def test_run_P_sigma_family_matches_closed_form():
    for f in (0.4, 0.6, 0.8, 0.95):
        result = run_P(sigma_state(f))
        f_expected, p_expected = dephasing_fidelity_map(f)
        assert result.fidelity == pytest.approx(float(f_expected), abs=1e-9)
        assert result.p_success == pytest.approx(float(p_expected), abs=1e-9)


def test_run_P_repulsive_fixed_point():
    result = run_P(sigma_state(1 / 3))
    assert result.fidelity == pytest.approx(1 / 3, abs=1e-9)


def test_outputs_remain_physical_on_random_inputs():
    rng = np.random.default_rng(109)
    for _ in range(100):
        rho = random_density_hs(8, rng)
        assert is_density_matrix(run_P(rho).rho_out)
        assert is_density_matrix(run_Pbar(rho).rho_out)


def test_branch_traces_over_all_outcome_triples_sum_to_one():
    # completeness holds over all 4^3 joint outcomes, not just coincident
    rng = np.random.default_rng(113)
    rho = random_density_hs(8, rng)
    gamma = kron(rho, rho, rho)
    for dual in (False, True):
        if dual:
            v = v_exchange()
            vvv = embed(v, 9, PARTY_QUBITS["A"]) @ embed(v, 9, PARTY_QUBITS["B"]) \
                @ embed(v, 9, PARTY_QUBITS["C"])
            state = vvv @ gamma @ dag(vvv)
        else:
            state = gamma
        total = 0.0
        for ma in ALL_OUTCOMES:
            pa = embed(measurement_operator(ma, dual=dual), 9, PARTY_QUBITS["A"])
            for mb in ALL_OUTCOMES:
                pb = embed(measurement_operator(mb, dual=dual), 9, PARTY_QUBITS["B"])
                for mc in ALL_OUTCOMES:
                    pc = embed(measurement_operator(mc, dual=dual), 9, PARTY_QUBITS["C"])
                    total += np.trace(pa @ pb @ pc @ state).real
        assert total == pytest.approx(1.0, abs=1e-10)


def test_invalid_inputs_rejected():
    with pytest.raises(ValueError):
        run_P(np.eye(4) / 4)
    with pytest.raises(ValueError):
        run_P(np.eye(8))  # trace 8
    with pytest.raises(ValueError):
        run_Pbar(np.eye(8) / 8, v_placement="sideways")


def test_degenerate_branch_raises():
    with pytest.raises(DegenerateOutcomeError):
        protocol._finalize(np.zeros((8, 8), dtype=complex), 0.0, "P")


# ---------------------------------------------------------------------------
# relabeling


def test_w_diagonal_matches_direct_computation():
    rng = np.random.default_rng(127)
    rho = random_density_hs(8, rng)
    expected = [fidelity_with_pure(rho, w_basis_vector(k)) for k in LABELS]
    np.testing.assert_allclose(w_diagonal(rho), expected, atol=1e-12)


def test_relabel_moves_dominant_label_home():
    rho = projector(w_basis_vector(0b101))
    fixed, label = relabel_to_canonical(rho)
    assert label == 0b101
    np.testing.assert_allclose(fixed, projector(W0), atol=1e-12)


def test_relabel_identity_cases():
    rho, label = relabel_to_canonical(np.eye(8) / 8)
    assert label == 0
    np.testing.assert_allclose(rho, np.eye(8) / 8)
    rho, label = relabel_to_canonical(projector(W0))
    assert label == 0


def test_relabel_idempotent_and_canonical():
    rng = np.random.default_rng(131)
    for _ in range(20):
        rho = random_density_hs(8, rng)
        once, label1 = relabel_to_canonical(rho)
        twice, label2 = relabel_to_canonical(once)
        assert label2 == 0
        np.testing.assert_allclose(once, twice, atol=1e-12)
        d = w_diagonal(once)
        assert d[0] == pytest.approx(np.max(d), abs=1e-12)


# ---------------------------------------------------------------------------
# greedy steps and full runs


def test_distill_step_prefers_main_on_dephased_family():
    for f in (0.35, 0.5, 0.7, 0.9, 0.99):
        step = distill_step(sigma_state(f))
        assert step.subprotocol == "P"
        f_expected, _ = dephasing_fidelity_map(f)
        assert step.fidelity == pytest.approx(float(f_expected), abs=1e-9)


def test_distill_step_records_relabel():
    step = distill_step(projector(w_basis_vector(0b110)))
    assert step.relabel_applied == 0b110
    assert step.fidelity == pytest.approx(1.0, abs=1e-10)
    step = distill_step(projector(W0))
    assert step.relabel_applied is None


def test_distill_step_tie_goes_to_main(monkeypatch):
    fake = StepResult(rho_out=projector(W0), p_success=0.5, subprotocol="Pbar", fidelity=1.0)
    monkeypatch.setattr(protocol, "run_Pbar", lambda rho, v_placement: fake)
    step = distill_step(projector(W0))
    assert step.subprotocol == "P"


def test_distill_step_degenerate_propagation(monkeypatch):
    def boom(rho, *args, **kwargs):
        raise DegenerateOutcomeError("boom")

    monkeypatch.setattr(protocol, "run_P", boom)
    step = distill_step(projector(W0))        # dual branch still available
    assert step.subprotocol == "Pbar"
    monkeypatch.setattr(protocol, "run_Pbar", boom)
    with pytest.raises(DegenerateOutcomeError):
        distill_step(projector(W0))


def test_distill_run_three_steps_from_09():
    # closed-form iteration from 0.9 needs exactly three steps to pass 0.99
    f = Fraction(9, 10)
    expected_ps = []
    while f < Fraction(99, 100):
        f, p = dephasing_fidelity_map(f)
        expected_ps.append(float(p))
    assert len(expected_ps) == 3

    traj = distill_run(sigma_state(0.9), max_steps=50, target_f=0.99)
    assert traj.reason == "target"
    assert len(traj.steps) == 3
    assert traj.steps[-1].fidelity >= 0.99
    expected_yield = np.prod(expected_ps) / 27
    assert traj.yield_estimate == pytest.approx(expected_yield, rel=1e-9)


def test_distill_run_zero_steps_when_already_converged():
    traj = distill_run(sigma_state(0.995), target_f=0.99)
    assert traj.reason == "target"
    assert traj.steps == []
    assert traj.yield_estimate == 1.0


def test_distill_run_repulsive_point_never_converges():
    traj = distill_run(sigma_state(1 / 3), max_steps=50, target_f=0.99)
    assert traj.reason == "fixed_point"
    assert fidelity_with_pure(traj.final_rho, W0) == pytest.approx(1 / 3, abs=1e-6)


def test_distill_run_detects_exact_fixed_points_quickly():
    bell = (basis_ket(0b010, 3) + basis_ket(0b100, 3)) / np.sqrt(2)
    traj = distill_run(projector(bell), max_steps=50)
    assert traj.reason == "fixed_point"
    assert len(traj.steps) == 3   # arrival plus the two-step confirmation
    np.testing.assert_allclose(traj.final_rho, projector(bell), atol=1e-9)


def test_distill_run_max_steps():
    traj = distill_run(sigma_state(0.5), max_steps=1, target_f=0.99)
    assert traj.reason == "max_steps"
    assert len(traj.steps) == 1


def test_distill_run_validation():
    with pytest.raises(ValueError):
        distill_run(projector(W0), max_steps=0)
    with pytest.raises(ValueError):
        distill_run(projector(W0), target_f=1.0)


def test_distill_run_yield_bookkeeping():
    traj = distill_run(sigma_state(0.8), max_steps=50, target_f=0.99)
    manual = 1.0
    for step in traj.steps:
        manual *= step.p_success / 3.0
    assert traj.yield_estimate == pytest.approx(manual, rel=1e-12)
