"""Simulator for 3-qubit W-state entanglement distillation driven by a
complementary pair of local stabilizer measurements."""

from .channels import (
    ChannelSpec,
    apply_channel,
    dephasing_fidelity,
    dephasing_fidelity_map,
    depolarizing_fidelity,
    mu_for_fidelity,
    noisy_w,
)
from .experiments import (
    BranchStats,
    ThresholdResult,
    classify_state,
    dephasing_curve,
    ppt_minimum_eigenvalue,
    random_branch_stats,
    retrieval_threshold,
    structural_checks,
    yield_curve,
)
from .protocol import (
    DegenerateOutcomeError,
    StepResult,
    Trajectory,
    distill_run,
    distill_step,
    measurement_operator,
    relabel_to_canonical,
    run_P,
    run_Pbar,
)
from .qmath import (
    embed,
    fidelity_with_pure,
    hermitian_eigenvalues,
    kron,
    partial_trace,
    partial_transpose,
    random_density_hs,
)
from .wbasis import (
    StabilizerElement,
    dual_w_basis_vector,
    lambda_op,
    relabel_unitary,
    stabilizer,
    v_exchange,
    w_basis_unitary,
    w_basis_vector,
)

__version__ = "0.1.0"
