"""Dense complex linear algebra for few-qubit density-matrix simulation.

Conventions used throughout the package:

* All operators and states are ``numpy`` arrays with ``dtype=complex``.
* Qubit 0 is the most significant bit of a computational-basis index, so
  the 3-qubit basis state |k1 k2 k3> sits at index 4*k1 + 2*k2 + k3.
* Density matrices are Hermitian, trace-one and positive semidefinite
  within the tolerances of :func:`is_density_matrix`.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

# Single-qubit constants.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = (X + Z) / np.sqrt(2)
SWAP = np.array(
    [[1, 0, 0, 0],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1]], dtype=complex)

# Tolerances: algebraic identities vs. eigenvalue slack of iterated products.
ATOL_ALGEBRA = 1e-10
ATOL_EIGEN = 1e-9


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more operators, left factor most significant."""
    if not ops:
        raise ValueError("kron needs at least one operator")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def basis_ket(index: int, n_qubits: int) -> np.ndarray:
    """Computational-basis column vector |index> on ``n_qubits`` qubits."""
    dim = 2 ** n_qubits
    if not 0 <= index < dim:
        raise ValueError(f"index {index} out of range for {n_qubits} qubits")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    """Rank-one projector |psi><psi|."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def _n_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 2 ** n != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return n


def embed(op: np.ndarray, n_total: int, targets: Sequence[int]) -> np.ndarray:
    """Embed a k-qubit operator into an ``n_total``-qubit space.

    The operator acts on the qubits listed in ``targets`` (its own qubit 0
    goes to ``targets[0]`` and so on) and as the identity elsewhere.
    """
    op = np.asarray(op, dtype=complex)
    k = _n_qubits(op.shape[0])
    targets = list(targets)
    if len(targets) != k:
        raise ValueError(f"operator acts on {k} qubits, got {len(targets)} targets")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits: {targets}")
    if any(t < 0 or t >= n_total for t in targets):
        raise ValueError(f"target out of range 0..{n_total - 1}: {targets}")

    rest = [q for q in range(n_total) if q not in targets]
    full = kron(op, np.eye(2 ** len(rest), dtype=complex))
    # ``full`` has qubit order targets + rest; permute back to 0..n-1.
    order = targets + rest
    perm = [order.index(q) for q in range(n_total)]
    tensor = full.reshape([2] * (2 * n_total))
    tensor = tensor.transpose(perm + [n_total + p for p in perm])
    return tensor.reshape(2 ** n_total, 2 ** n_total)


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Trace out every qubit not listed in ``keep`` (result in listed order)."""
    rho = np.asarray(rho, dtype=complex)
    n = _n_qubits(rho.shape[0])
    keep = list(keep)
    if not keep:
        raise ValueError("keep must name at least one qubit")
    if len(set(keep)) != len(keep) or any(q < 0 or q >= n for q in keep):
        raise ValueError(f"invalid keep list for {n} qubits: {keep}")

    drop = [q for q in range(n) if q not in keep]
    tensor = rho.reshape([2] * (2 * n))
    # Move kept row/col axes to the front, traced axes to the back.
    src = keep + [n + q for q in keep] + drop + [n + q for q in drop]
    tensor = tensor.transpose(src)
    d_keep = 2 ** len(keep)
    d_drop = 2 ** len(drop)
    tensor = tensor.reshape(d_keep, d_keep, d_drop, d_drop)
    return np.trace(tensor, axis1=2, axis2=3)


def partial_transpose(rho: np.ndarray, subsystem: Sequence[int]) -> np.ndarray:
    """Transpose the row/column indices of the chosen qubits only."""
    rho = np.asarray(rho, dtype=complex)
    n = _n_qubits(rho.shape[0])
    subsystem = list(subsystem)
    if len(set(subsystem)) != len(subsystem) or any(q < 0 or q >= n for q in subsystem):
        raise ValueError(f"invalid subsystem list for {n} qubits: {subsystem}")

    axes = list(range(2 * n))
    for q in subsystem:
        axes[q], axes[n + q] = axes[n + q], axes[q]
    tensor = rho.reshape([2] * (2 * n)).transpose(axes)
    return tensor.reshape(rho.shape)


def hermitian_eigenvalues(h: np.ndarray, atol: float = ATOL_ALGEBRA) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, sorted ascending.

    Raises ValueError when the input is not Hermitian within ``atol``.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if np.max(np.abs(h - dag(h))) > atol:
        raise ValueError("matrix is not Hermitian within tolerance")
    return np.linalg.eigvalsh(h)


def fidelity_with_pure(rho: np.ndarray, psi: np.ndarray) -> float:
    """Overlap <psi|rho|psi>, clipped to [0, 1] against roundoff."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if rho.shape[0] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: rho {rho.shape[0]}, psi {psi.shape[0]}")
    value = (psi.conj() @ rho @ psi).real
    return float(min(1.0, max(0.0, value)))


def random_density_hs(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random density matrix under the Hilbert-Schmidt measure.

    Ginibre construction: rho = G G^dag / tr(G G^dag) with G a ``dim`` x
    ``dim`` matrix of independent standard complex Gaussian entries.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def is_density_matrix(rho: np.ndarray,
                      atol_herm: float = ATOL_ALGEBRA,
                      atol_trace: float = ATOL_ALGEBRA,
                      atol_psd: float = ATOL_EIGEN) -> bool:
    """Check Hermiticity, unit trace and positive semidefiniteness."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if np.max(np.abs(rho - dag(rho))) > atol_herm:
        return False
    if abs(np.trace(rho).real - 1.0) > atol_trace:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0] >= -atol_psd)


def clip_to_physical(rho: np.ndarray) -> np.ndarray:
    """Project onto the physical set: hermitize, clip negative eigenvalues,
    renormalize the trace.

    For inputs that are already positive semidefinite this only removes the
    anti-Hermitian roundoff, so healthy states pass through essentially
    unchanged.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = 0.5 * (rho + dag(rho))
    vals, vecs = np.linalg.eigh(rho)
    if vals[0] >= 0.0:
        return rho / np.trace(rho).real
    vals = np.clip(vals, 0.0, None)
    rho = (vecs * vals) @ dag(vecs)
    return rho / np.trace(rho).real
