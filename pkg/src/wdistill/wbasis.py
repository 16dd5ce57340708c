"""The 3-qubit W basis, its stabilizer group, and the complementary basis.

Basis labels are integers 0..7 whose bits (k1, k2, k3) index the basis
state, k1 most significant: |W_{k1 k2 k3}> sits at label 4*k1 + 2*k2 + k3.
Every basis state carries the same entanglement as the W state
(|001> + |010> + |100>)/sqrt(3); the eight of them are joint eigenvectors
of three commuting Hermitian involutions K1, K2, K3 with eigenvalue
(-1)^{k_j} under K_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .qmath import H, I2, SWAP, X, Y, Z, dag, embed, kron, projector

LABELS = tuple(range(8))

# Amplitudes of |W_{k1k2k3}> in the computational basis, transcribed as
# (basis index, sign) pairs with coefficient sign/sqrt(3).  A generated
# self-test regenerates each vector from relabel_unitary(label) @ |W_000>
# and from w_basis_unitary(), so a transcription slip here cannot survive.
_W_AMPLITUDES = {
    0b000: ((0b001, +1), (0b010, +1), (0b100, +1)),
    0b001: ((0b000, +1), (0b011, +1), (0b101, -1)),
    0b010: ((0b011, -1), (0b000, +1), (0b110, +1)),
    0b011: ((0b010, -1), (0b001, +1), (0b111, -1)),
    0b100: ((0b101, +1), (0b110, -1), (0b000, +1)),
    0b101: ((0b100, +1), (0b111, -1), (0b001, -1)),
    0b110: ((0b111, -1), (0b100, -1), (0b010, +1)),
    0b111: ((0b110, -1), (0b101, -1), (0b011, -1)),
}

# Local unitaries (factors for qubits 1, 2, 3) mapping |W_000> to |W_label>.
_MINUS_IY = -1j * Y
_RELABEL_FACTORS = {
    0b000: (I2, I2, I2),
    0b001: (Z, I2, X),
    0b010: (I2, X, Z),
    0b011: (Z, X, _MINUS_IY),
    0b100: (X, Z, I2),
    0b101: (_MINUS_IY, Z, X),
    0b110: (X, _MINUS_IY, Z),
    0b111: (_MINUS_IY, _MINUS_IY, _MINUS_IY),
}

# Pauli expansions of the eight stabilizer elements, keyed by the subset of
# generators multiplied together.  Stored as (weight, factor-triple) terms.
_STABILIZER_TERMS = {
    frozenset(): ((1.0, (I2, I2, I2)),),
    frozenset({1}): ((2 / 3, (X, X, Z)), (2 / 3, (Y, Z, Y)), (1 / 3, (Z, I2, I2))),
    frozenset({2}): ((2 / 3, (Z, X, X)), (2 / 3, (Y, Y, Z)), (1 / 3, (I2, Z, I2))),
    frozenset({3}): ((2 / 3, (X, Z, X)), (2 / 3, (Z, Y, Y)), (1 / 3, (I2, I2, Z))),
    frozenset({1, 2}): ((2 / 3, (I2, X, X)), (2 / 3, (Y, I2, Y)), (-1 / 3, (Z, Z, I2))),
    frozenset({1, 3}): ((2 / 3, (X, X, I2)), (2 / 3, (I2, Y, Y)), (-1 / 3, (Z, I2, Z))),
    frozenset({2, 3}): ((2 / 3, (X, I2, X)), (2 / 3, (Y, Y, I2)), (-1 / 3, (I2, Z, Z))),
    frozenset({1, 2, 3}): ((-1.0, (Z, Z, Z)),),
}


@dataclass(frozen=True)
class StabilizerElement:
    """One of the eight commuting stabilizer elements of the W basis."""

    label: frozenset
    matrix: np.ndarray

    def eigenvalue(self, basis_label: int) -> int:
        """Eigenvalue (+1 or -1) on |W_{basis_label}>."""
        bits = label_bits(basis_label)
        return -1 if sum(bits[j - 1] for j in self.label) % 2 else 1


def label_bits(label: int) -> tuple[int, int, int]:
    """Bits (k1, k2, k3) of a basis label, k1 most significant."""
    if not 0 <= label < 8:
        raise ValueError(f"label must be in 0..7, got {label}")
    return (label >> 2) & 1, (label >> 1) & 1, label & 1


def w_basis_vector(label: int) -> np.ndarray:
    """The 8-dimensional basis vector |W_{label}>."""
    label_bits(label)
    v = np.zeros(8, dtype=complex)
    for index, sign in _W_AMPLITUDES[label]:
        v[index] = sign
    return v / np.sqrt(3)


@lru_cache(maxsize=1)
def _w_matrix() -> np.ndarray:
    m = np.column_stack([w_basis_vector(k) for k in LABELS])
    m.flags.writeable = False
    return m


def w_basis_matrix() -> np.ndarray:
    """8x8 matrix whose column k is |W_k| (read-only, cached)."""
    return _w_matrix()


def w_basis_unitary() -> np.ndarray:
    """The single unitary generating the basis from computational kets:
    (1 Z X + Z X 1 + X 1 Z)/sqrt(3), so that U|k1 k2 k3> = |W_{k1k2k3}>.
    """
    return (kron(I2, Z, X) + kron(Z, X, I2) + kron(X, I2, Z)) / np.sqrt(3)


def stabilizer(generators: Iterable[int]) -> StabilizerElement:
    """Product of the chosen generators K_j, built from Pauli expansions.

    The empty set yields the identity.  stabilizer(S) acts on |W_k> with
    eigenvalue (-1)^{sum of k_j over j in S}.
    """
    key = frozenset(generators)
    if not key <= {1, 2, 3}:
        raise ValueError(f"generators must be a subset of {{1, 2, 3}}, got {sorted(key)}")
    m = np.zeros((8, 8), dtype=complex)
    for weight, factors in _STABILIZER_TERMS[key]:
        m += weight * kron(*factors)
    return StabilizerElement(label=key, matrix=m)


def stabilizer_spectral(generators: Iterable[int]) -> np.ndarray:
    """Same element built spectrally from the basis, as a cross-check:
    sum_k (-1)^{sum k_j} |W_k><W_k|.
    """
    key = frozenset(generators)
    if not key <= {1, 2, 3}:
        raise ValueError(f"generators must be a subset of {{1, 2, 3}}, got {sorted(key)}")
    m = np.zeros((8, 8), dtype=complex)
    for k in LABELS:
        bits = label_bits(k)
        sign = -1.0 if sum(bits[j - 1] for j in key) % 2 else 1.0
        m += sign * projector(w_basis_vector(k))
    return m


def relabel_unitary(label: int) -> np.ndarray:
    """Product of single-qubit factors mapping |W_000> to |W_label| exactly,
    sign included."""
    label_bits(label)
    return kron(*_RELABEL_FACTORS[label])


@lru_cache(maxsize=1)
def _lambda() -> np.ndarray:
    m = kron(H, H, H) @ embed(SWAP, 3, [0, 2])
    m.flags.writeable = False
    return m


def lambda_op() -> np.ndarray:
    """Hadamard on every qubit composed with the swap of qubits 1 and 3.

    Conjugating the stabilizer by this unitary produces the complementary
    observables; the two operations commute, so the order is immaterial.
    """
    return _lambda()


def dual_w_basis_vector(label: int) -> np.ndarray:
    """Complementary basis state: lambda_op()^dag |W_label>.

    The dual basis is mutually unbiased with the W basis: every overlap
    has |<W_k|dual_l>|^2 = 1/8.
    """
    return dag(lambda_op()) @ w_basis_vector(label)


def v_exchange() -> np.ndarray:
    """Permutation fixing |000> and |111> and exchanging |001>..|110| with
    their bit complements; an involution."""
    m = np.zeros((8, 8), dtype=complex)
    m[0, 0] = m[7, 7] = 1.0
    for i in (1, 2, 3, 4, 5, 6):
        m[7 - i, i] = 1.0
    return m
