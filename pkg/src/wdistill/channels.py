"""Local single-qubit noise channels and the noisy-W input families.

Both channels are parametrized by a reliability ``mu`` in [0, 1] (mu = 1 is
the identity channel) and applied as Kraus sums on the full density matrix.
Applying the same channel to each qubit of the pure W projector gives the
standard noisy input families, whose fidelity with the W state is known in
closed form:

* dephasing:     F(mu) = (1 + 2 mu^2) / 3          in [1/3, 1]
* depolarizing:  F(mu) = (3 + mu + 9 mu^2 + 11 mu^3) / 24   in [1/8, 1]

The dephased family is closed under the main distillation subprotocol; the
induced fidelity recurrence is implemented here exactly and serves as an
independent oracle for the full 9-qubit simulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import qmath
from .qmath import I2, X, Y, Z, embed, projector
from .wbasis import w_basis_vector

DEPHASING = "dephasing"
DEPOLARIZING = "depolarizing"
KINDS = (DEPHASING, DEPOLARIZING)

DEPHASING_F_RANGE = (1 / 3, 1.0)
DEPOLARIZING_F_RANGE = (1 / 8, 1.0)


@dataclass(frozen=True)
class ChannelSpec:
    """A channel kind plus its reliability mu in [0, 1]."""

    kind: str
    mu: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must be in [0, 1], got {self.mu}")


def kraus_operators(spec: ChannelSpec) -> list[np.ndarray]:
    """Single-qubit Kraus operators of the channel."""
    mu = spec.mu
    if spec.kind == DEPHASING:
        # rho -> (1+mu)/2 rho + (1-mu)/2 Z rho Z
        return [np.sqrt((1 + mu) / 2) * I2, np.sqrt((1 - mu) / 2) * Z]
    # rho -> mu rho + (1-mu)/4 (rho + X rho X + Y rho Y + Z rho Z)
    return [
        np.sqrt(mu + (1 - mu) / 4) * I2,
        np.sqrt((1 - mu) / 4) * X,
        np.sqrt((1 - mu) / 4) * Y,
        np.sqrt((1 - mu) / 4) * Z,
    ]


def apply_channel(rho: np.ndarray, spec: ChannelSpec, qubit: int) -> np.ndarray:
    """Apply the channel to one qubit of a multi-qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0].bit_length() - 1
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    out = np.zeros_like(rho)
    for k in kraus_operators(spec):
        full = embed(k, n, [qubit])
        out += full @ rho @ qmath.dag(full)
    return out


def noisy_w(spec: ChannelSpec) -> np.ndarray:
    """The channel applied with the same mu to each qubit of the W projector."""
    rho = projector(w_basis_vector(0))
    for qubit in range(3):
        rho = apply_channel(rho, spec, qubit)
    return rho


def dephasing_fidelity(mu: float) -> float:
    """W fidelity of the locally dephased W state."""
    return (1 + 2 * mu ** 2) / 3


def depolarizing_fidelity(mu: float) -> float:
    """W fidelity of the locally depolarized W state."""
    return (3 + mu + 9 * mu ** 2 + 11 * mu ** 3) / 24


def mu_for_fidelity(kind: str, fidelity: float) -> float:
    """Invert the fidelity formulas: the mu whose noisy W state has the
    requested fidelity.

    The dephasing inverse is closed-form; the depolarizing cubic is solved
    by bisection (it is strictly monotone on [0, 1]).
    """
    if kind == DEPHASING:
        lo, hi = DEPHASING_F_RANGE
        if not lo - 1e-12 <= fidelity <= hi + 1e-12:
            raise ValueError(f"dephasing fidelity must be in [{lo}, {hi}], got {fidelity}")
        return float(np.sqrt(max(0.0, (3 * fidelity - 1) / 2)))
    if kind == DEPOLARIZING:
        lo, hi = DEPOLARIZING_F_RANGE
        if not lo - 1e-12 <= fidelity <= hi + 1e-12:
            raise ValueError(f"depolarizing fidelity must be in [{lo}, {hi}], got {fidelity}")
        a, b = 0.0, 1.0
        while b - a > 1e-12:
            mid = 0.5 * (a + b)
            if depolarizing_fidelity(mid) < fidelity:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)
    raise ValueError(f"unknown channel kind {kind!r}; expected one of {KINDS}")


def dephasing_fidelity_map(fidelity):
    """One recurrence step of the protocol on the dephased family, in closed
    form.  Returns (new fidelity, success probability).

    Accepts floats or exact ``fractions.Fraction`` values; with Fraction
    input the result is exact rational arithmetic, which makes this map
    usable as an independent oracle for the simulated protocol.
    """
    exact = isinstance(fidelity, Fraction)
    f = fidelity if exact else float(fidelity)
    lo, hi = DEPHASING_F_RANGE
    if not lo - 1e-12 <= float(f) <= hi + 1e-12:
        raise ValueError(f"fidelity must be in [{lo}, {hi}], got {fidelity}")

    if exact:
        c = Fraction
    else:
        def c(p, q):
            return p / q
    g = 1 - f
    numerator = c(25, 81) * f ** 3 + c(1, 18) * f * g ** 2 + c(1, 324) * g ** 3
    denominator = (c(25, 81) * f ** 3 + c(1, 9) * f ** 2 * g
                   + c(2, 27) * f * g ** 2 + c(17, 162) * g ** 3)
    return numerator / denominator, denominator
