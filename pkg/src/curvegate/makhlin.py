"""Makhlin local invariants of two-qubit gates and the derived cost function.

Two unitaries share their pair of Makhlin invariants exactly when they
differ only by single-qubit operations, so the pair is the natural target
for entangling-gate design: a gate is CNOT-equivalent iff its invariants
are (0, 1). For the weak-coupling first-order evolution the invariants
depend only on the space-curve displacement, which gives the closed-form
predictions implemented here alongside the exact matrix formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .linalg import require_unitary

# Bell ("magic") basis change. Columns are Bell states up to phases.
BELL_BASIS = np.array(
    [[1, 0, 0, 1j],
     [0, 1j, 1, 0],
     [0, 1j, -1, 0],
     [1, 0, 0, -1j]], dtype=complex) / np.sqrt(2)

_IM_G2_TOL = 1e-8


@dataclass(frozen=True)
class MakhlinPair:
    """The two local invariants (g1 complex, g2 real)."""

    g1: complex
    g2: float

    def as_tuple(self) -> tuple[complex, float]:
        return (self.g1, self.g2)


def _invariants_raw(u: np.ndarray) -> tuple[complex, complex]:
    """g1, g2 with g2 kept complex (for the gradient chain rule)."""
    um = BELL_BASIS.conj().T @ u @ BELL_BASIS
    m = um.T @ um
    det = np.linalg.det(u)
    tr = np.trace(m)
    g1 = tr ** 2 / (16 * det)
    g2 = (tr ** 2 - np.trace(m @ m)) / (4 * det)
    return g1, g2


def makhlin(u: np.ndarray, unitarity_tol: float = 1e-8) -> MakhlinPair:
    """Makhlin invariant pair of a two-qubit unitary.

    The determinant is computed explicitly, so gates carrying a global
    phase (U(4) rather than SU(4)) are handled correctly. g2 is real for
    unitary input up to rounding; the imaginary residue is checked against
    1e-8 and dropped.
    """
    u = require_unitary(u, unitarity_tol, "gate")
    if u.shape != (4, 4):
        raise InputError("Makhlin invariants are defined for 4x4 unitaries")
    g1, g2 = _invariants_raw(u)
    if abs(g2.imag) > _IM_G2_TOL:
        raise InputError(f"Im(g2) = {g2.imag:.3e} exceeds {_IM_G2_TOL:g}; input too far from unitary")
    return MakhlinPair(complex(g1), float(g2.real))


def predicted_invariants(j: float, r_final: float) -> MakhlinPair:
    """Invariants of the first-order gate for displacement |R(t_f)|.

    g1 = cos^2(J|R|/2), g2 = 2 + cos(J|R|). The product J|R| is the only
    knob: odd multiples of pi land exactly on the CNOT class.
    """
    if j < 0 or r_final < 0:
        raise InputError("j and r_final must be non-negative")
    x = j * r_final
    return MakhlinPair(complex(np.cos(x / 2) ** 2), float(2 + np.cos(x)))


def conditional_rotation_angle(pair: MakhlinPair, residual_tol: float = 0.05) -> float:
    """Angle theta of the conditional-X-rotation family matching the pair.

    Inverts g1 = cos^2(theta) (better conditioned near the CNOT point
    theta = pi/2 than g2) and checks the pair against g2 = 2 + cos(2 theta).
    """
    g1 = pair.g1.real
    theta = float(np.arccos(np.sqrt(np.clip(g1, 0.0, 1.0))))
    residual = max(abs(pair.g1 - np.cos(theta) ** 2),
                   abs(pair.g2 - (2 + np.cos(2 * theta))))
    if residual > residual_tol:
        raise InputError(
            f"gate outside conditional-rotation family: residual {residual:.3g} > {residual_tol:g}")
    return theta


def makhlin_cost(u: np.ndarray) -> float:
    """|g1|^2 + |g2 - 1|^2; zero exactly on the CNOT equivalence class."""
    pair = makhlin(u)
    return abs(pair.g1) ** 2 + abs(pair.g2 - 1.0) ** 2


def invariant_adjoints(u: np.ndarray):
    """Cost, raw invariants and adjoint matrices W1, W2 for gradient work.

    For a perturbation dU of a unitary U the invariants respond as
    d g_i = Tr(W_i dU). Returned g2 is kept complex so downstream chain
    rules stay exact.
    """
    um = BELL_BASIS.conj().T @ u @ BELL_BASIS
    m = um.T @ um
    det = np.linalg.det(u)
    trm = np.trace(m)
    g1 = trm ** 2 / (16 * det)
    g2 = (trm ** 2 - np.trace(m @ m)) / (4 * det)
    a1 = BELL_BASIS @ um.T @ BELL_BASIS.conj().T
    a2 = BELL_BASIS @ (m @ um.T) @ BELL_BASIS.conj().T
    udag = u.conj().T
    w1 = (trm / (4 * det)) * a1 - g1 * udag
    w2 = (trm * a1 - a2) / det - g2 * udag
    cost = abs(g1) ** 2 + abs(g2 - 1.0) ** 2
    return cost, g1, g2, w1, w2
