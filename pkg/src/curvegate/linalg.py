"""Small complex-matrix kernel for 2x2 and 4x4 gate algebra.

Everything here operates on plain ``numpy.ndarray`` of ``complex128``.
Only the two Hilbert-space dimensions that occur in the problem (a single
driven qubit and the two-qubit register) are supported; dimension checks
are deliberate, not incidental.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0]], dtype=complex)

SWAP = np.array(
    [[1, 0, 0, 0],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1]], dtype=complex)


def pauli_product(label: str) -> np.ndarray:
    """Two-qubit Pauli product, e.g. ``"ZX"`` -> sigma_z (x) sigma_x.

    The first letter acts on qubit 1 (the undriven, control slot), the
    second on qubit 2 (the driven slot).
    """
    if len(label) != 2 or any(c not in SIGMA for c in label):
        raise InputError(f"invalid Pauli label {label!r}; expected two of I,X,Y,Z")
    return np.kron(SIGMA[label[0]], SIGMA[label[1]])


def _check_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in (2, 4):
        raise InputError(f"{name} must be 2x2 or 4x4, got shape {a.shape}")
    return a


def hermiticity_defect(h: np.ndarray) -> float:
    """Frobenius norm of H - H^dagger."""
    return float(np.linalg.norm(h - h.conj().T))


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of U^dagger U - I."""
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def require_unitary(u: np.ndarray, tol: float = 1e-8, name: str = "matrix") -> np.ndarray:
    u = _check_square(u, name)
    defect = unitarity_defect(u)
    if defect > tol:
        raise InputError(f"{name} is not unitary: ||U^dag U - I||_F = {defect:.3e} > {tol:g}")
    return u


def expm_hermitian_skew(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H, via eigendecomposition.

    The eigendecomposition route returns a matrix that is unitary to
    rounding for any step size, which piecewise-constant propagation
    relies on.
    """
    h = _check_square(h, "generator")
    scale = max(1.0, float(np.linalg.norm(h)))
    defect = hermiticity_defect(h)
    if defect > 1e-10 * scale:
        raise InputError(f"generator is not Hermitian: ||H - H^dag||_F = {defect:.3e}")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def expm_hermitian_batch(h: np.ndarray, t: float) -> np.ndarray:
    """Batched exp(-i H_k t) for a stack of Hermitian matrices (n, d, d).

    No Hermiticity check; intended for hot loops where the caller
    constructed the stack to be Hermitian.
    """
    w, v = np.linalg.eigh(h)
    phase = np.exp(-1j * w * t)
    return np.einsum("nij,nj,nkj->nik", v, phase, v.conj())


def ordered_product(steps: np.ndarray) -> np.ndarray:
    """Time-ordered product steps[-1] @ ... @ steps[1] @ steps[0].

    Pairwise tree reduction: O(log n) batched matmul passes instead of a
    Python loop over every step.
    """
    u = np.asarray(steps)
    if u.ndim != 3:
        raise InputError("expected a stack of matrices")
    while len(u) > 1:
        m = len(u) // 2
        pair = np.matmul(u[1:2 * m:2], u[0:2 * m:2])
        u = np.concatenate([pair, u[2 * m:]]) if len(u) % 2 else pair
    return u[0]


def frobenius_distance_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """min over phi of ||A - e^{i phi} B||_F, in closed form.

    The minimiser is phi = arg Tr(B^dag A); the minimum squared distance is
    ||A||^2 + ||B||^2 - 2 |Tr(B^dag A)|.
    """
    a = _check_square(a, "A")
    b = _check_square(b, "B")
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d2 = (np.linalg.norm(a) ** 2 + np.linalg.norm(b) ** 2
          - 2 * abs(np.trace(b.conj().T @ a)))
    return float(np.sqrt(max(d2, 0.0)))
