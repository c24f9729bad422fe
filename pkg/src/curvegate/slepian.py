"""Bandwidth-constrained baseline pulses from discrete prolate spheroidal
sequences (DPSS).

The k leading DPSS of length n and time-half-bandwidth product nw span the
sequences whose spectral energy is maximally concentrated in |f| <= nw/n.
Random pulses drawn from that span are the standard low-bandwidth baseline
to compare geometric seeds against: optimization runs over the k expansion
coefficients only, so the result can never leave the band-limited span.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .curves import _atomic_write
from .device import DeviceParams
from .errors import InputError
from .grape import COST_FLOOR, GrapeConfig, PiecewisePulse, _cost_of, cost_gradient


@dataclass
class SlepianBasis:
    """k orthonormal DPSS of length n, ordered by spectral concentration."""

    n: int
    nw: float
    k: int
    vectors: np.ndarray        # (k, n), rows orthonormal
    concentrations: np.ndarray  # (k,), strictly decreasing, in (0, 1)

    @property
    def half_bandwidth(self) -> float:
        """W = nw / n in cycles per sample."""
        return self.nw / self.n

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.k,):
            raise InputError(f"expected {self.k} coefficients, got {coeffs.shape}")
        return self.vectors.T @ coeffs


def _sinc_kernel(n: int, w: float) -> np.ndarray:
    ij = np.subtract.outer(np.arange(n), np.arange(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.sin(2 * np.pi * w * ij) / (np.pi * ij)
    a[np.diag_indices(n)] = 2 * w
    return a


def dpss(n: int, nw: float, k: int) -> SlepianBasis:
    """Leading k Slepian sequences via the commuting tridiagonal matrix.

    Eigenvectors of the tridiagonal operator are numerically robust
    (unlike the clustered-eigenvalue sinc kernel); the concentrations are
    then evaluated directly as Rayleigh quotients of the sinc kernel.
    """
    if n < 8:
        raise InputError(f"need n >= 8, got {n}")
    if not 0 < nw < n / 2:
        raise InputError(f"need 0 < nw < n/2, got nw={nw}")
    kmax = min(int(round(2 * nw)), n)
    if not 1 <= k <= kmax:
        raise InputError(f"need 1 <= k <= {kmax} for nw={nw}, got k={k}")
    w = nw / n
    i = np.arange(n)
    diag = ((n - 1 - 2 * i) / 2.0) ** 2 * np.cos(2 * np.pi * w)
    off = np.arange(1, n) * (n - np.arange(1, n)) / 2.0
    _, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(n - k, n - 1))
    vecs = vecs[:, ::-1].T
    # Slepian sign convention: positive mean for the symmetric sequences,
    # positive leading lobe for the antisymmetric ones.
    for v in vecs:
        s = v.sum()
        if abs(s) > 1e-9:
            if s < 0:
                v *= -1
        elif v[: n // 2].sum() < 0:
            v *= -1
    kernel = _sinc_kernel(n, w)
    conc = np.einsum("ki,ij,kj->k", vecs, kernel, vecs)
    return SlepianBasis(n=n, nw=float(nw), k=k, vectors=np.ascontiguousarray(vecs),
                        concentrations=conc)


def write_basis_csv(basis: SlepianBasis, path: str) -> None:
    """One sequence per column, for inspection/plotting."""
    header = ",".join(f"seq{j}" for j in range(basis.k))
    rows = [",".join(f"{x:.17g}" for x in basis.vectors[:, i]) for i in range(basis.n)]
    _atomic_write(path, header + "\n" + "\n".join(rows) + "\n")


def random_pulse(basis: SlepianBasis, amplitude_scale: float, seed: int,
                 t_f: float) -> PiecewisePulse:
    """Random band-limited pulse: uniform coefficients, zeroed ends, set peak.

    Coefficients are i.i.d. uniform on [-1, 1] from a seeded generator;
    the linear ramp through the endpoint values is subtracted (so the
    pulse starts and ends at zero) and the result is rescaled to peak
    amplitude `amplitude_scale`.
    """
    if amplitude_scale <= 0 or t_f <= 0:
        raise InputError("amplitude_scale and t_f must be positive")
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, basis.k)
    p = basis.combine(coeffs)
    ramp = p[0] + (p[-1] - p[0]) * np.arange(basis.n) / (basis.n - 1)
    p = p - ramp
    peak = np.abs(p).max()
    if peak == 0.0:
        raise InputError("degenerate draw: zero pulse after endpoint removal")
    return PiecewisePulse(p * (amplitude_scale / peak), t_f / basis.n)


@dataclass
class BasisOptimizeResult:
    coeffs: np.ndarray
    pulse: PiecewisePulse
    cost_trace: np.ndarray
    stalled: bool = False

    @property
    def cost_final(self) -> float:
        return float(self.cost_trace[-1])


def optimize_in_basis(basis: SlepianBasis, coeffs0: np.ndarray, t_f: float,
                      device: DeviceParams,
                      cfg: GrapeConfig | None = None) -> BasisOptimizeResult:
    """Minimize the Makhlin cost over the k expansion coefficients.

    The gradient is the full amplitude gradient projected onto the basis
    (chain rule through the linear combination); the line search is the
    same Armijo backtracking as the unconstrained optimizer. The output
    pulse is exactly basis . coeffs: endpoint pinning does not apply in
    the span and is ignored.
    """
    cfg = cfg or GrapeConfig()
    coeffs = np.asarray(coeffs0, dtype=float).copy()
    if coeffs.shape != (basis.k,):
        raise InputError(f"expected {basis.k} coefficients, got {coeffs.shape}")
    dt = t_f / basis.n
    if dt <= 0:
        raise InputError("t_f must be positive")

    def pulse_of(c):
        return PiecewisePulse(basis.vectors.T @ c, dt)

    def cost_grad(c):
        pw = pulse_of(c)
        cost, g = cost_gradient(pw, device, cfg.frame, cfg.dt_full)
        return cost, basis.vectors @ g

    cost, grad = cost_grad(coeffs)
    trace = [cost]
    stalled = False
    alpha = None
    for _ in range(cfg.max_iters):
        if cost < COST_FLOOR:
            break
        gmax = np.abs(grad).max()
        if gmax * np.abs(basis.vectors).max() * dt < cfg.grad_tol:
            break
        if alpha is None:
            alpha = 0.02 * max(np.abs(coeffs).max(), 1.0) / gmax
        step = 2.0 * alpha
        gsq = float(grad @ grad)
        accepted = False
        for _ in range(80):
            trial = coeffs - step * grad
            trial_cost = _cost_of(basis.vectors.T @ trial, pulse_of(trial), device, cfg)
            if trial_cost <= cost - 1e-4 * step * gsq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            stalled = True
            break
        alpha = step
        coeffs = trial
        trace.append(trial_cost)
        cost, grad = cost_grad(coeffs)
    return BasisOptimizeResult(coeffs=coeffs, pulse=pulse_of(coeffs),
                               cost_trace=np.array(trace), stalled=stalled)


def multistart_optimize(basis: SlepianBasis, t_f: float, device: DeviceParams,
                        amplitude_scale: float, restarts: int = 10, seed: int = 0,
                        cfg: GrapeConfig | None = None) -> tuple[BasisOptimizeResult, list]:
    """Best-of-N seeded coefficient optimization.

    Each restart draws uniform coefficients, rescales them so the combined
    pulse peaks at amplitude_scale, and optimizes. Deterministic given
    `seed`; ties in final cost resolve to the lowest restart index.
    """
    if restarts < 1:
        raise InputError("need at least one restart")
    root = np.random.SeedSequence(seed)
    best = None
    finals = []
    for idx, child in enumerate(root.spawn(restarts)):
        rng = np.random.default_rng(child)
        coeffs = rng.uniform(-1.0, 1.0, basis.k)
        peak = np.abs(basis.combine(coeffs)).max()
        if peak > 0:
            coeffs *= amplitude_scale / peak
        res = optimize_in_basis(basis, coeffs, t_f, device, cfg)
        finals.append(res.cost_final)
        if best is None or res.cost_final < best[1].cost_final:
            best = (idx, res)
    return best[1], finals
