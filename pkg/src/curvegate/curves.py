"""Space-curve construction of entangling-gate pulses.

A two-qubit gate on weakly Ising-coupled qubits is, to first order in the
coupling, determined by a 3D space curve R(t): the drive pulse is twice the
curve's curvature, the coupling sets a constant torsion tau_R = J/2, and
the entangling power depends only on the final displacement |R(t_f)|
through J|R(t_f)|. Constant-torsion curves are generated from an arbitrary
spherical curve B(l) (the binormal image) via

    R(t) = (1/tau_R) * integral of B x dB,   arclength s = tau_R * t,

and the pulse is Omega(t) = 2 tau_R * kappa_g(s), with kappa_g the geodesic
curvature of B. Zero pulse endpoints correspond to B starting and ending
along great-circle arcs.

The one-parameter family used for design is

    B(l) = sqrt(1 - lambda sin^2(beta l)) (cos l, sin l, 0)
           + sqrt(lambda) sin(beta l) (0, 0, 1),    l in [0, pi/beta],

whose displacement is searched over lambda to hit a target J|R(t_f)|.

Conventions: binormal curves are resampled to a uniform arclength grid
(cubic interpolation, renormalised to the sphere) before any differential
geometry; all derivative estimates are second-order stencils on that grid.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import InputError, UnreachableTargetError

DEFAULT_SAMPLES = 4096

# Pulse CSV units: nanoseconds and ordinary-frequency MHz (Omega / 2 pi 1e6).
_T_UNIT = 1e-9
_AMP_UNIT = 2e6 * np.pi


# ---------------------------------------------------------------------------
# pulse container and CSV interface
# ---------------------------------------------------------------------------

@dataclass
class Pulse:
    """Sampled drive envelope.

    Samples are stored in the CSV units (ns, MHz) so that file round trips
    are bit-exact; SI views (seconds, rad/s) are derived once on demand.
    """

    t_ns: np.ndarray
    amp_mhz: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_ns = np.asarray(self.t_ns, dtype=float)
        self.amp_mhz = np.asarray(self.amp_mhz, dtype=float)
        if self.t_ns.ndim != 1 or self.t_ns.shape != self.amp_mhz.shape:
            raise InputError("pulse needs matching 1-D time and amplitude arrays")
        if len(self.t_ns) < 2:
            raise InputError("pulse needs at least two samples")
        if self.t_ns[0] != 0.0:
            raise InputError("pulse must start at t = 0")
        if np.any(np.diff(self.t_ns) <= 0):
            raise InputError("pulse times must be strictly increasing")
        self._t = self.t_ns * _T_UNIT
        self._omega = self.amp_mhz * _AMP_UNIT

    @classmethod
    def from_si(cls, t: np.ndarray, omega: np.ndarray, meta: dict | None = None) -> "Pulse":
        """Build from SI samples (seconds, rad/s)."""
        return cls(np.asarray(t) / _T_UNIT, np.asarray(omega) / _AMP_UNIT, meta or {})

    @property
    def t(self) -> np.ndarray:
        """Sample times in seconds."""
        return self._t

    @property
    def omega(self) -> np.ndarray:
        """Envelope in rad/s."""
        return self._omega

    @property
    def t_f(self) -> float:
        return float(self._t[-1])

    def value(self, t):
        """Envelope at time(s) t (seconds), linear interpolation."""
        return np.interp(t, self._t, self._omega)


def write_pulse_csv(pulse: Pulse, path: str) -> None:
    """Write the shared pulse format: header ``t_ns,amp_mhz``, 17 significant
    digits, LF line endings. Written atomically (temp file + rename)."""
    buf = io.StringIO()
    buf.write("t_ns,amp_mhz\n")
    for t, a in zip(pulse.t_ns, pulse.amp_mhz):
        buf.write(f"{t:.17g},{a:.17g}\n")
    _atomic_write(path, buf.getvalue())


def read_pulse_csv(path: str) -> Pulse:
    """Read a pulse written by :func:`write_pulse_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty pulse file") from None
        if [h.strip() for h in header] != ["t_ns", "amp_mhz"]:
            raise InputError(f"{path}: expected header 't_ns,amp_mhz', got {','.join(header)!r}")
        t_ns, amp = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                t_ns.append(float(row[0]))
                amp.append(float(row[1]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return Pulse(np.array(t_ns), np.array(amp))


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# curve containers
# ---------------------------------------------------------------------------

@dataclass
class BinormalCurve:
    """Sampled spherical curve with its arclength table.

    ``l`` is the native parameter, ``b`` the unit vectors (n, 3), ``s`` the
    arclength at each sample. ``lam``/``beta`` record the ansatz parameters
    when the curve came from :func:`sample_ansatz` (None for user-supplied
    curves).
    """

    l: np.ndarray
    b: np.ndarray
    s: np.ndarray
    lam: float | None = None
    beta: float | None = None

    def __post_init__(self):
        self.l = np.asarray(self.l, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.b.ndim != 2 or self.b.shape[1] != 3 or len(self.b) != len(self.l) != len(self.s):
            raise InputError("binormal curve needs matching l, (n,3) b, s arrays")
        if len(self.l) < 5:
            raise InputError("binormal curve needs at least 5 samples")
        if self.s[0] != 0.0 or np.any(np.diff(self.s) <= 0):
            raise InputError("arclength must start at 0 and increase strictly")
        norms = np.linalg.norm(self.b, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise InputError("binormal samples must lie on the unit sphere")

    @property
    def s_f(self) -> float:
        return float(self.s[-1])

    def is_uniform_arclength(self) -> bool:
        ds = np.diff(self.s)
        return bool(np.max(np.abs(ds - ds[0])) < 1e-9 * max(self.s_f, 1.0))


@dataclass
class SpaceCurve:
    """Constant-torsion space curve: times (s), positions (s), curvature (rad/s)."""

    t: np.ndarray
    r: np.ndarray
    tau_r: float
    kappa: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.kappa = np.asarray(self.kappa, dtype=float)
        if np.linalg.norm(self.r[0]) != 0.0:
            raise InputError("space curve must start at the origin")

    @property
    def t_f(self) -> float:
        return float(self.t[-1])

    @property
    def displacement(self) -> float:
        return float(np.linalg.norm(self.r[-1]))


# ---------------------------------------------------------------------------
# ansatz sampling and arclength machinery
# ---------------------------------------------------------------------------

def _ansatz_point(l, lam, beta):
    sb = np.sin(beta * l)
    u = np.sqrt(np.maximum(1.0 - lam * sb ** 2, 0.0))
    w = np.sqrt(lam) * sb
    return np.stack([u * np.cos(l), u * np.sin(l), w], axis=-1)


def _ansatz_deriv(l, lam, beta):
    sb, cb = np.sin(beta * l), np.cos(beta * l)
    u = np.sqrt(np.maximum(1.0 - lam * sb ** 2, 0.0))
    # u du/dl = -lam beta sin cos; the quotient is 0/0 only at the lam=1 corner
    du = np.where(u > 1e-12, -lam * beta * sb * cb / np.maximum(u, 1e-300), 0.0)
    dw = np.sqrt(lam) * beta * cb
    return np.stack([du * np.cos(l) - u * np.sin(l),
                     du * np.sin(l) + u * np.cos(l),
                     dw], axis=-1)


def _validate_ansatz(lam: float, beta: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lam}")
    if beta <= 0:
        raise InputError(f"beta must be positive, got {beta}")


def sample_ansatz(lam: float, beta: float, n: int = DEFAULT_SAMPLES) -> BinormalCurve:
    """Sample the spherical ansatz on n+1 uniform l points over [0, pi/beta].

    The arclength table is built from the analytic speed |dB/dl| with a
    refined cumulative trapezoid (8x oversampling), accurate to ~1e-10 of
    the total length at the default n.
    """
    _validate_ansatz(lam, beta)
    if n < 64:
        raise InputError(f"need n >= 64 samples, got {n}")
    l_f = np.pi / beta
    l = np.linspace(0.0, l_f, n + 1)
    b = _ansatz_point(l, lam, beta)
    refine = 8
    l_fine = np.linspace(0.0, l_f, refine * n + 1)
    speed = np.linalg.norm(_ansatz_deriv(l_fine, lam, beta), axis=-1)
    h = l_fine[1] - l_fine[0]
    s_fine = np.concatenate([[0.0], np.cumsum((speed[1:] + speed[:-1]) * (h / 2))])
    return BinormalCurve(l=l, b=b, s=s_fine[::refine].copy(), lam=lam, beta=beta)


def ansatz_arclength(lam: float, beta: float, n: int = DEFAULT_SAMPLES) -> float:
    """Total arclength s_f of the ansatz curve."""
    return sample_ansatz(lam, beta, n).s_f


def reparametrize_arclength(curve: BinormalCurve, n: int | None = None) -> BinormalCurve:
    """Resample a binormal curve onto a uniform arclength grid.

    Components are cubic-interpolated against l and renormalised back onto
    the unit sphere; the l values of the new samples come from the monotone
    inverse of the arclength table.
    """
    if curve.is_uniform_arclength() and (n is None or n + 1 == len(curve.l)):
        return curve
    n = n if n is not None else len(curve.l) - 1
    s_u = np.linspace(0.0, curve.s_f, n + 1)
    inv = PchipInterpolator(curve.s, curve.l)
    l_u = inv(s_u)
    spline = CubicSpline(curve.l, curve.b, axis=0)
    b_u = spline(l_u)
    b_u /= np.linalg.norm(b_u, axis=1, keepdims=True)
    return BinormalCurve(l=l_u, b=b_u, s=s_u, lam=curve.lam, beta=curve.beta)


def _derivative(y: np.ndarray, h: float) -> np.ndarray:
    """First derivative on a uniform grid, O(h^2) including the ends."""
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2 * h)
    d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h)
    d[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * h)
    return d


def _second_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Second derivative on a uniform grid, O(h^2) including the ends."""
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h ** 2
    d[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h ** 2
    d[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h ** 2
    return d


def geodesic_curvature(curve: BinormalCurve) -> np.ndarray:
    """Geodesic curvature magnitude per arclength sample.

    Computed as the norm of the component of d^2 B/ds^2 tangent to the
    sphere. Vanishing endpoints mean the curve enters and leaves along
    great circles, which is what makes the extracted pulse start and end
    at zero.
    """
    curve = reparametrize_arclength(curve)
    h = curve.s[1] - curve.s[0]
    bpp = _second_derivative(curve.b, h)
    radial = np.sum(bpp * curve.b, axis=1, keepdims=True) * curve.b
    return np.linalg.norm(bpp - radial, axis=1)


def integrate_space_curve(curve: BinormalCurve, tau_r: float) -> SpaceCurve:
    """Constant-torsion space curve R(t) = (1/tau_r) int B x dB.

    Time is arclength over torsion (t = s / tau_r, so t_f = s_f / tau_r)
    and the attached curvature profile is kappa(t) = tau_r * kappa_g(s).
    """
    if tau_r <= 0:
        raise InputError(f"tau_r must be positive, got {tau_r}")
    curve = reparametrize_arclength(curve)
    h = curve.s[1] - curve.s[0]
    bp = _derivative(curve.b, h)
    cross = np.cross(curve.b, bp)
    integral = np.concatenate(
        [np.zeros((1, 3)), np.cumsum((cross[1:] + cross[:-1]) * (h / 2), axis=0)])
    kappa = tau_r * geodesic_curvature(curve)
    meta = {"tau_r": tau_r}
    if curve.lam is not None:
        meta.update({"lambda": curve.lam, "beta": curve.beta})
    return SpaceCurve(t=curve.s / tau_r, r=integral / tau_r, tau_r=tau_r,
                      kappa=kappa, meta=meta)


def pulse_from_curve(curve: SpaceCurve) -> Pulse:
    """Drive envelope Omega(t) = 2 kappa(t) on the curve's time grid."""
    if curve.kappa is None or len(curve.kappa) != len(curve.t):
        raise InputError("space curve carries no curvature profile")
    return Pulse.from_si(curve.t, 2.0 * curve.kappa, dict(curve.meta))


def displacement_invariant(lam: float, beta: float, n: int = DEFAULT_SAMPLES) -> float:
    """J |R(t_f)| for the ansatz: 2 |int B x dB|, independent of J.

    The integral is evaluated in the native parameter l with composite
    Simpson (the cross product is parametrisation-invariant), so the value
    never references the torsion at all.
    """
    _validate_ansatz(lam, beta)
    if n % 2:
        n += 1
    l = np.linspace(0.0, np.pi / beta, n + 1)
    cross = np.cross(_ansatz_point(l, lam, beta), _ansatz_deriv(l, lam, beta))
    h = l[1] - l[0]
    integral = (h / 3) * (cross[0] + cross[-1]
                          + 4 * cross[1:-1:2].sum(axis=0) + 2 * cross[2:-1:2].sum(axis=0))
    return 2.0 * float(np.linalg.norm(integral))


def search_lambda(beta: float, target: float, tol: float = 1e-9,
                  n: int = DEFAULT_SAMPLES, grid_step: float = 1e-3) -> float:
    """Smallest lambda in [0, 1] with displacement_invariant = target.

    Coarse scan at ``grid_step`` picks the lowest-lambda bracketing
    interval, then bisection tightens until the displacement is within
    ``tol`` of the target. Deterministic and derivative-free; the
    displacement need not be monotone in lambda.
    """
    if beta <= 0:
        raise InputError(f"beta must be positive, got {beta}")
    lams = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    lams[-1] = 1.0
    vals = np.array([displacement_invariant(lm, beta, n) for lm in lams])
    f = vals - target
    bracket = None
    for i, fi in enumerate(f):
        if fi == 0.0:
            return float(lams[i])
        if i + 1 < len(f) and fi * f[i + 1] < 0:
            bracket = i
            break
    if bracket is None:
        raise UnreachableTargetError(
            f"target {target:.6g} unreachable for beta={beta:.6g}: "
            f"attained range [{vals.min():.6g}, {vals.max():.6g}]")
    lo, hi = float(lams[bracket]), float(lams[bracket + 1])
    flo = f[bracket]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = displacement_invariant(mid, beta, n) - target
        if abs(fmid) < tol and hi - lo < 1e-12:
            return mid
        if flo * fmid <= 0:
            hi = mid
        else:
            lo, flo = mid, fmid
        if hi - lo < 5e-17:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# inverse map: pulse -> curve
# ---------------------------------------------------------------------------

def curve_from_pulse(pulse: Pulse, j: float) -> SpaceCurve:
    """Reconstruct the space curve driven by a pulse at coupling j.

    Integrates the moving-frame system with curvature Omega(t)/2 and
    constant torsion j/2, starting with the tangent along +z (the
    coupling axis at t = 0). Each step applies the exact rotation for the
    midpoint curvature, so frames stay orthonormal to rounding. The
    returned curve matches the forward construction up to a rigid
    rotation; compare rotation-invariant quantities such as |R(t)|.
    """
    if j <= 0:
        raise InputError(f"coupling j must be positive, got {j}")
    tau = j / 2.0
    t = pulse.t
    omega = pulse.omega
    n = len(t)
    # columns: tangent, normal, binormal; right-handed with T(0) = +z
    frame = np.array([[0.0, 0.0, -1.0],
                      [0.0, 1.0, 0.0],
                      [1.0, 0.0, 0.0]])
    r = np.zeros((n, 3))
    e1 = np.array([1.0, 0.0, 0.0])
    for i in range(n - 1):
        h = t[i + 1] - t[i]
        k_mid = 0.25 * (omega[i] + omega[i + 1])
        a = np.array([tau, 0.0, k_mid])  # Darboux vector in frame coordinates
        na = np.sqrt(a @ a)
        ax = np.array([[0.0, -a[2], a[1]],
                       [a[2], 0.0, -a[0]],
                       [-a[1], a[0], 0.0]])
        if na > 0.0:
            th = na * h
            rot = (np.eye(3) + (np.sin(th) / na) * ax
                   + ((1.0 - np.cos(th)) / na ** 2) * (ax @ ax))
            disp = (h * np.eye(3) + ((1.0 - np.cos(th)) / na ** 2) * ax
                    + ((th - np.sin(th)) / na ** 3) * (ax @ ax))
        else:
            rot, disp = np.eye(3), h * np.eye(3)
        r[i + 1] = r[i] + frame @ (disp @ e1)
        frame = frame @ rot
    return SpaceCurve(t=t.copy(), r=r, tau_r=tau, kappa=np.abs(omega) / 2.0,
                      meta={"reconstructed": True, "j": j})
