"""Two-qubit exchange-coupled spin device: Hamiltonians and propagation.

The device is a pair of electron spins in a double quantum dot under a
longitudinal field gradient (splitting the resonance frequencies by far
more than the exchange coupling J) and a transverse AC drive. Two levels
of description are implemented:

* the full interaction-picture Hamiltonian, with every drive term and its
  oscillating phase written out explicitly (entries carry phases at the
  two sum/difference Zeeman frequencies); this is what `propagate` solves
  with frame="full";
* the resonant rotating-frame model H = (J/4)(ZZ - IZ) + (Omega/4) IX,
  valid when the drive is matched to the left-qubit transition and
  counter-rotating terms are dropped.

Frequencies are angular (rad/s) throughout the Python API; the JSON config
uses ordinary frequencies in GHz/MHz, converted on load.

All magnetic-field symbols follow B_{y,q}(t) = by_q0 + envelope(t) *
cos(omega t + phi) with q = L the driven dot; crosstalk scales the same
envelope onto the right dot.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import curves
from .curves import Pulse, ansatz_arclength, curve_from_pulse
from .errors import InputError
from .linalg import expm_hermitian_batch, expm_hermitian_skew, ordered_product, pauli_product

TWO_PI = 2.0 * np.pi

# Exchange coupling calibrated once from the fast CNOT design point
# (lambda = 0.221163, beta = 2 pi / 3, gate time 28.3836 ns); see derive_j.
CALIBRATED_J = TWO_PI * 19.7e6

DT_FULL_DEFAULT = 0.5e-12
DT_ROTATING_DEFAULT = 10e-12
_DT_FULL_MAX = 2e-12


@dataclass
class DeviceParams:
    """Device constants, all angular frequencies in rad/s.

    bz_*0 are the bare Zeeman splittings, bz_*1 their exchange-induced
    shifts, by_*0 the static transverse fields. drive_omega is either the
    carrier in rad/s or "auto" (resolve from the left-qubit resonance).
    crosstalk is the ratio of right-dot to left-dot drive amplitude.
    """

    bz_l0: float
    bz_r0: float
    bz_l1: float
    bz_r1: float
    by_l0: float
    by_r0: float
    phi: float
    j: float
    drive_omega: float | str = "auto"
    crosstalk: float = 0.0

    def __post_init__(self):
        if self.j <= 0:
            raise InputError(f"exchange coupling must be positive, got {self.j}")
        if self.crosstalk < 0:
            raise InputError("crosstalk must be non-negative")
        if self.j >= abs(self.bz_r0 - self.bz_l0):
            warnings.warn(
                "weak-coupling condition violated: J is not small against the "
                "Zeeman splitting difference", stacklevel=2)

    # derived combinations used by the interaction-picture matrix
    @property
    def delta_bz(self) -> float:
        return self.bz_r0 - self.bz_l0

    @property
    def delta_bz1(self) -> float:
        return self.bz_r1 - self.bz_l1

    @property
    def mean_bz(self) -> float:
        return 0.5 * (self.bz_l0 + self.bz_r0)

    @property
    def mean_bz1(self) -> float:
        return 0.5 * (self.bz_l1 + self.bz_r1)

    @property
    def alpha_plus(self) -> float:
        return 0.5 * (self.delta_bz + 2 * self.mean_bz)

    @property
    def alpha_minus(self) -> float:
        return 0.5 * (self.delta_bz - 2 * self.mean_bz)

    @property
    def xi(self) -> float:
        return self.j / (self.delta_bz + self.delta_bz1)


def default_device() -> DeviceParams:
    """Reference silicon double-dot parameter set with the calibrated J."""
    return DeviceParams(
        bz_l0=TWO_PI * 18.287e9,
        bz_r0=TWO_PI * 18.501e9,
        bz_l1=TWO_PI * 52.71e6,
        bz_r1=TWO_PI * 5.76e6,
        by_l0=TWO_PI * 5e6,
        by_r0=TWO_PI * 55e6,
        phi=1.5 * np.pi,
        j=CALIBRATED_J,
        drive_omega="auto",
        crosstalk=0.0,
    )


def zero_static_transverse(p: DeviceParams) -> DeviceParams:
    """Copy of the device with the static transverse fields switched off."""
    return dataclasses.replace(p, by_l0=0.0, by_r0=0.0)


_JSON_KEYS = ("bz_l0_ghz", "bz_r0_ghz", "bz_l1_mhz", "bz_r1_mhz",
              "by_l0_mhz", "by_r0_mhz", "phi_rad", "j_mhz",
              "drive_omega", "crosstalk")


def device_from_json(path: str) -> DeviceParams:
    """Load a device config; frequencies are ordinary (omega / 2 pi)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None
    missing = [k for k in _JSON_KEYS if k not in raw]
    if missing:
        raise InputError(f"{path}: missing device keys: {', '.join(missing)}")
    omega = raw["drive_omega"]
    if omega != "auto":
        try:
            omega = TWO_PI * 1e9 * float(omega)
        except (TypeError, ValueError):
            raise InputError(
                f"{path}: drive_omega must be \"auto\" or a GHz number, got {omega!r}") from None
    try:
        return DeviceParams(
            bz_l0=TWO_PI * 1e9 * float(raw["bz_l0_ghz"]),
            bz_r0=TWO_PI * 1e9 * float(raw["bz_r0_ghz"]),
            bz_l1=TWO_PI * 1e6 * float(raw["bz_l1_mhz"]),
            bz_r1=TWO_PI * 1e6 * float(raw["bz_r1_mhz"]),
            by_l0=TWO_PI * 1e6 * float(raw["by_l0_mhz"]),
            by_r0=TWO_PI * 1e6 * float(raw["by_r0_mhz"]),
            phi=float(raw["phi_rad"]),
            j=TWO_PI * 1e6 * float(raw["j_mhz"]),
            drive_omega=omega,
            crosstalk=float(raw["crosstalk"]),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad device field: {exc}") from None


def device_to_json(p: DeviceParams, path: str) -> None:
    """Write a device config in the JSON unit conventions."""
    omega = p.drive_omega
    if omega != "auto":
        omega = omega / (TWO_PI * 1e9)
    payload = {
        "bz_l0_ghz": p.bz_l0 / (TWO_PI * 1e9),
        "bz_r0_ghz": p.bz_r0 / (TWO_PI * 1e9),
        "bz_l1_mhz": p.bz_l1 / (TWO_PI * 1e6),
        "bz_r1_mhz": p.bz_r1 / (TWO_PI * 1e6),
        "by_l0_mhz": p.by_l0 / (TWO_PI * 1e6),
        "by_r0_mhz": p.by_r0 / (TWO_PI * 1e6),
        "phi_rad": p.phi,
        "j_mhz": p.j / (TWO_PI * 1e6),
        "drive_omega": omega,
        "crosstalk": p.crosstalk,
    }
    curves._atomic_write(path, json.dumps(payload, indent=2) + "\n")


def derive_j(t_f_target: float, lam: float, beta: float) -> float:
    """Exchange coupling that makes the (lam, beta) pulse last t_f_target.

    Gate time and coupling trade off through the binormal arclength:
    t_f = s_f / tau_r with tau_r = J/2, so J = 2 s_f / t_f.
    """
    if t_f_target <= 0:
        raise InputError(f"target gate time must be positive, got {t_f_target}")
    return 2.0 * ansatz_arclength(lam, beta) / t_f_target


def auto_drive_frequency(p: DeviceParams) -> float:
    """Carrier frequency resonant with the driven (left-dot) transition.

    The relevant matrix element oscillates at alpha_minus while the two
    levels it connects are split by the diagonal entries, so the resonance
    is |alpha_minus + E2 - E1| with E1, E2 the first two diagonal energies.
    The sign is dropped: a cosine drive at -omega equals one at +omega with
    a reflected phase.
    """
    e1 = p.mean_bz1
    e2 = 0.5 * (p.delta_bz1 - p.j + p.j * p.xi / 2)
    return abs(p.alpha_minus + e2 - e1)


def resolve_drive_omega(p: DeviceParams) -> float:
    if p.drive_omega == "auto":
        return auto_drive_frequency(p)
    return float(p.drive_omega)


@dataclass
class PropagationConfig:
    """Integration step and frame choice for `propagate`."""

    frame: str = "full"
    dt: float | None = None

    def __post_init__(self):
        if self.frame not in ("full", "rotating"):
            raise InputError(f"frame must be 'full' or 'rotating', got {self.frame!r}")
        if self.dt is None:
            self.dt = DT_FULL_DEFAULT if self.frame == "full" else DT_ROTATING_DEFAULT
        if self.dt <= 0:
            raise InputError("dt must be positive")
        if self.frame == "full" and self.dt > _DT_FULL_MAX:
            raise InputError(
                f"dt = {self.dt:g} s cannot resolve the carrier; need dt <= {_DT_FULL_MAX:g} s "
                "in the full frame")


def _full_hamiltonians(p: DeviceParams, t: np.ndarray, envelope: np.ndarray,
                       drive_omega: float) -> np.ndarray:
    """Stack of interaction-picture Hamiltonians at times t (vectorised)."""
    carrier = np.cos(drive_omega * t + p.phi)
    byl = p.by_l0 + envelope * carrier
    byr = p.by_r0 + p.crosstalk * envelope * carrier
    xi = p.xi
    em = np.exp(-1j * p.alpha_minus * t)
    ep = np.exp(1j * p.alpha_plus * t)
    h = np.zeros((len(t), 4, 4), dtype=complex)
    h[:, 0, 0] = 2 * p.mean_bz1
    h[:, 1, 1] = p.delta_bz1 - p.j + p.j * xi / 2
    h[:, 2, 2] = -p.delta_bz1 - p.j - p.j * xi / 2
    h[:, 3, 3] = -2 * p.mean_bz1
    h[:, 0, 1] = -1j * (byl + xi * byr) * em
    h[:, 0, 2] = -1j * (byr - xi * byl) * ep
    h[:, 1, 3] = -1j * (byr + xi * byl) * ep
    h[:, 2, 3] = -1j * (byl - xi * byr) * em
    h[:, 1, 0] = h[:, 0, 1].conj()
    h[:, 2, 0] = h[:, 0, 2].conj()
    h[:, 3, 1] = h[:, 1, 3].conj()
    h[:, 3, 2] = h[:, 2, 3].conj()
    return h / 2.0


def _check_time(envelope, t: float) -> None:
    if not 0.0 <= t <= envelope.t_f:
        raise InputError(f"t = {t:g} s outside the pulse domain [0, {envelope.t_f:g}]")


def hamiltonian_full(p: DeviceParams, pulse, t: float,
                     drive_omega: float | None = None) -> np.ndarray:
    """Full interaction-picture Hamiltonian at time t (4x4 Hermitian)."""
    _check_time(pulse, t)
    if drive_omega is None:
        drive_omega = resolve_drive_omega(p)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    return _full_hamiltonians(p, tt, np.atleast_1d(pulse.value(tt)), drive_omega)[0]


_H0_ROT_PATTERN = (pauli_product("ZZ") - pauli_product("IZ")) / 4.0
CONTROL_ROT = pauli_product("IX") / 4.0


def rotating_h0(j: float) -> np.ndarray:
    """Drift term of the rotating-frame model, (J/4)(ZZ - IZ)."""
    return j * _H0_ROT_PATTERN


def hamiltonian_rotating(p: DeviceParams, pulse, t: float) -> np.ndarray:
    """Rotating-frame model (J/4)(ZZ - IZ) + (Omega(t)/4) IX."""
    _check_time(pulse, t)
    return rotating_h0(p.j) + float(pulse.value(t)) * CONTROL_ROT


def propagate(p: DeviceParams, pulse, cfg: PropagationConfig | None = None,
              drive_omega: float | None = None,
              t_start: float = 0.0, t_end: float | None = None) -> np.ndarray:
    """Evolution operator over [t_start, t_end] (default: the whole pulse).

    Midpoint-sampled piecewise-constant exponentials, ordered right to
    left in time; second order in the step and exactly unitary to
    rounding.
    """
    cfg = cfg or PropagationConfig()
    t_end = pulse.t_f if t_end is None else t_end
    if not 0.0 <= t_start < t_end <= pulse.t_f * (1 + 1e-12):
        raise InputError(f"bad propagation window [{t_start:g}, {t_end:g}]")
    span = t_end - t_start
    nsteps = max(1, int(np.ceil(span / cfg.dt - 1e-9)))
    dt = span / nsteps
    tmid = t_start + (np.arange(nsteps) + 0.5) * dt
    env = pulse.value(tmid)
    if cfg.frame == "full":
        if drive_omega is None:
            drive_omega = resolve_drive_omega(p)
        h = _full_hamiltonians(p, tmid, env, drive_omega)
    else:
        h = rotating_h0(p.j)[None, :, :] + env[:, None, None] * CONTROL_ROT[None, :, :]
    return ordered_product(expm_hermitian_batch(h, dt))


def driven_qubit_propagator(p: DeviceParams, pulse,
                            dt: float = DT_ROTATING_DEFAULT) -> np.ndarray:
    """Single-qubit propagator of the driven qubit's rotating-frame terms.

    Generator -(J/4) Z + (Omega(t)/4) X; conjugating the two-qubit
    rotating-frame gate by I (x) u0^dag isolates the coupling-generated
    (entangling) part that the first-order prediction approximates.
    """
    nsteps = max(1, int(np.ceil(pulse.t_f / dt - 1e-9)))
    step = pulse.t_f / nsteps
    tmid = (np.arange(nsteps) + 0.5) * step
    env = pulse.value(tmid)
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    h = (-p.j / 4) * sz[None, :, :] + (env / 4)[:, None, None] * sx[None, :, :]
    return ordered_product(expm_hermitian_batch(h, step))


def toggling_frame_gate(p: DeviceParams, pulse,
                        dt: float = DT_ROTATING_DEFAULT) -> np.ndarray:
    """Exact rotating-frame gate with the driven qubit's local part removed."""
    u_rot = propagate(p, pulse, PropagationConfig(frame="rotating", dt=dt))
    u0 = driven_qubit_propagator(p, pulse, dt)
    return np.kron(np.eye(2, dtype=complex), u0.conj().T) @ u_rot


def first_order_prediction(pulse, j: float) -> np.ndarray:
    """Weak-coupling gate exp(-i (J/4) Z (x) (R(t_f) . sigma)).

    The displacement vector comes from reconstructing the space curve the
    pulse drives at coupling j.
    """
    rvec = curve_from_pulse(pulse, j).r[-1]
    gen = (j / 4.0) * (rvec[0] * pauli_product("ZX")
                       + rvec[1] * pauli_product("ZY")
                       + rvec[2] * pauli_product("ZZ"))
    return expm_hermitian_skew(gen, 1.0)


def sweep_drive_frequency(p: DeviceParams, pulse, cfg: PropagationConfig | None = None,
                          span: float = TWO_PI * 1e6, points: int = 5,
                          restarts: int = 8, seed: int = 7,
                          target: np.ndarray | None = None):
    """Scan the carrier over [auto - span, auto + span] and dress each gate.

    Returns (best_omega, best_result, table) where table rows are
    (omega, dressed fidelity). Only meaningful for frame="full"; the
    rotating model has no carrier.
    """
    from .dressing import optimize_dressing
    from .linalg import CNOT

    cfg = cfg or PropagationConfig()
    target = CNOT if target is None else target
    center = resolve_drive_omega(p)
    omegas = center + np.linspace(-span, span, points)
    table = []
    best = None
    for om in omegas:
        u = propagate(p, pulse, cfg, drive_omega=om)
        res = optimize_dressing(u, target, restarts=restarts, seed=seed)
        table.append((float(om), res.fidelity))
        if best is None or res.fidelity > best[1].fidelity:
            best = (float(om), res, u)
    return best[0], best[1], table
