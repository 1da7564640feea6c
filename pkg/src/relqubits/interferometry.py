"""Gravitationally induced phases for spacetime Mach-Zehnder interferometry.

The measurable phase difference between two arms splits into three pieces:
the internal phases accumulated along each arm (the proper-time integral of
the wavevector), a displacement phase from the wavepacket offset at
recombination, and the transport phase carried by the spin or polarisation
state itself.  The module also evaluates the gravitational neutron
interferometry phase shift exactly in the uniformly accelerated metric and
through its standard hierarchy of approximations, in configurable-precision
arithmetic (the interesting differences sit 25 orders of magnitude below the
phase itself).

This is the only module that works in SI units; everything else in the
package uses natural units.  hbar is derived from the exact SI Planck
constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from .errors import (ImaginaryVelocity, MissingWavevector, MomentumMismatch,
                     NegativeRadicand, OrthogonalStates, WavevectorMismatch)
from .fermion_transport import WeylQubit, inner_product
from .photon_transport import PolarisationQubit, polarisation_inner_product
from .trajectories import Trajectory

_trapz = getattr(np, "trapezoid", None) or np.trapz

C_LIGHT = 299_792_458.0            # m/s, exact
PLANCK_H = 6.626_070_15e-34        # J s, exact


# ---------------------------------------------------------------------------
# Arms and the three phase contributions (natural units)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterferometerArm:
    """One arm of a Mach-Zehnder interferometer.

    ``wavevector`` holds the coordinate covector k_mu at each trajectory
    sample; ``potential`` optionally holds eA_mu samples.  For a fermion arm
    k_mu = m g_{mu nu} u^nu, so k.k = m^2; photon arms have k.k = 0.
    """

    trajectory: Trajectory
    wavevector: Optional[np.ndarray] = None
    potential: Optional[np.ndarray] = None
    transported_state: object = None
    species: str = "fermion"


def fermion_arm(traj: Trajectory, mass: float, em_potential=None,
                state=None) -> InterferometerArm:
    """Build an arm with k_mu = m u_mu sampled along a timelike trajectory."""
    n = len(traj)
    k = np.empty((n, 4))
    for i in range(n):
        g = traj.metric.matrix(traj.x[i])
        k[i] = mass * g @ traj.u[i]
    pot = None
    if em_potential is not None:
        pot = np.stack([np.asarray(em_potential(traj.x[i])) for i in range(n)])
    return InterferometerArm(traj, k, pot, state, "fermion")


def photon_arm(traj: Trajectory, state=None) -> InterferometerArm:
    n = len(traj)
    k = np.empty((n, 4))
    for i in range(n):
        g = traj.metric.matrix(traj.x[i])
        k[i] = g @ traj.u[i]
    return InterferometerArm(traj, k, None, state, "photon")


def internal_phase(arm: InterferometerArm, charge: float = 0.0) -> float:
    """theta_int = int (k_mu + e A_mu) dx^mu along the arm.

    Equals m tau in natural units for an uncharged fermion; identically zero
    for photons (the wavevector is null and tangent to the ray).
    """
    if arm.species == "photon":
        return 0.0
    if arm.wavevector is None:
        raise MissingWavevector("arm carries no wavevector samples")
    k = arm.wavevector
    if charge != 0.0:
        if arm.potential is None:
            raise MissingWavevector("charged arm needs potential samples")
        k = k + charge * arm.potential
    integrand = np.einsum("ni,ni->n", k, arm.trajectory.u)
    return float(_trapz(integrand, arm.trajectory.lam))


def displacement_phase(k, x1, x2, A=None, charge: float = 0.0,
                       k_other=None, tol: float = 1e-9) -> float:
    """(k_mu + e A_mu)(x1 - x2)^mu: the wavepacket-offset phase.

    Adding two states coherently requires equal wavevectors at recombination;
    pass ``k_other`` to have that checked.
    """
    k = np.asarray(k, dtype=float)
    if k_other is not None:
        scale = max(1.0, float(np.max(np.abs(k))))
        if np.max(np.abs(k - np.asarray(k_other))) > tol * scale:
            raise WavevectorMismatch("arms arrive with different wavevectors")
    dx = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    if A is not None and charge != 0.0:
        k = k + charge * np.asarray(A)
    return float(k @ dx)


def _state_inner(s1, s2):
    if isinstance(s1, WeylQubit) and isinstance(s2, WeylQubit):
        return inner_product(s1, s2)
    if isinstance(s1, PolarisationQubit) and isinstance(s2, PolarisationQubit):
        return polarisation_inner_product(s1, s2)
    raise MomentumMismatch("states live in different kinds of Hilbert space")


def transport_phase(s1, s2, tol: float = 1e-12) -> float:
    """arg <s1|s2>: the extra phase between differently transported states."""
    ov = _state_inner(s1, s2)
    if abs(ov) < tol:
        raise OrthogonalStates("transport phase undefined for orthogonal states")
    return float(np.angle(ov))


def recombine(a: complex, s1, b: complex, s2, delta_theta: float):
    """a psi1 + b e^{i dtheta} psi2 in the shared recombination Hilbert space."""
    _state_inner(s1, s2)   # validates momentum match
    phase = np.exp(1j * delta_theta)
    if isinstance(s1, WeylQubit):
        return WeylQubit(s1.point, s1.velocity,
                         a * s1.spinor + b * phase * s2.spinor)
    return PolarisationQubit(s1.point, s1.velocity,
                             a * s1.psi + b * phase * s2.psi)


def total_phase_difference(arm1: InterferometerArm, arm2: InterferometerArm,
                           charge: float = 0.0) -> float:
    """Delta theta = (theta2_int - theta1_int) + displacement phase.

    Endpoints are the final samples of each arm; the result is independent of
    shifting those endpoints along their trajectories.
    """
    th1 = internal_phase(arm1, charge)
    th2 = internal_phase(arm2, charge)
    A1 = arm1.potential[-1] if arm1.potential is not None else None
    disp = displacement_phase(arm1.wavevector[-1], arm1.trajectory.x[-1],
                              arm2.trajectory.x[-1], A1, charge,
                              k_other=arm2.wavevector[-1])
    return (th2 - th1) + disp


# ---------------------------------------------------------------------------
# Neutron interferometry (COW) in SI units, configurable precision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class COWConfig:
    """Inputs for the gravitational neutron-interferometry phase.

    mass [kg], beam speed on the lower path speed_v1 [m/s], path height
    difference delta_z [m], horizontal leg length ell [m], g [m/s^2].
    """

    mass: float = 1.67e-27
    speed_v1: float = 2794.0
    delta_z: float = 0.0316
    ell: float = 0.0316
    g: float = 9.81
    precision_digits: int = 50

    def __post_init__(self):
        for name in ("mass", "speed_v1", "delta_z", "ell", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.speed_v1 >= C_LIGHT:
            raise ValueError("speed_v1 must be below c")


def _params(cfg: COWConfig):
    """Config values and constants at the ambient working precision."""
    c = mpmath.mpf(C_LIGHT)
    hbar = mpmath.mpf(PLANCK_H) / (2 * mpmath.pi)
    return {
        "m": mpmath.mpf(cfg.mass), "v1": mpmath.mpf(cfg.speed_v1),
        "dz": mpmath.mpf(cfg.delta_z), "ell": mpmath.mpf(cfg.ell),
        "g": mpmath.mpf(cfg.g), "c": c, "hbar": hbar,
    }


def cow_exact(cfg: COWConfig):
    """Exact phase difference in the uniformly accelerated metric.

    dtheta = (m ell gamma1 / hbar) (v1 - v2 / g00) with
    g00 = (1 + dz g / c^2)^2 and v2 = c sqrt(g00 (1 - g00 / gamma1^2)).
    """
    with mpmath.workdps(max(cfg.precision_digits, 15)):
        p = _params(cfg)
        g00 = (1 + p["dz"] * p["g"] / p["c"] ** 2) ** 2
        gamma1 = 1 / mpmath.sqrt(1 - (p["v1"] / p["c"]) ** 2)
        radicand = g00 * (1 - g00 / gamma1 ** 2)
        if radicand < 0:
            raise ImaginaryVelocity("particle cannot reach the upper path")
        v2 = p["c"] * mpmath.sqrt(radicand)
        return p["m"] * p["ell"] * gamma1 / p["hbar"] * (p["v1"] - v2 / g00)


def cow_weak_field(cfg: COWConfig):
    """First order in dz g / c^2: (m ell v1 gamma1/hbar)(1 - sqrt(1 - 2 dz g/v1^2))."""
    with mpmath.workdps(max(cfg.precision_digits, 15)):
        p = _params(cfg)
        gamma1 = 1 / mpmath.sqrt(1 - (p["v1"] / p["c"]) ** 2)
        radicand = 1 - 2 * p["dz"] * p["g"] / p["v1"] ** 2
        if radicand < 0:
            raise NegativeRadicand("requires 2 dz g <= v1^2")
        return (p["m"] * p["ell"] * p["v1"] * gamma1 / p["hbar"]
                * (1 - mpmath.sqrt(radicand)))


def cow_small_delta_v(cfg: COWConfig):
    """Weak field, first order in dz g / v1^2: gamma1 m dz ell g / (hbar v1)."""
    with mpmath.workdps(max(cfg.precision_digits, 15)):
        p = _params(cfg)
        gamma1 = 1 / mpmath.sqrt(1 - (p["v1"] / p["c"]) ** 2)
        return (gamma1 * p["m"] * p["dz"] * p["ell"] * p["g"]
                / (p["hbar"] * p["v1"]))


def cow_nonrelativistic(cfg: COWConfig):
    """Weak field and gamma1 -> 1: (m ell v1/hbar)(1 - sqrt(1 - 2 dz g/v1^2))."""
    with mpmath.workdps(max(cfg.precision_digits, 15)):
        p = _params(cfg)
        radicand = 1 - 2 * p["dz"] * p["g"] / p["v1"] ** 2
        if radicand < 0:
            raise NegativeRadicand("requires 2 dz g <= v1^2")
        return (p["m"] * p["ell"] * p["v1"] / p["hbar"]
                * (1 - mpmath.sqrt(radicand)))


def cow_g2_correction(cfg: COWConfig):
    """Two-order expansion (m ell/hbar)(dz g/v1 + dz^2 g^2 / (4 v1^3))."""
    with mpmath.workdps(max(cfg.precision_digits, 15)):
        p = _params(cfg)
        return (p["m"] * p["ell"] / p["hbar"]
                * (p["dz"] * p["g"] / p["v1"]
                   + p["dz"] ** 2 * p["g"] ** 2 / (4 * p["v1"] ** 3)))


def cow_standard(cfg: COWConfig):
    """Leading-order prediction m dz ell g / (hbar v1)."""
    with mpmath.workdps(max(cfg.precision_digits, 15)):
        p = _params(cfg)
        return p["m"] * p["dz"] * p["ell"] * p["g"] / (p["hbar"] * p["v1"])


COW_ROWS = (
    ("exact", cow_exact),
    ("weak_field", cow_weak_field),
    ("small_delta_v", cow_small_delta_v),
    ("nonrelativistic", cow_nonrelativistic),
    ("g2_correction", cow_g2_correction),
    ("cow_standard", cow_standard),
)


def cow_table(cfg: COWConfig):
    """All six approximation rows with differences from the leading-order and
    exact results, computed at the configured precision.

    Returns a list of (label, delta_theta, diff_from_cow, diff_from_exact)
    with mpmath values.
    """
    if cfg.precision_digits < 40:
        raise ValueError("cow_table needs precision_digits >= 40")
    with mpmath.workdps(cfg.precision_digits):
        values = {label: fn(cfg) for label, fn in COW_ROWS}
        base_cow = values["cow_standard"]
        base_exact = values["exact"]
        return [(label, values[label], values[label] - base_cow,
                 values[label] - base_exact) for label, _ in COW_ROWS]


def format_cow_table_csv(rows, significant_digits: int = 30) -> str:
    """CSV text with header, values printed to the given significant digits."""
    lines = ["label,delta_theta_rad,diff_from_cow,diff_from_exact"]
    for label, v, dc, de in rows:
        vals = [mpmath.nstr(x, significant_digits, strip_zeros=False)
                for x in (v, dc, de)]
        lines.append(",".join([label] + vals))
    return "\n".join(lines) + "\n"
