"""Photon polarisation transport along null geodesics.

A photonic qubit is a complex polarisation 4-vector psi^I orthogonal to the
null frame velocity u^I, defined up to gauge shifts psi -> psi + upsilon u.
The two physical degrees of freedom are extracted as a Jones vector by
rotating the spatial frame so the photon moves along +z; transport of the
Jones vector is a pure rotation about the propagation axis (helicity is
preserved), with angle given by a single ordinary integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import AntipodalSingularity, MomentumMismatch, NotNull, VelocityMismatch
from .geometry import ETA, minkowski_dot
from .trajectories import Trajectory

_VEL_TOL = 1e-8


@dataclass(frozen=True)
class PolarisationQubit:
    """Photon qubit: point, null frame velocity u^I, polarisation psi^I."""

    point: np.ndarray
    velocity: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=complex))

    def gauge_residual(self) -> float:
        """|u . psi| relative to the frame energy."""
        return abs(minkowski_dot(self.velocity, self.psi)) / self.velocity[0]

    def norm(self) -> float:
        val = -minkowski_dot(np.conj(self.psi), self.psi)
        return float(np.sqrt(np.real(val)))

    def normalized(self) -> "PolarisationQubit":
        return PolarisationQubit(self.point, self.velocity, self.psi / self.norm())

    def gauge_shifted(self, upsilon: complex) -> "PolarisationQubit":
        return PolarisationQubit(self.point, self.velocity,
                                 self.psi + upsilon * self.velocity)


def check_null(u, tol=1e-9):
    u = np.asarray(u, dtype=float)
    n = minkowski_dot(u, u)
    if abs(n) > tol * max(1.0, u[0] ** 2):
        raise NotNull(f"u.u = {n:.3e}")
    return u


# ---------------------------------------------------------------------------
# Adaption rotation and Jones extraction
# ---------------------------------------------------------------------------

def adaption_rotation(u, antipodal_tol: float = 1e-9) -> np.ndarray:
    """Spatial rotation R with R u proportional to (1, 0, 0, 1).

    Rotates the frame z-axis onto the photon direction along the geodesic arc
    (axis perpendicular to both), which fixes the linear polarisation basis.
    Undefined when the photon moves along -z (antipodal point of the chart).
    """
    u = check_null(u)
    v = u[1:] / u[0]
    ct = v[2]
    if ct < -1.0 + antipodal_tol:
        raise AntipodalSingularity("photon direction opposite to frame z-axis")
    axis = np.array([v[1], -v[0], 0.0])   # direction x z_hat
    s = np.linalg.norm(axis)
    out = np.eye(4)
    if s < 1e-15:
        return out
    n = axis / s
    theta = np.arctan2(s, ct)
    K = np.array([[0.0, -n[2], n[1]],
                  [n[2], 0.0, -n[0]],
                  [-n[1], n[0], 0.0]])
    out[1:, 1:] = np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)
    return out


def extract_jones(q: PolarisationQubit) -> np.ndarray:
    """Jones vector psi^A = delta^A_I R^I_J psi^J: the two gauge-invariant
    components of the polarisation in the adapted linear basis."""
    R = adaption_rotation(q.velocity)
    rot = R @ q.psi
    return rot[1:3].copy()


def jones_to_polarisation(jones, u, point=None) -> PolarisationQubit:
    """Embed a Jones vector as a polarisation 4-vector (zero gauge part)."""
    u = check_null(u)
    R = adaption_rotation(u)
    psi_adapted = np.array([0.0, jones[0], jones[1], 0.0], dtype=complex)
    psi = R.T @ psi_adapted          # inverse of a rotation is its transpose
    return PolarisationQubit(np.zeros(4) if point is None else point, u, psi)


@dataclass(frozen=True)
class DiadFrame:
    """Pair of spacelike vectors spanning the polarisation plane of a photon.

    rows[A-1, I] = f^A_I applies to upper-index vectors; duals[I, A-1] = f^I_A
    satisfies f^A_I f^I_B = delta^A_B.  u and w are the null partners with
    u . w = 1.
    """

    rows: np.ndarray
    duals: np.ndarray
    u: np.ndarray
    w: np.ndarray

    @classmethod
    def from_velocity(cls, u) -> "DiadFrame":
        u = check_null(u)
        u_unit = u / u[0]
        R = adaption_rotation(u_unit)
        rows = R[1:3, :].copy()
        duals = np.zeros((4, 2))
        duals[1:, 0] = R[1, 1:]
        duals[1:, 1] = R[2, 1:]
        et = np.array([1.0, 0.0, 0.0, 0.0])
        w_low = et - 0.5 * (ETA @ u_unit)
        w = ETA @ w_low
        return cls(rows, duals, u_unit, w)

    def project(self, psi) -> np.ndarray:
        """4-vector -> Jones components f^A_I psi^I."""
        return self.rows @ np.asarray(psi)

    def embed(self, jones) -> np.ndarray:
        """Jones components -> 4-vector f^I_A psi^A."""
        return self.duals @ np.asarray(jones)


# ---------------------------------------------------------------------------
# Inner product and transport
# ---------------------------------------------------------------------------

def polarisation_inner_product(a: PolarisationQubit, b: PolarisationQubit) -> complex:
    """<a|b> = -eta_IJ conj(a)^I b^J; gauge invariant for shared null velocity."""
    ua = a.velocity / a.velocity[0]
    ub = b.velocity / b.velocity[0]
    if np.max(np.abs(ua - ub)) > _VEL_TOL:
        raise MomentumMismatch("photons with non-parallel velocities")
    return complex(-minkowski_dot(np.conj(a.psi), b.psi))


def _omega_along(traj: Trajectory, omega_field):
    n = len(traj)
    if omega_field is None:
        return np.zeros((n, 4, 4))
    out = np.empty((n, 4, 4))
    for i in range(n):
        om = np.asarray(omega_field(traj.x[i]))
        out[i] = np.einsum("n,nij->ij", traj.u[i], om)
    return out


def parallel_transport_polarisation(q: PolarisationQubit, traj: Trajectory,
                                    omega_field=None,
                                    reproject_every: int = 16) -> PolarisationQubit:
    """Parallel-transport a polarisation vector along a null geodesic.

    Integrates dpsi^I/dlam = -u^nu omega_nu^I_J psi^J with per-interval
    midpoint exponentials (gauge function beta = 0), periodically removing
    any numerically accrued component along the velocity so u . psi stays
    below tolerance.
    """
    if traj.kind != "null":
        raise VelocityMismatch("polarisation transport needs a null trajectory")
    if np.max(np.abs(q.velocity / q.velocity[0]
                     - traj.u_frame[0] / traj.u_frame[0, 0])) > _VEL_TOL:
        raise VelocityMismatch("qubit velocity does not match trajectory start")
    om = _omega_along(traj, omega_field)
    h = np.diff(traj.lam)
    gens = -0.5 * (om[:-1] + om[1:]) * h[:, None, None]
    steps = scipy.linalg.expm(gens)
    psi = q.psi.astype(complex)
    for i, S in enumerate(steps):
        psi = S @ psi
        if (i + 1) % reproject_every == 0:
            psi = _remove_velocity_component(psi, traj.u_frame[i + 1])
    psi = _remove_velocity_component(psi, traj.u_frame[-1])
    return PolarisationQubit(traj.x[-1], traj.u_frame[-1], psi)


def _remove_velocity_component(psi, u_frame):
    """Project out the w-part so that u . psi returns to zero exactly."""
    d = DiadFrame.from_velocity(u_frame)
    drift = minkowski_dot(d.u, psi)
    return psi - drift * d.w


def wigner_angle(traj: Trajectory, omega_field=None) -> float:
    """Accumulated polarisation rotation angle for a null geodesic.

    theta = -int u^mu (R_1^I d_mu R^2_I + R_1^I omega_{mu I}^J R^2_J) dlam,
    evaluated with the adaption rotation built from the frame velocity at
    each sample.  No time ordering is involved: the generator is a single
    rotation about the propagation axis.
    """
    if traj.kind != "null":
        raise VelocityMismatch("wigner angle needs a null trajectory")
    n = len(traj)
    om = _omega_along(traj, omega_field)
    R = np.empty((n, 4, 4))
    for i in range(n):
        R[i] = adaption_rotation(traj.u_frame[i] / traj.u_frame[i, 0])
    lam = traj.lam
    dR = np.empty_like(R)
    dR[1:-1] = (R[2:] - R[:-2]) / (lam[2:] - lam[:-2])[:, None, None]
    dR[0] = (R[1] - R[0]) / (lam[1] - lam[0])
    dR[-1] = (R[-1] - R[-2]) / (lam[-1] - lam[-2])
    term1 = np.einsum("ni,ni->n", R[:, 1, 1:], dR[:, 2, 1:])
    term2 = -np.einsum("nk,nkj,nj->n", R[:, 1, :], om, R[:, 2, :])
    integrand = term1 + term2
    return float(-np.trapz(integrand, lam))


def jones_rotation(theta: float) -> np.ndarray:
    """Rotation acting on Jones vectors: [[cos, -sin], [sin, cos]]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def polarisation_to_reals(q: PolarisationQubit) -> np.ndarray:
    """8 reals (re/im interleaved) followed by the 4-velocity."""
    flat = np.empty(8)
    flat[0::2] = q.psi.real
    flat[1::2] = q.psi.imag
    return np.concatenate([flat, q.velocity])


def polarisation_from_reals(vals, point=None) -> PolarisationQubit:
    vals = np.asarray(vals, dtype=float)
    psi = vals[0:8:2] + 1j * vals[1:8:2]
    return PolarisationQubit(np.zeros(4) if point is None else point,
                             vals[8:12], psi)
