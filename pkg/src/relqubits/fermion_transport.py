"""Transport of massive-fermion spin qubits along timelike worldlines.

The qubit state is a two-component Weyl spinor psi_A attached to a point and
a 4-velocity.  Its Hilbert space carries the velocity-dependent inner product
I_u = u_I sigma_bar^I, which makes the Fermi-Walker + magnetic-precession
evolution unitary in the generalised sense: the I_u norm at the endpoint
equals the I_u norm at the start.

Index conventions: spinors are column vectors (psi_1, psi_2); operators are
plain 2x2 complex matrices acting from the left; sigma^I = (1, sigma_i) and
sigma_bar^I = (1, -sigma_i); the left-handed generators are

    L^{IJ} = (i/4) (sigma^I sigma_bar^J - sigma^J sigma_bar^I)

which gives L^{0j} = -(i/2) sigma^j and L^{ij} = (1/2) eps^{ij}_k sigma^k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial.transform import Rotation as _Rotation

from .errors import (MomentumMismatch, NonOrthogonalAcceleration, NotTimelike,
                     VelocityMismatch)
from .geometry import ETA, boost_lorentz, lorentz_inverse
from .trajectories import EMFieldTensor, Trajectory

# Pauli matrices and the sigma / sigma-bar 4-blocks
_ID = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI = np.stack([_ID, _SX, _SY, _SZ])
SIGMA = PAULI.copy()                                   # sigma^I
SIGMA_BAR = np.stack([_ID, -_SX, -_SY, -_SZ])          # sigma_bar^I

# Left-handed sl(2,C) generators, indexed L_GEN[I, J] -> 2x2
L_GEN = (1j / 4.0) * (np.einsum("iab,jbc->ijac", SIGMA, SIGMA_BAR)
                      - np.einsum("jab,ibc->ijac", SIGMA, SIGMA_BAR))

_VEL_TOL = 1e-8


@dataclass(frozen=True)
class WeylQubit:
    """Localised fermion qubit: point, frame 4-velocity u^I, Weyl spinor."""

    point: np.ndarray
    velocity: np.ndarray
    spinor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        object.__setattr__(self, "spinor", np.asarray(self.spinor, dtype=complex))

    def norm(self) -> float:
        return float(np.sqrt(np.real(inner_product(self, self))))

    def normalized(self) -> "WeylQubit":
        return WeylQubit(self.point, self.velocity, self.spinor / self.norm())


@dataclass(frozen=True)
class TransportOperator:
    """Accumulated 2x2 map between the Hilbert spaces at the trajectory ends."""

    matrix: np.ndarray
    domain_velocity: np.ndarray
    codomain_velocity: np.ndarray

    def apply(self, q: WeylQubit, point=None) -> WeylQubit:
        if np.max(np.abs(q.velocity - self.domain_velocity)) > _VEL_TOL:
            raise VelocityMismatch("state velocity differs from operator domain")
        return WeylQubit(q.point if point is None else point,
                         self.codomain_velocity, self.matrix @ q.spinor)

    def compose(self, first: "TransportOperator") -> "TransportOperator":
        """self after first."""
        if np.max(np.abs(first.codomain_velocity - self.domain_velocity)) > _VEL_TOL:
            raise VelocityMismatch("operators are not composable")
        return TransportOperator(self.matrix @ first.matrix,
                                 first.domain_velocity, self.codomain_velocity)


# ---------------------------------------------------------------------------
# Inner product
# ---------------------------------------------------------------------------

def check_timelike(u, tol=1e-8):
    u = np.asarray(u, dtype=float)
    n = u[0] ** 2 - u[1:] @ u[1:]
    if abs(n - 1.0) > tol or u[0] <= 0.0:
        raise NotTimelike(f"u.u = {n:.12g}, u0 = {u[0]:.12g}")
    return u


def inner_product_form(u) -> np.ndarray:
    """I_u = u_I sigma_bar^I = u^0 + u^i sigma_i; Hermitian positive for
    future timelike u, with eigenvalues u^0 (1 +/- v)."""
    u = np.asarray(u, dtype=float)
    return u[0] * _ID + u[1] * _SX + u[2] * _SY + u[3] * _SZ


def inner_product(a: WeylQubit, b: WeylQubit) -> complex:
    """Momentum-indexed inner product <a|b> = I_u^{A'A} conj(a)_{A'} b_A.

    Both states must share the same 4-velocity; states of different momenta
    live in different Hilbert spaces and cannot be compared.
    """
    if np.max(np.abs(a.velocity - b.velocity)) > _VEL_TOL:
        raise MomentumMismatch("states have different 4-velocities")
    return complex(np.conj(a.spinor) @ inner_product_form(a.velocity) @ b.spinor)


# ---------------------------------------------------------------------------
# Standard boosts and Weyl <-> Wigner maps
# ---------------------------------------------------------------------------

def standard_boost_spinhalf(u) -> np.ndarray:
    """Left-handed standard boost L(u) = (1 + u^0 - u.sigma) / sqrt(2(u0+1)).

    The positive SL(2,C) matrix taking rest-frame spinors to velocity u:
    conj(L) I_u L = delta, equivalently L^2 = I_u^{-1}, so the delta-norm of
    L^{-1} psi equals the I_u norm of psi.
    """
    u = check_timelike(u)
    m = (1.0 + u[0]) * _ID - (u[1] * _SX + u[2] * _SY + u[3] * _SZ)
    return m / np.sqrt(2.0 * (u[0] + 1.0))


def spin1_boost(u) -> np.ndarray:
    """Standard vector boost with Lambda(u)^I_0 = u^I."""
    check_timelike(u)
    return boost_lorentz(u)


def weyl_to_wigner(q: WeylQubit) -> np.ndarray:
    """Rest-frame (Wigner) spinor psi~ = L(u)^{-1} psi; unit delta-norm."""
    L = standard_boost_spinhalf(q.velocity)
    return np.linalg.solve(L, q.spinor)


def wigner_to_weyl(psi_tilde, u, point=None) -> WeylQubit:
    L = standard_boost_spinhalf(u)
    return WeylQubit(np.zeros(4) if point is None else point, u,
                     L @ np.asarray(psi_tilde, dtype=complex))


def spin_half_lift(lam: np.ndarray) -> np.ndarray:
    """Left-handed SL(2,C) image A of a proper orthochronous Lorentz matrix.

    Satisfies A^dag I_{Lambda u} A = I_u for every timelike u, so mapping
    psi -> A psi while boosting all velocities by Lambda preserves every
    inner product, and Bloch 4-vectors transform with Lambda.  Built by
    polar decomposition Lambda = boost(Lambda e_0) . rotation.
    """
    lam = np.asarray(lam, dtype=float)
    u = lam[:, 0]
    B = boost_lorentz(u)
    R = lorentz_inverse(B) @ lam
    R3 = R[1:, 1:]
    rotvec = _Rotation.from_matrix(R3).as_rotvec()
    angle = np.linalg.norm(rotvec)
    if angle < 1e-300:
        A_rot = _ID.copy()
    else:
        n = rotvec / angle
        nsig = n[0] * _SX + n[1] * _SY + n[2] * _SZ
        A_rot = np.cos(angle / 2.0) * _ID - 1j * np.sin(angle / 2.0) * nsig
    return standard_boost_spinhalf(u) @ A_rot


def wigner_rotation(lam: np.ndarray, p) -> np.ndarray:
    """W(Lambda, p) = L^{-1}(Lambda p) Lambda_{1/2} L(p), unitary under delta."""
    p = check_timelike(p)
    lam = np.asarray(lam, dtype=float)
    p_out = lam @ p
    A = spin_half_lift(lam)
    L_out = standard_boost_spinhalf(p_out)
    return np.linalg.solve(L_out, A @ standard_boost_spinhalf(p))


def bloch_vector(q: WeylQubit) -> np.ndarray:
    """Null Bloch 4-vector b^I = sigma_bar^{I A'A} conj(psi)_{A'} psi_A.

    Null and future-directed, and transforms covariantly: boosting the
    spinor with spin_half_lift(Lambda) maps b to Lambda b.  For left-handed
    spinors the spatial flag is opposite to the measurement arrow: (1,0),
    whose spin expectation along +z is +1, has b = (1, 0, 0, -1); the
    Minkowski contraction n_I b^I restores the expectation value.
    """
    psi = q.spinor
    return np.real(np.einsum("a,iab,b->i", np.conj(psi), SIGMA_BAR, psi))


# ---------------------------------------------------------------------------
# Generators and single steps
# ---------------------------------------------------------------------------

def rest_frame_magnetic(F, u) -> np.ndarray:
    """B_{IJ} = h_I^K h_J^L F_{KL} with h = delta - u (x) u_lowered."""
    F = np.asarray(F, dtype=float)
    u = np.asarray(u, dtype=float)
    u_low = ETA @ u
    h = np.eye(4) - np.outer(u, u_low)      # h^I_J
    # h_I^K = delta_I^K - u_I u^K  is the transpose arrangement
    h_mixed = np.eye(4) - np.outer(u_low, u)
    return np.einsum("ik,jl,kl->ij", h_mixed, h_mixed, F)


def weyl_generator(u_frame, a_frame, omega_along=None, b_rest=None,
                   charge_to_mass=0.0) -> np.ndarray:
    """2x2 generator M with dpsi/dtau = M psi for the covariant transport.

    coeff_{IJ} = (1/2) u^mu omega_{mu I J} + u_I a_J - (e/2m) B_{IJ};
    M = i coeff_{IJ} L^{IJ}.  ``omega_along`` is u^nu omega_nu^I_J (mixed
    indices) already contracted along the worldline.
    """
    u = np.asarray(u_frame, dtype=float)
    a = np.asarray(a_frame, dtype=float)
    u_low = ETA @ u
    a_low = ETA @ a
    coeff = np.outer(u_low, a_low)
    if omega_along is not None:
        coeff = coeff + 0.5 * (ETA @ np.asarray(omega_along))
    if b_rest is not None and charge_to_mass != 0.0:
        coeff = coeff - 0.5 * charge_to_mass * np.asarray(b_rest)
    return 1j * np.einsum("ij,ijab->ab", coeff, L_GEN)


def wigner_generator(u_frame, a_frame, omega_along=None,
                     omega_lowered=None, u_coord=None) -> np.ndarray:
    """Generator of the rest-frame (Wigner) transport; spans only L^{ij}.

    H_{ij} = u_i (du_j/dtau) / (u0+1)
             + u^mu [ (1/2) omega_{mu i j} + omega_{mu 0 j} u_i
                      + omega_{mu i l} u^l u_j / (u0+1) ]

    ``omega_lowered`` is u^mu omega_{mu I J} with both frame indices lowered;
    the kinematic du/dtau is reconstructed from a and the connection.
    """
    u = np.asarray(u_frame, dtype=float)
    a = np.asarray(a_frame, dtype=float)
    u_low = ETA @ u
    if omega_along is None:
        om_mixed = np.zeros((4, 4))
        om_low = np.zeros((4, 4))
    else:
        om_mixed = np.asarray(omega_along, dtype=float)
        om_low = omega_lowered if omega_lowered is not None else ETA @ om_mixed
    # du^I/dtau = a^I - u^mu omega_mu^I_J u^J, then lower
    dudtau = a - om_mixed @ u
    du_low = ETA @ dudtau
    g = u[0] + 1.0
    H = np.zeros((4, 4))
    ui = u_low[1:]
    H3 = (np.outer(ui, du_low[1:]) / g
          + 0.5 * om_low[1:, 1:]
          + np.outer(ui, om_low[0, 1:])
          + np.outer(om_low[1:, 1:] @ u[1:], u_low[1:]) / g)
    H[1:, 1:] = H3
    return 1j * np.einsum("ij,ijab->ab", H, L_GEN)


def _expm_traceless(M: np.ndarray) -> np.ndarray:
    """Closed-form exponential of a traceless 2x2 complex matrix."""
    mu2 = M[0, 0] * M[0, 0] + M[0, 1] * M[1, 0]
    mu = np.sqrt(mu2.astype(complex) if isinstance(mu2, np.ndarray) else complex(mu2))
    if abs(mu) < 1e-6:
        c = 1.0 + mu2 / 2.0 + mu2 * mu2 / 24.0
        s = 1.0 + mu2 / 6.0 + mu2 * mu2 / 120.0
    else:
        c = np.cosh(mu)
        s = np.sinh(mu) / mu
    return c * _ID + s * M


def _expm_traceless_batch(Ms: np.ndarray) -> np.ndarray:
    """Vectorised closed-form exponential for a (n,2,2) traceless batch."""
    mu2 = Ms[:, 0, 0] ** 2 + Ms[:, 0, 1] * Ms[:, 1, 0]
    mu = np.sqrt(mu2.astype(complex))
    small = np.abs(mu) < 1e-6
    c = np.where(small, 1.0 + mu2 / 2.0 + mu2 ** 2 / 24.0, np.cosh(mu))
    s = np.where(small, 1.0 + mu2 / 6.0 + mu2 ** 2 / 120.0,
                 np.sinh(np.where(small, 1.0, mu)) / np.where(small, 1.0, mu))
    out = s[:, None, None] * Ms
    out[:, 0, 0] += c
    out[:, 1, 1] += c
    return out


def fermi_walker_step(q: WeylQubit, omega_along, accel, b_rest=None,
                      charge_to_mass: float = 0.0, dtau: float = 0.0,
                      ortho_tol: float = 1e-8) -> WeylQubit:
    """Advance a qubit by one proper-time step of the transport equation.

    ``omega_along`` is u^nu omega_nu^I_J at the point (None in a flat,
    Cartesian frame); ``accel`` the frame components of the proper
    acceleration, which must be orthogonal to the velocity.
    """
    u = q.velocity
    a = np.asarray(accel, dtype=float)
    ua = u[0] * a[0] - u[1:] @ a[1:]
    if abs(ua) > ortho_tol * (1.0 + np.linalg.norm(a)):
        raise NonOrthogonalAcceleration(f"u.a = {ua:.3e}")
    om = None if omega_along is None else np.asarray(omega_along, dtype=float)
    # midpoint velocity for a second-order step
    dudtau = a - (om @ u if om is not None else 0.0)
    u_mid = u + 0.5 * dtau * dudtau
    M = weyl_generator(u_mid, a, om, b_rest, charge_to_mass)
    psi = _expm_traceless(dtau * M) @ q.spinor
    u_new = u + dtau * dudtau
    return WeylQubit(q.point, u_new, psi)


# ---------------------------------------------------------------------------
# Finite transport along trajectories
# ---------------------------------------------------------------------------

def _omega_samples(traj: Trajectory, omega_field):
    """Per-sample u^nu omega_nu^I_J (mixed) and its lowered form."""
    n = len(traj)
    if omega_field is None:
        return None, None
    om_mixed = np.empty((n, 4, 4))
    for i in range(n):
        om = np.asarray(omega_field(traj.x[i]))
        om_mixed[i] = np.einsum("n,nij->ij", traj.u[i], om)
    om_low = np.einsum("ik,nkj->nij", ETA, om_mixed)
    return om_mixed, om_low


def _b_rest_samples(traj: Trajectory, em_field: Optional[EMFieldTensor]):
    if em_field is None:
        return None
    n = len(traj)
    out = np.empty((n, 4, 4))
    for i in range(n):
        out[i] = rest_frame_magnetic(em_field.at(traj.x[i]), traj.u_frame[i])
    return out


def _ordered_product(steps: np.ndarray) -> np.ndarray:
    T = _ID.copy()
    for S in steps:
        T = S @ T
    return T


def transport(q: WeylQubit, traj: Trajectory, omega_field=None,
              em_field: Optional[EMFieldTensor] = None,
              charge: float = 0.0, mass: float = 1.0):
    """Transport a qubit along a sampled worldline.

    Composes per-interval midpoint exponentials of the covariant generator
    (connection + Fermi-Walker + magnetic precession) over all samples and
    returns the final qubit together with the accumulated TransportOperator.
    """
    if np.max(np.abs(q.velocity - traj.u_frame[0])) > _VEL_TOL:
        raise VelocityMismatch("qubit velocity does not match trajectory start")
    T = weyl_transport_operator(traj, omega_field, em_field, charge, mass)
    out = WeylQubit(traj.x[-1], traj.u_frame[-1], T.matrix @ q.spinor)
    return out, T


def weyl_transport_operator(traj: Trajectory, omega_field=None,
                            em_field: Optional[EMFieldTensor] = None,
                            charge: float = 0.0, mass: float = 1.0
                            ) -> TransportOperator:
    """Accumulated covariant (Weyl-spinor) transport operator for a worldline."""
    n = len(traj)
    om_mixed, _ = _omega_samples(traj, omega_field)
    b_rest = _b_rest_samples(traj, em_field)
    e_over_m = charge / mass
    gens = np.empty((n, 2, 2), dtype=complex)
    for i in range(n):
        gens[i] = weyl_generator(traj.u_frame[i], traj.a_frame[i],
                                 None if om_mixed is None else om_mixed[i],
                                 None if b_rest is None else b_rest[i],
                                 e_over_m)
    h = np.diff(traj.lam)
    mid = 0.5 * (gens[:-1] + gens[1:]) * h[:, None, None]
    steps = _expm_traceless_batch(mid)
    return TransportOperator(_ordered_product(steps),
                             traj.u_frame[0].copy(), traj.u_frame[-1].copy())


def wigner_transport_operator(traj: Trajectory, omega_field=None) -> np.ndarray:
    """Rest-frame transport operator; unitary under the standard inner product.

    Integrates the pure-rotation rest-frame equation (Thomas term plus the
    three connection terms).  Numerically equals
    L(u_end)^{-1} T_Weyl L(u_start) for the same worldline.
    """
    n = len(traj)
    om_mixed, om_low = _omega_samples(traj, omega_field)
    gens = np.empty((n, 2, 2), dtype=complex)
    for i in range(n):
        gens[i] = wigner_generator(traj.u_frame[i], traj.a_frame[i],
                                   None if om_mixed is None else om_mixed[i],
                                   None if om_low is None else om_low[i])
    h = np.diff(traj.lam)
    mid = 0.5 * (gens[:-1] + gens[1:]) * h[:, None, None]
    steps = _expm_traceless_batch(mid)
    return _ordered_product(steps)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def spinor_to_reals(q: WeylQubit) -> np.ndarray:
    """(re psi1, im psi1, re psi2, im psi2) followed by the 4-velocity."""
    s = q.spinor
    return np.concatenate([[s[0].real, s[0].imag, s[1].real, s[1].imag],
                           q.velocity])


def spinor_from_reals(vals, point=None) -> WeylQubit:
    vals = np.asarray(vals, dtype=float)
    spinor = np.array([vals[0] + 1j * vals[1], vals[2] + 1j * vals[3]])
    return WeylQubit(np.zeros(4) if point is None else point, vals[4:8], spinor)


def operator_to_reals(T: TransportOperator) -> np.ndarray:
    m = T.matrix.reshape(-1)
    return np.concatenate([m.real, m.imag])


def operator_from_reals(vals, domain_velocity, codomain_velocity) -> TransportOperator:
    vals = np.asarray(vals, dtype=float)
    m = (vals[:4] + 1j * vals[4:8]).reshape(2, 2)
    return TransportOperator(m, np.asarray(domain_velocity, dtype=float),
                             np.asarray(codomain_velocity, dtype=float))
