"""Reference-frame-covariant observables and projective measurements.

Fermion spin observables are built from a real 4-vector of coefficients N_I
contracted with the generators, Hermitian with respect to the momentum-indexed
inner product I_u.  The relativistic Stern-Gerlach axis is the normalised
magnetic field seen in the qubit rest frame, determined by the apparatus
orientation m, the apparatus 4-velocity v and the qubit 4-velocity u.
Photon observables act on polarisation 4-vectors through a diad frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateConfiguration, MomentumMismatch, NotOrthogonal,
                     InvalidFrame)
from .fermion_transport import (L_GEN, SIGMA_BAR, WeylQubit, inner_product,
                                inner_product_form, standard_boost_spinhalf)
from .geometry import ETA, minkowski_dot
from .photon_transport import DiadFrame, PolarisationQubit

_ID2 = np.eye(2, dtype=complex)


# ---------------------------------------------------------------------------
# Fermion spin observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinObservable:
    """Spin observable -2i u_I N_J L^{IJ} + (u.N) 1, I_u-Hermitian."""

    N: np.ndarray
    velocity: np.ndarray
    operator_matrix: np.ndarray


@dataclass(frozen=True)
class SternGerlachConfig:
    """Apparatus orientation m (unit spacelike), apparatus 4-velocity v,
    qubit 4-velocity u."""

    m: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))


def stern_gerlach_axis(cfg: SternGerlachConfig, tol: float = 1e-12) -> np.ndarray:
    """Quantisation axis n^I: the unit rest-frame magnetic field direction.

    B^I = m^I (v.u) - v^I (m.u); n = B / sqrt(-B.B).  Satisfies n.u = 0 and
    n.n = -1.  Degenerate only when B is not spacelike (unphysical input).
    """
    B = cfg.m * minkowski_dot(cfg.v, cfg.u) - cfg.v * minkowski_dot(cfg.m, cfg.u)
    b2 = -minkowski_dot(B, B)
    if b2 <= tol:
        raise DegenerateConfiguration("rest-frame field direction undefined")
    return B / np.sqrt(b2)


def make_spin_observable(n, u, ortho_tol: float = 1e-8) -> SpinObservable:
    """Observable for spin along the unit spacelike axis n orthogonal to u.

    Eigenvalues are +/-1 with spectral projectors (1 +/- operator)/2.
    """
    n = np.asarray(n, dtype=float)
    u = np.asarray(u, dtype=float)
    if abs(minkowski_dot(n, u)) > ortho_tol:
        raise NotOrthogonal("axis must satisfy n.u = 0")
    coeff = np.outer(ETA @ u, ETA @ n)
    op = -2j * np.einsum("ij,ijab->ab", coeff, L_GEN)
    return SpinObservable(n, u, op)


def spin_projectors(obs: SpinObservable):
    """Spectral projectors P+ and P- of a unit spin observable."""
    return (0.5 * (_ID2 + obs.operator_matrix),
            0.5 * (_ID2 - obs.operator_matrix))


def spin_eigenstates(obs: SpinObservable):
    """I_u-orthonormal eigenstates (plus, minus) of the observable.

    Solved in the rest frame (conjugation by the standard boost turns
    I_u-Hermiticity into ordinary Hermiticity) and boosted back.
    """
    L = standard_boost_spinhalf(obs.velocity)
    rest_op = np.linalg.solve(L, obs.operator_matrix @ L)
    w, vec = np.linalg.eigh(0.5 * (rest_op + rest_op.conj().T))
    order = np.argsort(w)[::-1]
    plus = L @ vec[:, order[0]]
    minus = L @ vec[:, order[1]]
    return plus, minus


def expectation(q: WeylQubit, obs: SpinObservable) -> float:
    """<psi| N_I sigma_bar^I |psi>: a manifestly Lorentz-invariant scalar."""
    if np.max(np.abs(q.velocity - obs.velocity)) > 1e-8:
        raise MomentumMismatch("state and observable have different velocities")
    N_low = ETA @ obs.N
    m = np.einsum("i,iab->ab", N_low, SIGMA_BAR)
    val = np.conj(q.spinor) @ m @ q.spinor
    return float(np.real(val))


def measure_spin(q: WeylQubit, cfg: SternGerlachConfig, zero_tol: float = 1e-14):
    """Projective Stern-Gerlach measurement.

    Returns (p_plus, p_minus, post_plus, post_minus).  Probabilities sum to
    one; post states are the renormalised projections.  A branch of
    probability below ``zero_tol`` returns a flagged all-zero state rather
    than an arbitrary renormalisation.
    """
    n = stern_gerlach_axis(cfg)
    obs = make_spin_observable(n, q.velocity)
    P_plus, P_minus = spin_projectors(obs)
    norm2 = np.real(inner_product(q, q))
    gram = inner_product_form(q.velocity)

    def branch(P):
        proj = P @ q.spinor
        p = float(np.real(np.conj(q.spinor) @ gram @ proj)) / norm2
        if p < zero_tol:
            return 0.0, WeylQubit(q.point, q.velocity, np.zeros(2, dtype=complex))
        amp = float(np.real(np.conj(proj) @ gram @ proj))
        return p, WeylQubit(q.point, q.velocity, proj / np.sqrt(amp))

    p_plus, post_plus = branch(P_plus)
    p_minus, post_minus = branch(P_minus)
    return p_plus, p_minus, post_plus, post_minus


# ---------------------------------------------------------------------------
# Photon polariser measurements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolariserVector:
    """Normalised polariser direction P^I with P.u = 0 for null velocity u."""

    P: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", np.asarray(self.P, dtype=complex))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))

    def gauge_shifted(self, kappa) -> "PolariserVector":
        return PolariserVector(self.P + kappa * self.velocity, self.velocity)


def polariser_probability(q: PolarisationQubit, pol: PolariserVector) -> float:
    """Transmission probability |<P|psi>|^2 = |eta_IJ conj(P)^I psi^J|^2.

    Gauge invariant under shifts of either the state or the polariser along
    the shared null velocity, and a Lorentz scalar.
    """
    uq = q.velocity / q.velocity[0]
    up = pol.velocity / pol.velocity[0]
    if np.max(np.abs(uq - up)) > 1e-8:
        raise MomentumMismatch("state and polariser have different null rays")
    overlap = -minkowski_dot(np.conj(pol.P), q.psi)
    return float(np.abs(overlap) ** 2)


def make_photon_observable(a: float, b: float, beta: complex,
                           frame: DiadFrame) -> np.ndarray:
    """General polarisation observable in the 4-vector formalism.

    o^I_J = a f_1^I f^1_J + beta f_1^I f^2_J + conj(beta) f_2^I f^1_J
            + b f_2^I f^2_J  with a, b real.

    Hermitian with respect to the eta inner product and annihilates the
    velocity direction, so it maps polarisation vectors to polarisation
    vectors.
    """
    res = float(np.max(np.abs(frame.rows @ frame.duals - np.eye(2))))
    if res > 1e-10:
        raise InvalidFrame(f"diad duality residual {res:.3e}")
    f1, f2 = frame.duals[:, 0], frame.duals[:, 1]
    r1, r2 = frame.rows[0], frame.rows[1]
    return (a * np.outer(f1, r1) + beta * np.outer(f1, r2)
            + np.conj(beta) * np.outer(f2, r1) + b * np.outer(f2, r2))
