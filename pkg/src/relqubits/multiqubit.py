"""Multipartite localised-qubit states and curved-spacetime teleportation.

Subsystems travel on independent worldlines with independent parameters, so
a bipartite state is a two-index coefficient array whose slots refer to
Hilbert spaces with their own points and momenta.  Local evolution acts on
one slot at a time (the two orderings commute: there is no preferred
foliation) and measurement update on one subsystem commutes with local
unitaries on the other.

The teleportation protocol transports an orthonormal basis pair along each
of the three worldlines; the shared maximally entangled pair defines the
common spinor basis through which Alice's Bell outcome tells Bob which
correction to apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (MomentumMismatch, NonCanonicalEntanglement,
                     SubsystemOutOfRange, ZeroProbabilityBranch)
from .fermion_transport import (TransportOperator, WeylQubit,
                                inner_product_form, standard_boost_spinhalf,
                                weyl_transport_operator, _expm_traceless)
from .geometry import ETA

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)

_VEL_TOL = 1e-8


@dataclass(frozen=True)
class SubsystemMeta:
    """Where one subsystem lives: point, frame 4-velocity, species."""

    point: np.ndarray
    velocity: np.ndarray
    species: str = "fermion"

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))

    def gram(self) -> np.ndarray:
        if self.species == "fermion":
            return inner_product_form(self.velocity)
        return -ETA.astype(complex)


@dataclass(frozen=True)
class BipartiteState:
    """Two-qubit state: coefficients[a, b] over the component bases of the
    two subsystem Hilbert spaces (2x2 fermion-fermion, 4x4 with photons)."""

    coefficients: np.ndarray
    meta: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients",
                           np.asarray(self.coefficients, dtype=complex))

    @property
    def flagged_zero(self) -> bool:
        return bool(np.all(self.coefficients == 0))

    def norm(self) -> float:
        return float(np.sqrt(np.real(bipartite_inner_product(self, self))))

    def normalized(self) -> "BipartiteState":
        return BipartiteState(self.coefficients / self.norm(), self.meta)


def bipartite_inner_product(s: BipartiteState, t: BipartiteState) -> complex:
    """<s|t> contracted with the product inner product of the two slots."""
    for ms, mt in zip(s.meta, t.meta):
        if np.max(np.abs(ms.velocity - mt.velocity)) > _VEL_TOL:
            raise MomentumMismatch("subsystem momenta differ")
    g1 = s.meta[0].gram()
    g2 = s.meta[1].gram()
    return complex(np.einsum("ab,ac,bd,cd->", np.conj(s.coefficients),
                             g1, g2, t.coefficients))


def product_state(q1, q2) -> BipartiteState:
    """Tensor product of two single-particle states (WeylQubits)."""
    return BipartiteState(np.outer(q1.spinor, q2.spinor),
                          (SubsystemMeta(q1.point, q1.velocity),
                           SubsystemMeta(q2.point, q2.velocity)))


def symmetrise(s: BipartiteState, sign: int = +1) -> BipartiteState:
    """(Anti)symmetrised combination for identical particles; sign = -1 for
    fermionic exchange statistics."""
    c = s.coefficients
    return BipartiteState((c + sign * c.T) / np.sqrt(2.0), s.meta)


def evolve_local(s: BipartiteState, which: int, op=None, generator=None,
                 dlam: float = 0.0, new_meta: Optional[SubsystemMeta] = None
                 ) -> BipartiteState:
    """Apply a one-subsystem map: a TransportOperator or explicit matrix, or
    the exponential of i * generator * dlam for a Hermitian generator."""
    if which not in (0, 1):
        raise SubsystemOutOfRange(f"subsystem {which} of 2")
    if op is not None:
        if isinstance(op, TransportOperator):
            m_old = s.meta[which]
            if np.max(np.abs(m_old.velocity - op.domain_velocity)) > _VEL_TOL:
                raise MomentumMismatch("operator domain velocity mismatch")
            mat = op.matrix
            if new_meta is None:
                new_meta = SubsystemMeta(m_old.point, op.codomain_velocity,
                                         m_old.species)
        else:
            mat = np.asarray(op, dtype=complex)
    else:
        gen = np.asarray(generator, dtype=complex)
        mat = _expm_traceless(1j * dlam * (gen - 0.5 * np.trace(gen) * np.eye(2)))
        mat = mat * np.exp(0.5j * dlam * np.trace(gen))
    c = np.einsum("ax,xb->ab", mat, s.coefficients) if which == 0 \
        else np.einsum("bx,ax->ab", mat, s.coefficients)
    meta = list(s.meta)
    if new_meta is not None:
        meta[which] = new_meta
    return BipartiteState(c, tuple(meta))


def update_on_outcome(s: BipartiteState, which: int, projector,
                      zero_tol: float = 1e-14):
    """Project one subsystem, returning (probability, renormalised state).

    The update commutes with any later local unitary on the other subsystem.
    A zero-probability branch returns a flagged all-zero state.
    """
    if which not in (0, 1):
        raise SubsystemOutOfRange(f"subsystem {which} of 2")
    P = np.asarray(projector, dtype=complex)
    proj = evolve_local(s, which, op=P)
    p = np.real(bipartite_inner_product(s, proj)) / \
        np.real(bipartite_inner_product(s, s))
    p = float(p)
    if p < zero_tol:
        return 0.0, BipartiteState(np.zeros_like(s.coefficients), s.meta)
    return p, BipartiteState(proj.coefficients / np.sqrt(
        np.real(bipartite_inner_product(proj, proj))), s.meta)


def reduced_rest_frame_density(s: BipartiteState, keep: int) -> np.ndarray:
    """Reduced density matrix of one fermion subsystem in its rest-frame
    (orthonormal) basis, suitable for entropy computations."""
    L0 = standard_boost_spinhalf(s.meta[0].velocity)
    L1 = standard_boost_spinhalf(s.meta[1].velocity)
    c_tilde = np.einsum("ax,xy,by->ab", np.linalg.inv(L0), s.coefficients,
                        np.linalg.inv(L1))
    rho = np.einsum("ab,cb->ac", c_tilde, np.conj(c_tilde)) if keep == 0 \
        else np.einsum("ab,ad->bd", c_tilde, np.conj(c_tilde))
    return rho / np.trace(rho)


def entanglement_entropy(s: BipartiteState) -> float:
    """Von Neumann entropy of the reduced state, invariant under local
    transport."""
    w = np.linalg.eigvalsh(reduced_rest_frame_density(s, 0))
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


# ---------------------------------------------------------------------------
# Teleportation
# ---------------------------------------------------------------------------

BELL_LABELS = ("Phi+", "Phi-", "Psi+", "Psi-")

_CORRECTIONS = {
    "Phi+": np.eye(2, dtype=complex),
    "Phi-": _SZ,
    "Psi+": _SX,
    "Psi-": 1j * _SY,
}


@dataclass(frozen=True)
class TeleportationSession:
    """Three-qubit teleportation setup over independently transported bases.

    ``bases[i]`` is the pair (phi, psi) of I_u-orthonormal basis spinors of
    particle i at the time its operations happen; ``velocities[i]`` the frame
    4-velocity there.  ``stale_bases`` keeps the un-transported initial pair
    for negative-control experiments.  The shared pair (particles 2 and 3) is
    the canonical maximally entangled combination of the basis states, and
    the input amplitudes (alpha, beta) ride on particle 1's basis.
    """

    alpha: complex
    beta: complex
    bases: tuple
    velocities: tuple
    stale_bases: tuple
    pair_coefficients: np.ndarray

    @classmethod
    def build(cls, alpha, beta, trajectories: Sequence, omega_fields=None,
              pair_coefficients=None) -> "TeleportationSession":
        """Transport initial basis pairs along three worldlines.

        The initial pair of particle i is the boosted computational basis at
        the trajectory start; it is evolved with the covariant transport
        operator of the worldline.
        """
        if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-10:
            raise ValueError("input amplitudes must satisfy |a|^2+|b|^2 = 1")
        omega_fields = omega_fields or [None] * 3
        bases, stale, vels = [], [], []
        for traj, om in zip(trajectories, omega_fields):
            L0 = standard_boost_spinhalf(traj.u_frame[0])
            pair0 = (L0 @ np.array([1.0, 0.0], dtype=complex),
                     L0 @ np.array([0.0, 1.0], dtype=complex))
            T = weyl_transport_operator(traj, om)
            bases.append((T.matrix @ pair0[0], T.matrix @ pair0[1]))
            stale.append(pair0)
            vels.append(traj.u_frame[-1].copy())
        pc = np.asarray(pair_coefficients if pair_coefficients is not None
                        else np.eye(2) / np.sqrt(2.0), dtype=complex)
        sv = np.linalg.svd(pc, compute_uv=False)
        if np.max(np.abs(sv - 1.0 / np.sqrt(2.0))) > 1e-10:
            raise NonCanonicalEntanglement(
                "shared pair is not maximally entangled in canonical form")
        return cls(complex(alpha), complex(beta), tuple(bases), tuple(vels),
                   tuple(stale), pc)

    def tripartite_coefficients(self) -> np.ndarray:
        """Component tensor Y_{A1 A2 A3} of the session state."""
        phi1, psi1 = self.bases[0]
        in1 = self.alpha * phi1 + self.beta * psi1
        b2, b3 = self.bases[1], self.bases[2]
        out = np.zeros((2, 2, 2), dtype=complex)
        for m in range(2):
            for n in range(2):
                if self.pair_coefficients[m, n] != 0:
                    out += self.pair_coefficients[m, n] * np.einsum(
                        "a,b,c->abc", in1, b2[m], b3[n])
        return out

    def bell_states(self):
        """The four Bell coefficient arrays on particles 1 and 2."""
        phi1, psi1 = self.bases[0]
        phi2, psi2 = self.bases[1]
        s2 = 1.0 / np.sqrt(2.0)
        return {
            "Phi+": s2 * (np.outer(phi1, phi2) + np.outer(psi1, psi2)),
            "Phi-": s2 * (np.outer(phi1, phi2) - np.outer(psi1, psi2)),
            "Psi+": s2 * (np.outer(phi1, psi2) + np.outer(psi1, phi2)),
            "Psi-": s2 * (np.outer(phi1, psi2) - np.outer(psi1, phi2)),
        }


def _bell_amplitudes(session: TeleportationSession):
    """amp[label][c]: overlap of the session state with Bell_label x basis3_c."""
    Y = session.tripartite_coefficients()
    g1 = inner_product_form(session.velocities[0])
    g2 = inner_product_form(session.velocities[1])
    g3 = inner_product_form(session.velocities[2])
    bells = session.bell_states()
    b3 = session.bases[2]
    amps = {}
    for label, B in bells.items():
        amps[label] = np.array([
            np.einsum("ab,ax,by,c,cz,xyz->", np.conj(B), g1, g2,
                      np.conj(b3[c]), g3, Y)
            for c in range(2)])
    return amps


def bell_probabilities(session: TeleportationSession) -> dict:
    """Probability of each Bell outcome (1/4 each for canonical sessions)."""
    amps = _bell_amplitudes(session)
    return {label: float(np.sum(np.abs(a) ** 2)) for label, a in amps.items()}


def teleport(session: TeleportationSession, outcome: Optional[str] = None,
             rng=None, correct_basis: bool = True):
    """Run the protocol for one Bell outcome.

    Returns (outcome label, bob state components in Bob's basis, fidelity).
    If no outcome is forced, one is drawn with the Born probabilities using
    ``rng``.  With ``correct_basis`` false, Bob applies his correction in the
    stale (un-transported) basis: the negative control whose output depends
    on the outcome.
    """
    amps = _bell_amplitudes(session)
    probs = {k: float(np.sum(np.abs(a) ** 2)) for k, a in amps.items()}
    if outcome is None:
        rng = rng or np.random.default_rng()
        labels = list(BELL_LABELS)
        p = np.array([probs[k] for k in labels])
        outcome = labels[rng.choice(len(labels), p=p / p.sum())]
    p_out = probs[outcome]
    if p_out < 1e-14:
        raise ZeroProbabilityBranch(f"outcome {outcome} has zero probability")
    comp = amps[outcome] / np.sqrt(p_out)          # Bob state in his basis
    U = _CORRECTIONS[outcome]
    phi3, psi3 = session.bases[2]
    g3 = inner_product_form(session.velocities[2])
    if correct_basis:
        corrected = U @ comp
        bob_spinor = corrected[0] * phi3 + corrected[1] * psi3
    else:
        stale = session.stale_bases[2]
        bob_spinor = comp[0] * phi3 + comp[1] * psi3
        gram = np.array([[np.conj(stale[r]) @ g3 @ stale[c]
                          for c in range(2)] for r in range(2)])
        comp_stale = np.linalg.solve(gram, np.array(
            [np.conj(stale[r]) @ g3 @ bob_spinor for r in range(2)]))
        corr_stale = U @ comp_stale
        bob_spinor = corr_stale[0] * stale[0] + corr_stale[1] * stale[1]
        corrected = np.array([np.conj(phi3) @ g3 @ bob_spinor,
                              np.conj(psi3) @ g3 @ bob_spinor])
    target = session.alpha * phi3 + session.beta * psi3
    ov = np.conj(target) @ g3 @ bob_spinor
    n1 = np.real(np.conj(target) @ g3 @ target)
    n2 = np.real(np.conj(bob_spinor) @ g3 @ bob_spinor)
    fidelity = float(np.abs(ov) ** 2 / (n1 * n2))
    return outcome, corrected, fidelity
