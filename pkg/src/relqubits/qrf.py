"""Quantum reference frames: G-twirl, relational encodings, change of frame.

Finite-size reference frames for U(1) (phase) and SU(2) (Cartesian frame or
direction indicator), the group-average (G-twirl) that removes background
orientation information, relational encoding and recovery maps, the
relational measurement instrument used to switch frames, and the decoherence
channels the switch induces on the encoded system.

Numerical Haar integration: U(1) uses the trapezoid rule on equispaced
phases, which is exact once the point count exceeds the integrand band
limit; SU(2) uses Gauss-Legendre nodes in the rotation angle (polar form,
weight sin^2(omega/2)) or in the middle Euler angle, with equispaced
azimuths.  Sums run in fixed order so repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (DimensionMismatch, NotDensityMatrix, NonMLProjectors,
                     UnsupportedStateKind)

__all__ = [
    "U1Element", "SU2Element", "u1_haar_grid", "su2_haar_grid_polar",
    "su2_haar_grid_euler", "wigner_d_matrix", "U1Rep", "SU2Irrep",
    "SU2RegularRep", "u1_qubit_rep", "FrameState", "frame_state",
    "g_twirl", "g_twirl_su2_exact", "encode", "recover",
    "relational_effect", "povm_completeness_residual",
    "relational_instrument", "instrument_probability", "change_frame",
    "change_frame_brute_force", "CPMap", "decoherence_map", "unitary_map",
    "net_decoherence", "su2_cs_decoherence", "su2_cs_middle_factor",
    "u1_overlap", "su2_fiducial_overlap", "su2_coherent_overlap",
    "u1_plus_survival", "su2_middle_deviation", "bhd_probability",
    "bhd_total_photon_probability", "bhd_coherent_grid",
]


# ---------------------------------------------------------------------------
# Group elements
# ---------------------------------------------------------------------------

U1Element = float      # a phase in [0, 2 pi)


@dataclass(frozen=True)
class SU2Element:
    """SU(2) element stored as its defining 2x2 matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @classmethod
    def identity(cls) -> "SU2Element":
        return cls(np.eye(2, dtype=complex))

    @classmethod
    def from_polar(cls, omega: float, theta: float, phi: float) -> "SU2Element":
        """U = exp(i omega n.J), n = (sin t cos p, sin t sin p, cos t)."""
        n = np.array([np.sin(theta) * np.cos(phi),
                      np.sin(theta) * np.sin(phi),
                      np.cos(theta)])
        sig = np.array([[n[2], n[0] - 1j * n[1]],
                        [n[0] + 1j * n[1], -n[2]]])
        return cls(np.cos(omega / 2) * np.eye(2) + 1j * np.sin(omega / 2) * sig)

    @classmethod
    def from_euler(cls, alpha: float, beta: float, gamma: float) -> "SU2Element":
        """U = exp(-i alpha Jz) exp(-i beta Jy) exp(-i gamma Jz)."""
        ca, cb = np.exp(-0.5j * alpha), np.cos(beta / 2)
        cg, sb = np.exp(-0.5j * gamma), np.sin(beta / 2)
        return cls(np.array([[ca * cg * cb, -ca * np.conj(cg) * sb],
                             [np.conj(ca) * cg * sb, np.conj(ca * cg) * cb]]))

    def compose(self, other: "SU2Element") -> "SU2Element":
        return SU2Element(self.matrix @ other.matrix)

    def inverse(self) -> "SU2Element":
        return SU2Element(self.matrix.conj().T)


def group_compose(g, h):
    if isinstance(g, SU2Element):
        return g.compose(h)
    return float(g) + float(h)


def group_inverse(g):
    if isinstance(g, SU2Element):
        return g.inverse()
    return -float(g)


# ---------------------------------------------------------------------------
# Haar quadrature grids
# ---------------------------------------------------------------------------

def u1_haar_grid(n: int):
    """Equispaced phases with uniform weights; exact for integrands whose
    Fourier content stays below n."""
    thetas = 2.0 * np.pi * np.arange(n) / n
    return list(thetas), np.full(n, 1.0 / n)


def su2_haar_grid_polar(n_omega: int, n_theta: int, n_phi: int):
    """Polar-form grid: Gauss-Legendre in omega (weight sin^2(omega/2)) and
    in cos(theta), equispaced phi.  Weights sum to one."""
    xo, wo = np.polynomial.legendre.leggauss(n_omega)
    omegas = 0.5 * np.pi * (xo + 1.0)
    w_omega = wo * (0.5 * np.pi) * np.sin(omegas / 2) ** 2 * (2.0 / np.pi)
    xt, wt = np.polynomial.legendre.leggauss(n_theta)
    thetas = np.arccos(xt)
    w_theta = wt / 2.0
    phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
    elements, weights = [], []
    for om, w1 in zip(omegas, w_omega):
        for th, w2 in zip(thetas, w_theta):
            for ph in phis:
                elements.append(SU2Element.from_polar(om, th, ph))
                weights.append(w1 * w2 / n_phi)
    return elements, np.array(weights)


def su2_haar_grid_euler(n_beta: int, n_alpha: int, n_gamma: int):
    """Euler-form grid: Gauss-Legendre in cos(beta), equispaced alpha, gamma."""
    xb, wb = np.polynomial.legendre.leggauss(n_beta)
    betas = np.arccos(xb)
    w_beta = wb / 2.0
    alphas = 2.0 * np.pi * np.arange(n_alpha) / n_alpha
    gammas = 2.0 * np.pi * np.arange(n_gamma) / n_gamma
    elements, weights = [], []
    for be, w1 in zip(betas, w_beta):
        for al in alphas:
            for ga in gammas:
                elements.append(SU2Element.from_euler(al, be, ga))
                weights.append(w1 / (n_alpha * n_gamma))
    return elements, np.array(weights)


# ---------------------------------------------------------------------------
# Representations
# ---------------------------------------------------------------------------

def wigner_d_matrix(j, g: SU2Element) -> np.ndarray:
    """Spin-j representation matrix, rows/columns ordered m = j .. -j.

    Built as the restriction of the 2j-fold tensor power of the defining
    matrix to the symmetric subspace, which is an exact homomorphism for all
    integer and half-integer j.
    """
    two_j = int(round(2 * j))
    if abs(2 * j - two_j) > 1e-12 or two_j < 0:
        raise ValueError("j must be a nonnegative half-integer")
    a, b = g.matrix[0, 0], g.matrix[0, 1]
    c, d = g.matrix[1, 0], g.matrix[1, 1]
    dim = two_j + 1
    lg = [math.lgamma(k + 1) for k in range(two_j + 1)]
    out = np.empty((dim, dim), dtype=complex)
    for col in range(dim):          # column index: m = j - col, p = j+m
        p = two_j - col
        q = col
        # expand (a x + c y)^p (b x + d y)^q; coeff[k] multiplies x^k y^(p+q-k)
        pa = np.zeros(p + 1, dtype=complex)
        for k in range(p + 1):
            pa[k] = math.exp(lg[p] - lg[k] - lg[p - k]) * a ** k * c ** (p - k)
        pb = np.zeros(q + 1, dtype=complex)
        for k in range(q + 1):
            pb[k] = math.exp(lg[q] - lg[k] - lg[q - k]) * b ** k * d ** (q - k)
        coeff = np.convolve(pa, pb)            # length 2j+1, index k = j+m'
        for row in range(dim):
            pp = two_j - row
            qq = row
            norm = math.exp(0.5 * (lg[pp] + lg[qq] - lg[p] - lg[q]))
            out[row, col] = coeff[pp] * norm
    return out


def spin_matrices(j):
    """(Jz, Jy) for spin j, m ordered j .. -j."""
    two_j = int(round(2 * j))
    m = j - np.arange(two_j + 1)
    Jz = np.diag(m).astype(complex)
    lower = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] - 1))
    Jm = np.zeros((two_j + 1, two_j + 1), dtype=complex)
    for i, v in enumerate(lower):
        Jm[i + 1, i] = v
    Jp = Jm.conj().T
    Jy = (Jp - Jm) / 2j
    return Jz, Jy


@dataclass(frozen=True)
class U1Rep:
    """U(1) representation: diagonal phases with the given integer or
    half-integer charges (only charge differences enter group actions)."""

    charges: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "charges", np.asarray(self.charges, dtype=float))

    @classmethod
    def fock(cls, cutoff: int) -> "U1Rep":
        return cls(np.arange(cutoff + 1, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.charges)

    def unitary(self, theta: float) -> np.ndarray:
        return np.diag(np.exp(1j * self.charges * float(theta)))


def u1_qubit_rep() -> U1Rep:
    """Default qubit system: U_S(g) = exp(i g sigma_z / 2)."""
    return U1Rep(np.array([0.5, -0.5]))


@dataclass(frozen=True)
class SU2Irrep:
    j: float

    @property
    def dim(self) -> int:
        return int(round(2 * self.j)) + 1

    @property
    def jz(self) -> np.ndarray:
        return spin_matrices(self.j)[0]

    def unitary(self, g: SU2Element) -> np.ndarray:
        return wigner_d_matrix(self.j, g)


@dataclass(frozen=True)
class SU2RegularRep:
    """Truncated regular representation: integer blocks j = 0..s, each
    appearing with multiplicity 2j+1 (U = sum_j D^j (x) I_{2j+1})."""

    cutoff: int

    @property
    def blocks(self):
        return list(range(self.cutoff + 1))

    @property
    def dim(self) -> int:
        s = self.cutoff
        return (2 * s + 1) * (2 * s + 3) * (s + 1) // 3

    @property
    def jz(self) -> np.ndarray:
        mats = [np.kron(spin_matrices(j)[0], np.eye(2 * j + 1))
                for j in self.blocks]
        return _block_diag(mats)

    def unitary(self, g: SU2Element) -> np.ndarray:
        mats = [np.kron(wigner_d_matrix(j, g), np.eye(2 * j + 1))
                for j in self.blocks]
        return _block_diag(mats)


def _block_diag(mats):
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for m in mats:
        k = m.shape[0]
        out[i:i + k, i:i + k] = m
        i += k
    return out


def rep_unitary(rep, g) -> np.ndarray:
    return rep.unitary(g)


# ---------------------------------------------------------------------------
# Frame states
# ---------------------------------------------------------------------------

_U1_PE = "u1-phase-eigenstate"
_U1_CS = "u1-coherent"
_SU2_FID = "su2-fiducial"
_SU2_CS = "su2-coherent"

_KINDS = (_U1_PE, _U1_CS, _SU2_FID, _SU2_CS)


@dataclass(frozen=True)
class FrameState:
    """Group-covariant reference-frame state |size; psi(g)>.

    ``size`` is the photon-number cutoff s for u1-phase-eigenstate, the
    coherent amplitude t (mean photon number t^2) for u1-coherent, the spin
    cutoff s for su2-fiducial, and the total spin j for su2-coherent.
    """

    kind: str
    size: float
    orientation: object
    rep: object
    vector: np.ndarray

    @property
    def normalisation_dim(self) -> float:
        """D_s, the dimension entering the maximum-likelihood property."""
        if self.kind == _U1_PE:
            return self.size + 1
        if self.kind == _U1_CS:
            return self.rep.dim          # projector family cutoff surrogate
        if self.kind == _SU2_FID:
            s = int(self.size)
            return (2 * s + 1) * (2 * s + 3) * (s + 1) / 3
        return 2 * self.size + 1

    def ml_ket(self, g) -> np.ndarray:
        """Maximum-likelihood family member used for relational projectors.

        For coherent U(1) frames the family is the phase-eigenstate family on
        the truncated support; su2-coherent states are returned as projector
        directions even though they are not maximum likelihood (their twirl is
        uniform only within the single irrep)."""
        if self.kind in (_U1_PE, _U1_CS):
            k = np.arange(self.rep.dim)
            return np.exp(1j * k * float(g)) / np.sqrt(self.rep.dim)
        if self.kind == _SU2_FID:
            return self.rep.unitary(g) @ _su2_fiducial_vector(int(self.size))
        return wigner_d_matrix(self.size, g)[:, 0]

    def at(self, g) -> "FrameState":
        """The same frame kind reoriented to g."""
        return frame_state(self.kind, self.size, g,
                           coherent_support=None)


def _u1_coherent_cutoff(t: float, support: float) -> int:
    """Smallest Fock cutoff holding at least ``support`` of the Poisson mass."""
    lam = t * t
    k, total, term = 0, 0.0, math.exp(-lam)
    total = term
    while total < support and k < 100000:
        k += 1
        term *= lam / k
        total += term
    return k


def _su2_fiducial_vector(s: int) -> np.ndarray:
    rep = SU2RegularRep(s)
    vec = np.zeros(rep.dim, dtype=complex)
    offset = 0
    for j in rep.blocks:
        d = 2 * j + 1
        for m in range(d):
            vec[offset + m * d + m] = np.sqrt(d)
        offset += d * d
    return vec / np.sqrt(rep.dim)


def frame_state(kind: str, size, orientation=None, coherent_support=0.9999
                ) -> FrameState:
    """Build a covariant frame state of the given kind, size and orientation.

    Orientation defaults to the group identity.  Truncated coherent states
    are renormalised on their kept support (99.99 % by default).
    """
    if kind not in _KINDS:
        raise UnsupportedStateKind(f"unknown frame kind '{kind}'")
    if kind == _U1_PE:
        g = 0.0 if orientation is None else float(orientation)
        s = int(size)
        rep = U1Rep.fock(s)
        k = np.arange(s + 1)
        vec = np.exp(1j * k * g) / np.sqrt(s + 1)
        return FrameState(kind, s, g, rep, vec)
    if kind == _U1_CS:
        g = 0.0 if orientation is None else float(orientation)
        t = float(size)
        if t <= 0:
            raise ValueError("coherent amplitude must be positive")
        cutoff = _u1_coherent_cutoff(t, coherent_support or 0.9999)
        rep = U1Rep.fock(cutoff)
        k = np.arange(cutoff + 1)
        logw = k * math.log(t * t) - np.array([math.lgamma(v + 1) for v in k])
        amp = np.exp(0.5 * (logw - logw.max()))
        amp = amp / np.linalg.norm(amp)
        vec = amp * np.exp(1j * k * g)
        return FrameState(kind, t, g, rep, vec)
    if kind == _SU2_FID:
        g = SU2Element.identity() if orientation is None else orientation
        s = int(size)
        rep = SU2RegularRep(s)
        vec = rep.unitary(g) @ _su2_fiducial_vector(s)
        return FrameState(kind, s, g, rep, vec)
    g = SU2Element.identity() if orientation is None else orientation
    j = float(size)
    rep = SU2Irrep(j)
    vec = wigner_d_matrix(j, g)[:, 0]
    return FrameState(kind, j, g, rep, vec)


# ---------------------------------------------------------------------------
# G-twirl, encoding, recovery
# ---------------------------------------------------------------------------

def _check_density(rho, tol=1e-9):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotDensityMatrix("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise NotDensityMatrix("density matrix must be Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-6:
        raise NotDensityMatrix("density matrix must have unit trace")
    return rho


def _u1_charge_mask(charges) -> np.ndarray:
    q = np.asarray(charges, dtype=float)
    return (np.abs(q[:, None] - q[None, :]) < 1e-9).astype(float)


def g_twirl(rho, rep, grid=None) -> np.ndarray:
    """G(rho) = int dmu(g) U(g) rho U(g)^dag.

    U(1) representations are twirled exactly by erasing coherences between
    distinct charge sectors; SU(2) representations by Haar quadrature over
    ``grid`` (elements, weights).
    """
    rho = _check_density(rho)
    if isinstance(rep, U1Rep):
        return rho * _u1_charge_mask(rep.charges)
    if grid is None:
        grid = su2_haar_grid_polar(24, 24, 24)
    elements, weights = grid
    out = np.zeros_like(rho)
    for g, w in zip(elements, weights):
        U = rep.unitary(g)
        out += w * (U @ rho @ U.conj().T)
    return out


def g_twirl_su2_exact(rho, rep: SU2RegularRep) -> np.ndarray:
    """Exact SU(2) twirl on the regular representation: project onto each
    spin block and depolarise its irrep factor."""
    rho = _check_density(rho)
    out = np.zeros_like(rho)
    offset = 0
    for j in rep.blocks:
        d = 2 * j + 1
        block = rho[offset:offset + d * d, offset:offset + d * d]
        block = block.reshape(d, d, d, d)        # (m, mult, m', mult')
        reduced = np.einsum("anam->nm", block)
        out[offset:offset + d * d, offset:offset + d * d] = \
            np.kron(np.eye(d) / d, reduced)
        offset += d * d
    return out


def _joint_u1_rep(rep_s: U1Rep, rep_r: U1Rep) -> U1Rep:
    qs, qr = rep_s.charges, rep_r.charges
    return U1Rep((qs[:, None] + qr[None, :]).reshape(-1))


def encode(rho_s, frame: FrameState, system_rep, grid=None) -> np.ndarray:
    """Relational encoding: the joint twirl of rho_S (x) |frame><frame|."""
    rho_s = _check_density(rho_s)
    if system_rep.dim != rho_s.shape[0]:
        raise DimensionMismatch("system state and representation disagree")
    rho_r = np.outer(frame.vector, np.conj(frame.vector))
    joint = np.kron(rho_s, rho_r)
    if isinstance(system_rep, U1Rep) and isinstance(frame.rep, U1Rep):
        return joint * _u1_charge_mask(_joint_u1_rep(system_rep, frame.rep).charges)
    if grid is None:
        grid = su2_haar_grid_polar(16, 16, 16)
    elements, weights = grid
    out = np.zeros_like(joint)
    for g, w in zip(elements, weights):
        U = np.kron(system_rep.unitary(g), frame.rep.unitary(g))
        out += w * (U @ joint @ U.conj().T)
    return out


def recover(sigma_sr, frame: FrameState, system_rep, grid,
            invariance_tol: float = 1e-6, warn=None) -> np.ndarray:
    """Dequantisation: D_s int dmu(g) [U_S(g^-1) x <g|] sigma [ .. x |g>].

    ``sigma_sr`` must be G-invariant to tolerance (a warning callback fires
    otherwise); the result is a trace-one state on S for proper encodings.
    """
    dS = system_rep.dim
    dR = frame.rep.dim
    sigma = np.asarray(sigma_sr, dtype=complex).reshape(dS, dR, dS, dR)
    elements, weights = grid
    D = frame.normalisation_dim
    out = np.zeros((dS, dS), dtype=complex)
    for g, w in zip(elements, weights):
        ket = frame.ml_ket(g)
        block = np.einsum("k,akbl,l->ab", np.conj(ket), sigma, ket)
        Ui = system_rep.unitary(group_inverse(g))
        out += (w * D) * (Ui @ block @ Ui.conj().T)
    if warn is not None:
        res = _invariance_residual(sigma_sr, system_rep, frame.rep)
        if res > invariance_tol:
            warn(f"recover input not G-invariant: residual {res:.3e}")
    return out


def _invariance_residual(sigma, system_rep, frame_rep) -> float:
    if isinstance(system_rep, U1Rep) and isinstance(frame_rep, U1Rep):
        mask = _u1_charge_mask(_joint_u1_rep(system_rep, frame_rep).charges)
        return float(np.max(np.abs(sigma * (1 - mask))))
    g = SU2Element.from_euler(0.71, 1.13, 2.04)
    U = np.kron(system_rep.unitary(g), frame_rep.unitary(g))
    return float(np.max(np.abs(U @ sigma @ U.conj().T - sigma)))


# ---------------------------------------------------------------------------
# Relational measurement instrument
# ---------------------------------------------------------------------------

def _ml_family_matrix(frame: FrameState, elements) -> np.ndarray:
    """Rows: ML kets at the grid elements."""
    return np.stack([frame.ml_ket(g) for g in elements])


def _check_ml(frame: FrameState, tol=1e-8):
    if frame.kind == _SU2_CS:
        raise NonMLProjectors(
            "su2-coherent projectors do not resolve the identity; "
            "use fiducial or phase-eigenstate families")


def relational_effect(h, frame_a: FrameState, frame_b: FrameState, grid
                      ) -> np.ndarray:
    """POVM effect E_h = D_A D_B int dmu(g) |g><g|_A (x) |gh><gh|_B."""
    _check_ml(frame_a)
    _check_ml(frame_b)
    elements, weights = grid
    VA = _ml_family_matrix(frame_a, elements)
    VB = np.stack([frame_b.ml_ket(group_compose(g, h)) for g in elements])
    V = np.einsum("ni,nj->nij", VA, VB).reshape(len(elements), -1)
    scale = frame_a.normalisation_dim * frame_b.normalisation_dim
    return scale * np.einsum("n,ni,nj->ij", weights, V, np.conj(V))


def povm_completeness_residual(frame_a: FrameState, frame_b: FrameState,
                               quadrature_n: int, n_h: Optional[int] = None
                               ) -> float:
    """|| int dmu(h) E_h - I || for U(1) frames.

    The g-integral inside each effect uses ``quadrature_n`` points; the outer
    h-integral uses the minimal exact trapezoid count unless given.
    """
    grid = u1_haar_grid(quadrature_n)
    if n_h is None:
        n_h = 2 * frame_b.rep.dim + 2
    hs, wh = u1_haar_grid(n_h)
    dim = frame_a.rep.dim * frame_b.rep.dim
    acc = np.zeros((dim, dim), dtype=complex)
    for h, w in zip(hs, wh):
        acc += w * relational_effect(h, frame_a, frame_b, grid)
    return float(np.max(np.abs(acc - np.eye(dim))))


def relational_instrument(sigma, h, frame_a: FrameState, frame_b: FrameState,
                          grid, system_dim: int = 1) -> np.ndarray:
    """Unnormalised post-measurement state of the frame-to-frame measurement.

    M^h(sigma) = D_A D_B int dmu(g) Pi^{g,h} sigma Pi^{g,h} acting on the A,B
    slots of sigma (identity on a leading system slot of ``system_dim``).
    """
    _check_ml(frame_a)
    _check_ml(frame_b)
    elements, weights = grid
    dA, dB = frame_a.rep.dim, frame_b.rep.dim
    dS = system_dim
    sig = np.asarray(sigma, dtype=complex).reshape(dS, dA * dB, dS, dA * dB)
    VA = _ml_family_matrix(frame_a, elements)
    VB = np.stack([frame_b.ml_ket(group_compose(g, h)) for g in elements])
    V = np.einsum("ni,nj->nij", VA, VB).reshape(len(elements), -1)
    scale = frame_a.normalisation_dim * frame_b.normalisation_dim
    K = np.einsum("nk,akbl,nl->nab", np.conj(V), sig, V)
    out = np.einsum("n,nab,nm,nr->ambr", weights * scale, K, V, np.conj(V))
    return out.reshape(dS * dA * dB, dS * dA * dB)


def instrument_probability(sigma, h, frame_a, frame_b, grid,
                           system_dim: int = 1) -> float:
    """P(h) = Tr M^h(sigma); equals one for product initial encodings."""
    out = relational_instrument(sigma, h, frame_a, frame_b, grid, system_dim)
    return float(np.real(np.trace(out)))


def trace_out_a(sigma_sab, system_dim, dA, dB) -> np.ndarray:
    sig = np.asarray(sigma_sab).reshape(system_dim, dA, dB,
                                        system_dim, dA, dB)
    return np.einsum("sabtac->sbtc", sig).reshape(system_dim * dB,
                                                  system_dim * dB)


# ---------------------------------------------------------------------------
# Change of frame and decoherence channels
# ---------------------------------------------------------------------------

class CPMap:
    """Completely positive map on a d-dimensional system.

    Wraps an apply function; composition is lazy.  ``choi`` builds the Choi
    matrix for positivity and trace-preservation diagnostics.
    """

    def __init__(self, apply_fn: Callable[[np.ndarray], np.ndarray], dim: int,
                 label: str = "cpmap"):
        self._apply = apply_fn
        self.dim = dim
        self.label = label

    def __call__(self, rho) -> np.ndarray:
        return self._apply(np.asarray(rho, dtype=complex))

    def compose(self, inner: "CPMap") -> "CPMap":
        """self after inner."""
        return CPMap(lambda rho: self(inner(rho)), inner.dim,
                     f"{self.label}*{inner.label}")

    def choi(self) -> np.ndarray:
        d = self.dim
        J = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for k in range(d):
                E = np.zeros((d, d), dtype=complex)
                E[i, k] = 1.0
                J += np.kron(self(E), E)
        return J

    def trace_preservation_residual(self) -> float:
        d = self.dim
        acc = np.zeros((d, d), dtype=complex)
        for i in range(d):
            for k in range(d):
                E = np.zeros((d, d), dtype=complex)
                E[i, k] = 1.0
                acc[k, i] = np.trace(self(E))
        return float(np.max(np.abs(acc - np.eye(d))))

    def min_choi_eigenvalue(self) -> float:
        J = self.choi()
        return float(np.min(np.linalg.eigvalsh(0.5 * (J + J.conj().T))))


def unitary_map(rep, g, label="U") -> CPMap:
    U = rep.unitary(g)
    return CPMap(lambda rho: U @ rho @ U.conj().T, rep.dim, label)


def identity_map(dim: int) -> CPMap:
    return CPMap(lambda rho: rho.copy(), dim, "id")


def _frame_kernel(frame: FrameState, quadrature_n: int):
    """(elements, weights) with weights D_s |<g|psi(e)>|^2 dmu(g)."""
    if frame.kind in (_U1_PE, _U1_CS):
        elements, w = u1_haar_grid(quadrature_n)
        ket0 = frame.at(0.0).vector if frame.kind == _U1_CS else None
        dens = np.empty(quadrature_n)
        for i, g in enumerate(elements):
            if frame.kind == _U1_PE:
                dens[i] = (frame.size + 1) * u1_overlap(int(frame.size), g)
            else:
                ml = frame.ml_ket(g)
                ov = np.vdot(ml, ket0)
                dens[i] = frame.rep.dim * abs(ov) ** 2
        return elements, w * dens
    if frame.kind == _SU2_FID:
        n = max(8, quadrature_n)
        elements, w = su2_haar_grid_polar(n, n, n)
        dens = np.empty(len(elements))
        for i, g in enumerate(elements):
            tr = g.matrix[0, 0] + g.matrix[1, 1]
            omega = 2.0 * np.arccos(np.clip(np.real(tr) / 2.0, -1.0, 1.0))
            dens[i] = frame.normalisation_dim * \
                abs(su2_fiducial_overlap(int(frame.size), omega)) ** 2
        return elements, w * dens
    # su2-coherent: |<j;e|j;g>|^2 = cos^{4j}(beta/2)
    n = max(8, quadrature_n)
    elements, w = su2_haar_grid_euler(n, n, n)
    dens = np.empty(len(elements))
    for i, g in enumerate(elements):
        cb2 = abs(g.matrix[0, 0]) ** 2          # cos^2(beta/2)
        dens[i] = (2 * frame.size + 1) * cb2 ** (2 * frame.size)
    return elements, w * dens


def decoherence_map(frame: FrameState, quadrature_n: int, system_rep) -> CPMap:
    """F_S = D_s int dmu(g) |<g|psi(e)>|^2 U_S(g^-1): the noise left on the
    system after encoding with this frame and recovering."""
    elements, weights = _frame_kernel(frame, quadrature_n)
    unitaries = [system_rep.unitary(group_inverse(g)) for g in elements]

    def apply(rho):
        out = np.zeros_like(rho, dtype=complex)
        for w, U in zip(weights, unitaries):
            out += w * (U @ rho @ U.conj().T)
        return out

    return CPMap(apply, system_rep.dim, f"F[{frame.kind}]")


def net_decoherence(frame_a: FrameState, frame_b: FrameState, a, h,
                    quadrature_n: int, system_rep) -> CPMap:
    """F^(B) o U(h^-1) o F^(A) o U(a^-1): the full frame-change noise map."""
    FA = decoherence_map(frame_a, quadrature_n, system_rep)
    FB = decoherence_map(frame_b, quadrature_n, system_rep)
    Ua = unitary_map(system_rep, group_inverse(a), "U(a^-1)")
    Uh = unitary_map(system_rep, group_inverse(h), "U(h^-1)")
    return FB.compose(Uh).compose(FA).compose(Ua)


def change_frame(rho_s, frame_a: FrameState, frame_b_kind: str,
                 frame_b_size, h, quadrature_n: int, system_rep
                 ) -> np.ndarray:
    """Normalised final state on S (x) B after switching frames A -> B.

    Factored form: encode the decohered, reoriented system state with the
    new frame at orientation h.
    """
    rho_s = _check_density(rho_s)
    FA = decoherence_map(frame_a, quadrature_n, system_rep)
    Ua = unitary_map(system_rep, group_inverse(frame_a.orientation))
    rho_prime = FA(Ua(rho_s))
    frame_b = frame_state(frame_b_kind, frame_b_size, h)
    grid = None
    if not isinstance(system_rep, U1Rep):
        n = max(8, quadrature_n)
        grid = su2_haar_grid_polar(n, n, n)
    return encode(rho_prime, frame_b, system_rep, grid)


def change_frame_brute_force(rho_s, frame_a: FrameState, frame_b: FrameState,
                             h, quadrature_n: int, system_rep) -> np.ndarray:
    """Tr_A[M^h(G_SA(rho_S x A) (x) G_B(rho_B))], normalised.

    The measured-and-traced route; agrees with the factored form for
    covariant pure A frames and any B state on the ML support.
    """
    rho_s = _check_density(rho_s)
    sigma_sa = encode(rho_s, frame_a, system_rep)
    rho_b = np.outer(frame_b.vector, np.conj(frame_b.vector))
    sigma_b = g_twirl(rho_b, frame_b.rep)
    sigma = np.kron(sigma_sa, sigma_b)
    dS, dA, dB = system_rep.dim, frame_a.rep.dim, frame_b.rep.dim
    # reorder (S A) x B -> S (A B) is already contiguous: (S,A,B) kron order
    grid = u1_haar_grid(quadrature_n)
    post = relational_instrument(sigma, h, frame_a, frame_b, grid, dS)
    reduced = trace_out_a(post, dS, dA, dB)
    tr = np.real(np.trace(reduced))
    return reduced / tr


# ---------------------------------------------------------------------------
# Overlap formulas and classical-limit diagnostics
# ---------------------------------------------------------------------------

def u1_overlap(s: int, delta) -> float:
    """|<s;g|s;h>|^2 for phase eigenstates, delta = h - g.

    (1/(s+1)^2) (1 - cos[(s+1) delta]) / (1 - cos delta), continued to 1 at
    delta = 0 (mod 2 pi).
    """
    s = int(s)
    delta = np.asarray(delta, dtype=float)
    denom = 1.0 - np.cos(delta)
    small = np.abs(denom) < 1e-12
    num = 1.0 - np.cos((s + 1) * np.where(small, 0.0, delta))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = num / np.where(small, 1.0, denom) / (s + 1) ** 2
    val = np.where(small, 1.0, val)
    return float(val) if val.ndim == 0 else val


def su2_fiducial_overlap(s: int, omega: float) -> complex:
    """<s;e| U(g) |s;e> = D_s^{-1} sum_m e^{i m omega} ((1+s)^2 - m^2);
    depends only on the rotation angle of g, not its axis."""
    s = int(s)
    m = np.arange(-s, s + 1)
    D = (2 * s + 1) * (2 * s + 3) * (s + 1) / 3
    return complex(np.sum(np.exp(1j * m * omega) * ((1 + s) ** 2 - m ** 2)) / D)


def su2_coherent_overlap(j: float, euler) -> complex:
    """<j;e|j;(alpha,beta,gamma)> = e^{-i(alpha+gamma) j} cos^{2j}(beta/2)."""
    alpha, beta, gamma = euler
    return complex(np.exp(-1j * (alpha + gamma) * j)
                   * np.cos(beta / 2.0) ** (2 * j))


def u1_plus_survival(s: int, quadrature_n: Optional[int] = None) -> float:
    """Off-diagonal survival factor of the qubit |+> state under the
    phase-eigenstate frame noise map (the kernel's first Fourier
    coefficient, s/(s+1) analytically)."""
    s = int(s)
    n = quadrature_n or (4 * s + 8)
    rep = u1_qubit_rep()
    F = decoherence_map(frame_state(_U1_PE, s), n, rep)
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    out = F(plus)
    return float(2.0 * np.abs(out[0, 1]))


def su2_cs_middle_factor(j: float, quadrature_n: int) -> CPMap:
    """(2j+1) int sin b db/2 cos^{4j}(b/2) Ry(-b) on a spin-1/2 system."""
    xb, wb = np.polynomial.legendre.leggauss(quadrature_n)
    betas = np.arccos(xb)
    w = wb / 2.0
    dens = (2 * j + 1) * np.cos(betas / 2.0) ** (4 * j)
    _, Jy = spin_matrices(0.5)
    unitaries = [np.asarray(
        np.cos(b / 2) * np.eye(2) + 1j * np.sin(b / 2) * (2 * Jy))
        for b in betas]

    def apply(rho):
        out = np.zeros_like(rho, dtype=complex)
        for wi, di, U in zip(w, dens, unitaries):
            out += wi * di * (U @ rho @ U.conj().T)
        return out

    return CPMap(apply, 2, "su2cs-middle")


def _dephase_map(rep) -> CPMap:
    jz = np.real(np.diag(rep.jz))
    mask = (np.abs(jz[:, None] - jz[None, :]) < 1e-9).astype(float)
    return CPMap(lambda rho: rho * mask, rep.dim, "Dz")


def su2_cs_decoherence(j: float, quadrature_n: int,
                       system_rep: Optional[SU2Irrep] = None) -> CPMap:
    """Direction-indicator noise map: D o [beta-integral of Ry(-beta)] o D.

    The dephasers about z survive every classical limit; the middle factor
    approaches the identity as j grows.
    """
    system_rep = system_rep or SU2Irrep(0.5)
    if system_rep.dim != 2:
        # generic middle factor for any system spin
        xb, wb = np.polynomial.legendre.leggauss(quadrature_n)
        betas = np.arccos(xb)
        w = wb / 2.0
        dens = (2 * j + 1) * np.cos(betas / 2.0) ** (4 * j)
        mid_unitaries = [system_rep.unitary(SU2Element.from_euler(0.0, -b, 0.0))
                         for b in betas]

        def apply_mid(rho):
            out = np.zeros_like(rho, dtype=complex)
            for wi, di, U in zip(w, dens, mid_unitaries):
                out += wi * di * (U @ rho @ U.conj().T)
            return out

        mid = CPMap(apply_mid, system_rep.dim, "su2cs-middle")
    else:
        mid = su2_cs_middle_factor(j, quadrature_n)
    D = _dephase_map(system_rep)
    return D.compose(mid).compose(D)


def su2_middle_deviation(j: float, quadrature_n: int = 64) -> float:
    """Non-dephasing deviation of the middle factor from the identity: the
    deficit 1 - T_zz of the z-population transfer (1/(j+1) analytically)."""
    mid = su2_cs_middle_factor(j, quadrature_n)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    rho = 0.5 * (np.eye(2) + sz)
    out = mid(rho)
    t_zz = float(np.real(np.trace(sz @ out)))
    return 1.0 - t_zz


# ---------------------------------------------------------------------------
# Balanced homodyne detection
# ---------------------------------------------------------------------------

def bhd_probability(j: float, m: Optional[float], state_a: FrameState,
                    state_b: FrameState) -> float:
    """Outcome probability of balanced homodyne detection of two frames.

    For two coherent states the closed form in total photons 2j and photon
    difference 2m; for two phase eigenstates the total-photon distribution
    P^j (pass m = None).  2j and 2m must be integers with |m| <= j.
    """
    kinds = (state_a.kind, state_b.kind)
    if kinds == (_U1_CS, _U1_CS):
        if m is None:
            raise UnsupportedStateKind("coherent BHD resolves m; pass a value")
        return _bhd_coherent(j, m, state_a.size, float(state_a.orientation),
                             state_b.size, float(state_b.orientation))
    if kinds == (_U1_PE, _U1_PE):
        if m is not None:
            raise UnsupportedStateKind(
                "phase-eigenstate BHD: only the total-photon distribution "
                "P^j has a closed form; pass m = None")
        return bhd_total_photon_probability(j, int(state_a.size),
                                            int(state_b.size))
    raise UnsupportedStateKind(f"BHD closed forms cover CS+CS and PE+PE, "
                               f"not {kinds}")


def _bhd_coherent(j, m, sa, a, sb, b) -> float:
    two_j, two_m = int(round(2 * j)), int(round(2 * m))
    if abs(2 * j - two_j) > 1e-9 or abs(2 * m - two_m) > 1e-9 or abs(m) > j:
        raise ValueError("need integer 2j, 2m with |m| <= j")
    np_, nm = (two_j + two_m) // 2, (two_j - two_m) // 2
    diff2 = abs(sa * np.exp(1j * a) - sb * np.exp(1j * b)) ** 2 / 2.0
    summ2 = abs(sa * np.exp(1j * a) + sb * np.exp(1j * b)) ** 2 / 2.0

    def power_log(n, x):
        if n == 0:
            return 0.0
        return n * math.log(x) if x > 0 else -math.inf

    logp = (-sa ** 2 - sb ** 2 + power_log(np_, summ2) + power_log(nm, diff2)
            - math.lgamma(np_ + 1) - math.lgamma(nm + 1))
    return float(math.exp(logp)) if math.isfinite(logp) else 0.0


def bhd_total_photon_probability(j: float, s_a: int, s_b: int) -> float:
    """P^j for two phase eigenstates: climbs linearly from the origin to a
    plateau of 1/(max(s_A, s_B)+1), then falls to zero past 2j = s_A+s_B."""
    two_j = int(round(2 * j))
    if abs(2 * j - two_j) > 1e-9 or two_j < 0:
        raise ValueError("need integer 2j >= 0")
    count = min(s_a, two_j) - max(0, two_j - s_b) + 1
    if count <= 0:
        return 0.0
    return count / ((s_a + 1) * (s_b + 1))


def bhd_coherent_grid(state_a: FrameState, state_b: FrameState,
                      tail: float = 1e-8):
    """(j, m, P) triples covering all outcomes up to a Poisson tail bound."""
    if (state_a.kind, state_b.kind) != (_U1_CS, _U1_CS):
        raise UnsupportedStateKind("grid enumeration is for coherent pairs")
    lam = state_a.size ** 2 + state_b.size ** 2
    # find the smallest total-photon cutoff holding 1 - tail of the mass
    n, term, total = 0, math.exp(-lam), math.exp(-lam)
    while total < 1.0 - tail and n < 200000:
        n += 1
        term *= lam / n
        total += term
    rows = []
    for two_j in range(n + 1):
        j = two_j / 2.0
        for two_m in range(-two_j, two_j + 1, 2):
            rows.append((j, two_m / 2.0,
                         bhd_probability(j, two_m / 2.0, state_a, state_b)))
    return rows
