"""Worldline integration: timelike Lorentz-force trajectories and null geodesics.

Trajectories are sampled on a fixed-step grid (RK4, no adaptive control) so
that transport operators built on top of them are reproducible.  Each sample
stores the coordinate position and velocity plus the frame components of the
velocity and proper acceleration with respect to a chosen tetrad.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import geometry
from .errors import NotNull, NullTrajectory, StepTooLarge
from .geometry import ETA, MetricField, TetradField, christoffel, diagonal_tetrad, minkowski_dot


@dataclass(frozen=True)
class EMFieldTensor:
    """Electromagnetic field F_{IJ} in tetrad indices, antisymmetric.

    ``potential`` optionally supplies the coordinate covector A_mu(x), needed
    for fermion phases in interferometry.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    potential: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def at(self, x) -> np.ndarray:
        F = np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)
        return 0.5 * (F - F.T)


def uniform_magnetic_field(b_vec, potential=None) -> EMFieldTensor:
    """Uniform magnetic field with frame components b_vec: F_ij = -eps_ijk B^k."""
    b = np.asarray(b_vec, dtype=float)
    F = np.zeros((4, 4))
    F[1, 2] = -b[2]
    F[2, 3] = -b[0]
    F[3, 1] = -b[1]
    F = F - F.T
    return EMFieldTensor(lambda x: F, potential)


@dataclass(frozen=True)
class Trajectory:
    """Sampled worldline.

    Arrays are indexed by sample: lam (n,), x (n,4), u (n,4) coordinate
    velocity dx/dlam, u_frame (n,4) tetrad components u^I, a_frame (n,4)
    tetrad components of the proper acceleration.
    """

    lam: np.ndarray
    x: np.ndarray
    u: np.ndarray
    u_frame: np.ndarray
    a_frame: np.ndarray
    kind: str                   # "timelike" | "null"
    parameterisation: str       # "proper-time" | "affine"
    metric: Optional[MetricField] = None
    tetrad: Optional[TetradField] = None

    def __len__(self):
        return len(self.lam)

    def norm_drift(self) -> float:
        """Max deviation of u^I u_I from its ideal value (1 timelike, 0 null)."""
        target = 1.0 if self.kind == "timelike" else 0.0
        norms = np.einsum("ni,ij,nj->n", self.u_frame, ETA, self.u_frame)
        return float(np.max(np.abs(norms - target)))

    def reversed(self) -> "Trajectory":
        return Trajectory(self.lam[::-1].copy(), self.x[::-1].copy(),
                          self.u[::-1].copy(), self.u_frame[::-1].copy(),
                          self.a_frame[::-1].copy(), self.kind,
                          self.parameterisation, self.metric, self.tetrad)

    def segment(self, i0: int, i1: int) -> "Trajectory":
        sl = slice(i0, i1 + 1)
        return Trajectory(self.lam[sl], self.x[sl], self.u[sl],
                          self.u_frame[sl], self.a_frame[sl], self.kind,
                          self.parameterisation, self.metric, self.tetrad)


def _acceleration_coord(metric, field, charge, mass, tetrad, x, u):
    """du^mu/dlam for the Lorentz-force law (zero charge: geodesic)."""
    gam = christoffel(metric, x).at_point
    acc = -np.einsum("rmn,m,n->r", gam, u, u)
    if field is not None and charge != 0.0:
        e = tetrad.frame(x)
        einv = tetrad.inverse_frame(x)
        F = field.at(x)
        # a^mu = -(q/m) u^J F_J^I e^mu_I  with F_J^I = F_JK eta^KI
        uI = einv @ u
        aI = -(charge / mass) * np.einsum("j,jk,ki->i", uI, F, ETA)
        acc = acc + e @ aI
    return acc


def _rk4_path(metric, field, charge, mass, tetrad, x0, u0, span, step,
              renormalize, kind):
    lam0, lam1 = span
    n = int(round((lam1 - lam0) / step))
    if n < 1:
        raise ValueError("span shorter than one step")
    lam = lam0 + step * np.arange(n + 1)
    xs = np.empty((n + 1, 4))
    us = np.empty((n + 1, 4))
    xs[0], us[0] = x0, u0

    def rhs(x, u):
        return u, _acceleration_coord(metric, field, charge, mass, tetrad, x, u)

    x, u = np.array(x0, dtype=float), np.array(u0, dtype=float)
    for i in range(n):
        k1x, k1u = rhs(x, u)
        k2x, k2u = rhs(x + 0.5 * step * k1x, u + 0.5 * step * k1u)
        k3x, k3u = rhs(x + 0.5 * step * k2x, u + 0.5 * step * k2u)
        k4x, k4u = rhs(x + step * k3x, u + step * k3u)
        x = x + (step / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + (step / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        if renormalize and kind == "timelike":
            g = metric.matrix(x)
            u = u / np.sqrt(u @ g @ u)
        xs[i + 1], us[i + 1] = x, u
    return lam, xs, us


def integrate_lorentz_force(metric: MetricField, field: Optional[EMFieldTensor],
                            mass: float, charge: float, x0, u0, span, step,
                            tetrad: Optional[TetradField] = None,
                            renormalize: bool = False,
                            drift_tol: float = 1e-6) -> Trajectory:
    """Integrate m D^2x/Dtau^2 + e (dx/dtau) F = 0 with fixed-step RK4.

    ``u0`` must be timelike and normalised (u.g.u = 1).  Geodesics are the
    charge = 0 case.  Raises StepTooLarge when the post-hoc normalisation
    drift of u exceeds ``drift_tol``.
    """
    tetrad = tetrad or diagonal_tetrad(metric)
    g0 = metric.matrix(x0)
    n0 = np.asarray(u0) @ g0 @ np.asarray(u0)
    if abs(n0 - 1.0) > 1e-9:
        raise StepTooLarge(f"initial velocity not normalised: u.u = {n0}")
    lam, xs, us = _rk4_path(metric, field, charge, mass, tetrad,
                            np.asarray(x0, float), np.asarray(u0, float),
                            span, step, renormalize, "timelike")
    traj = _finalise(metric, tetrad, lam, xs, us, "timelike", "proper-time",
                     field, charge, mass)
    if traj.norm_drift() > drift_tol:
        raise StepTooLarge(f"normalisation drift {traj.norm_drift():.3e} "
                           f"exceeds {drift_tol:.1e}; reduce the step")
    return traj


def integrate_null_geodesic(metric: MetricField, x0, k0, span, step,
                            tetrad: Optional[TetradField] = None,
                            null_tol: float = 1e-9) -> Trajectory:
    """Affinely parameterised null geodesic through x0 with initial wavevector k0.

    The affine parameter is fixed by e^0_mu dx^mu/dlam = 1 at the start
    point, i.e. the initial frame energy is one.
    """
    tetrad = tetrad or diagonal_tetrad(metric)
    k0 = np.asarray(k0, dtype=float)
    g0 = metric.matrix(x0)
    scale2 = abs(k0 @ g0 @ k0) / max(1e-300, (tetrad.inverse_frame(x0) @ k0)[0] ** 2)
    if scale2 > null_tol:
        raise NotNull(f"|k.k| = {scale2:.3e} relative to frame energy squared")
    k0 = k0 / (tetrad.inverse_frame(x0) @ k0)[0]
    lam, xs, us = _rk4_path(metric, None, 0.0, 1.0, tetrad,
                            np.asarray(x0, float), k0, span, step, False, "null")
    return _finalise(metric, tetrad, lam, xs, us, "null", "affine", None, 0.0, 1.0)


def _finalise(metric, tetrad, lam, xs, us, kind, par, field, charge, mass):
    n = len(lam)
    uf = np.empty((n, 4))
    af = np.zeros((n, 4))
    for i in range(n):
        einv = tetrad.inverse_frame(xs[i])
        uf[i] = einv @ us[i]
        if field is not None and charge != 0.0:
            F = field.at(xs[i])
            af[i] = -(charge / mass) * np.einsum("j,jk,ki->i", uf[i], F, ETA)
    return Trajectory(lam, xs, us, uf, af, kind, par, metric, tetrad)


def proper_acceleration(traj: Trajectory, index: int) -> np.ndarray:
    """a^I = Du^I/Dtau at a sample, by covariant differencing of stored samples.

    Uses central differences in the interior and one-sided differences at the
    ends.  Raises NullTrajectory for null input.
    """
    if traj.kind == "null":
        raise NullTrajectory("proper acceleration needs a timelike trajectory")
    n = len(traj)
    i = index
    if 0 < i < n - 1:
        du = (traj.u[i + 1] - traj.u[i - 1]) / (traj.lam[i + 1] - traj.lam[i - 1])
    elif i == 0:
        du = (traj.u[1] - traj.u[0]) / (traj.lam[1] - traj.lam[0])
    else:
        du = (traj.u[-1] - traj.u[-2]) / (traj.lam[-1] - traj.lam[-2])
    gam = christoffel(traj.metric, traj.x[i]).at_point
    a_coord = du + np.einsum("rmn,m,n->r", gam, traj.u[i], traj.u[i])
    return traj.tetrad.inverse_frame(traj.x[i]) @ a_coord


# ---------------------------------------------------------------------------
# Analytic worldline builders
# ---------------------------------------------------------------------------

def hover_worldline(metric: MetricField, spatial, tau_span, n_steps,
                    tetrad: Optional[TetradField] = None) -> Trajectory:
    """Static observer x^i = const in a static metric, sampled in proper time.

    The coordinate velocity is u^mu = delta^mu_t / sqrt(g_tt); the proper
    acceleration is computed exactly from the Christoffel symbols.
    """
    tetrad = tetrad or diagonal_tetrad(metric)
    spatial = np.asarray(spatial, dtype=float)
    x_probe = np.concatenate([[0.0], spatial])
    g = metric.matrix(x_probe)
    ut = 1.0 / np.sqrt(g[0, 0])
    tau = np.linspace(tau_span[0], tau_span[1], n_steps + 1)
    n = len(tau)
    xs = np.empty((n, 4))
    us = np.empty((n, 4))
    uf = np.empty((n, 4))
    af = np.empty((n, 4))
    gam = christoffel(metric, x_probe).at_point
    a_coord = gam[:, 0, 0] * ut * ut
    for i in range(n):
        xs[i] = np.concatenate([[tau[i] * ut], spatial])
        us[i] = np.array([ut, 0.0, 0.0, 0.0])
        einv = tetrad.inverse_frame(xs[i])
        uf[i] = einv @ us[i]
        af[i] = einv @ a_coord
    return Trajectory(tau, xs, us, uf, af, "timelike", "proper-time", metric, tetrad)


def flat_circular_orbit(beta: float, n_steps: int, turns: float = 1.0,
                        radius: Optional[float] = None) -> Trajectory:
    """Uniform circular motion in the x-y plane of flat spacetime at speed beta.

    Sampled in proper time over ``turns`` full laps.  The default radius is 1;
    the angular frequency follows from beta.
    """
    metric = geometry.minkowski()
    tetrad = diagonal_tetrad(metric)
    r = 1.0 if radius is None else radius
    omega = beta / r                      # coordinate angular velocity
    gam = 1.0 / np.sqrt(1.0 - beta ** 2)
    t_total = turns * 2.0 * np.pi / omega
    tau_total = t_total / gam
    tau = np.linspace(0.0, tau_total, n_steps + 1)
    t = gam * tau
    phase = omega * t
    n = len(tau)
    xs = np.stack([t, r * np.cos(phase), r * np.sin(phase), np.zeros(n)], axis=1)
    us = np.stack([gam * np.ones(n),
                   -gam * beta * np.sin(phase),
                   gam * beta * np.cos(phase),
                   np.zeros(n)], axis=1)
    acc = gam ** 2 * beta ** 2 / r
    accs = np.stack([np.zeros(n),
                     -acc * np.cos(phase),
                     -acc * np.sin(phase),
                     np.zeros(n)], axis=1)
    return Trajectory(tau, xs, us, us.copy(), accs, "timelike", "proper-time",
                      metric, tetrad)


def schwarzschild_circular_orbit(M: float, r: float, n_steps: int,
                                 turns: float = 1.0) -> Trajectory:
    """Circular timelike geodesic at radius r in the equatorial plane.

    Requires r > 3M.  Sampled in proper time; the acceleration is identically
    zero (geodesic).
    """
    metric = geometry.schwarzschild(M)
    tetrad = diagonal_tetrad(metric)
    if r <= 3.0 * M:
        raise ValueError("no timelike circular geodesic at r <= 3M")
    omega = np.sqrt(M / r ** 3)
    ut = 1.0 / np.sqrt(1.0 - 3.0 * M / r)
    t_total = turns * 2.0 * np.pi / omega
    tau_total = t_total / ut
    tau = np.linspace(0.0, tau_total, n_steps + 1)
    t = ut * tau
    phase = omega * t
    n = len(tau)
    th = np.pi / 2.0
    xs = np.stack([t, r * np.ones(n), th * np.ones(n), phase], axis=1)
    us = np.stack([ut * np.ones(n), np.zeros(n), np.zeros(n),
                   ut * omega * np.ones(n)], axis=1)
    uf = np.empty((n, 4))
    for i in range(n):
        uf[i] = tetrad.inverse_frame(xs[i]) @ us[i]
    return Trajectory(tau, xs, us, uf, np.zeros((n, 4)), "timelike",
                      "proper-time", metric, tetrad)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

_CSV_COLUMNS = (["lambda"]
                + [f"x{i}" for i in range(4)]
                + [f"u{i}" for i in range(4)]
                + [f"uI{i}" for i in range(4)]
                + [f"aI{i}" for i in range(4)])


def save_trajectory_csv(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_COLUMNS)
        for i in range(len(traj)):
            row = np.concatenate([[traj.lam[i]], traj.x[i], traj.u[i],
                                  traj.u_frame[i], traj.a_frame[i]])
            w.writerow([f"{v:.17g}" for v in row])


def load_trajectory_csv(path, kind="timelike",
                        parameterisation="proper-time") -> Trajectory:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != _CSV_COLUMNS:
            raise ValueError("unexpected trajectory CSV header")
        rows = np.array([[float(v) for v in row] for row in r])
    return Trajectory(rows[:, 0], rows[:, 1:5], rows[:, 5:9], rows[:, 9:13],
                      rows[:, 13:17], kind, parameterisation)


def conserved_energy(metric: MetricField, traj: Trajectory, mass: float = 1.0):
    """E = m g_tt u^t along a static-metric trajectory (Killing energy)."""
    out = np.empty(len(traj))
    for i in range(len(traj)):
        g = metric.matrix(traj.x[i])
        out[i] = mass * g[0, 0] * traj.u[i, 0]
    return out
