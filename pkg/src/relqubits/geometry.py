"""Spacetime geometry: metrics, Christoffel symbols, tetrads, connection 1-form.

Conventions
-----------
* metric signature (+, -, -, -); natural units c = hbar = 1
* Greek (coordinate) indices are the first axes of arrays, capital Latin
  (frame) indices the last; e.g. a tetrad array ``e[mu, I]`` holds the
  I-th frame vector in column I
* frame indices are raised/lowered with ``ETA``, coordinate indices with
  the metric at the point in question

All geometry objects are immutable after construction and their evaluation
methods are pure, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ImproperTransform, NonOrthonormalTetrad, SingularMetric

ETA = np.diag([1.0, -1.0, -1.0, -1.0])

_DEFAULT_FD_STEP = 1e-6


def _fd_scale(x):
    return max(1.0, float(np.max(np.abs(x))))


def _richardson_derivative(fn, x, step):
    """Central differences with one level of Richardson extrapolation.

    Returns d[mu, ...] = partial_mu fn(x), where fn returns an ndarray.
    """
    x = np.asarray(x, dtype=float)
    out = None
    for mu in range(4):
        e = np.zeros(4)
        e[mu] = 1.0

        def central(h):
            return (fn(x + h * e) - fn(x - h * e)) / (2.0 * h)

        d_h = central(step)
        d_h2 = central(step / 2.0)
        val = (4.0 * d_h2 - d_h) / 3.0
        if out is None:
            out = np.empty((4,) + val.shape, dtype=val.dtype)
        out[mu] = val
    return out


# ---------------------------------------------------------------------------
# Metric fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricField:
    """Field of metric tensors g_{mu nu}(x).

    ``matrix(x)`` returns the symmetric 4x4 metric at a point; ``derivative``
    returns all coordinate derivatives, using a closed form when the metric
    was built from the catalogue and Richardson-extrapolated central
    differences otherwise.
    """

    name: str
    _eval: Callable[[np.ndarray], np.ndarray]
    _deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def matrix(self, x) -> np.ndarray:
        g = np.asarray(self._eval(np.asarray(x, dtype=float)), dtype=float)
        return 0.5 * (g + g.T)

    __call__ = matrix

    def inverse(self, x) -> np.ndarray:
        g = self.matrix(x)
        if abs(np.linalg.det(g)) < 1e-300:
            raise SingularMetric(f"metric '{self.name}' singular at x={x}")
        return np.linalg.inv(g)

    def derivative(self, x, step: float | None = None) -> np.ndarray:
        """d[mu, sigma, nu] = partial_mu g_{sigma nu}(x)."""
        if self._deriv is not None:
            return np.asarray(self._deriv(np.asarray(x, dtype=float)), dtype=float)
        h = (step or _DEFAULT_FD_STEP) * _fd_scale(x)
        return _richardson_derivative(self.matrix, x, h)

    def signature_ok(self, x, tol=1e-10) -> bool:
        """One positive and three negative eigenvalues at x."""
        w = np.linalg.eigvalsh(self.matrix(x))
        return np.sum(w > tol) == 1 and np.sum(w < -tol) == 3


def minkowski() -> MetricField:
    return MetricField("minkowski", lambda x: ETA.copy(),
                       lambda x: np.zeros((4, 4, 4)))


def rindler(g: float) -> MetricField:
    """Uniformly accelerated frame, ds^2 = (1 + g z)^2 dt^2 - dx^2 - dy^2 - dz^2.

    ``g`` is the proper acceleration at z = 0 in natural units (1/length).
    """

    def ev(x):
        m = -np.eye(4)
        m[0, 0] = (1.0 + g * x[3]) ** 2
        return m

    def dv(x):
        d = np.zeros((4, 4, 4))
        d[3, 0, 0] = 2.0 * g * (1.0 + g * x[3])
        return d

    return MetricField("rindler", ev, dv, params={"g": g})


def schwarzschild(M: float) -> MetricField:
    """Schwarzschild exterior in (t, r, theta, phi), ds^2 = f dt^2 - dr^2/f - ...

    with f = 1 - 2M/r.  Valid for r > 2M.
    """

    def ev(x):
        r, th = x[1], x[2]
        f = 1.0 - 2.0 * M / r
        return np.diag([f, -1.0 / f, -r * r, -(r * np.sin(th)) ** 2])

    def dv(x):
        r, th = x[1], x[2]
        f = 1.0 - 2.0 * M / r
        fp = 2.0 * M / r ** 2
        d = np.zeros((4, 4, 4))
        d[1, 0, 0] = fp
        d[1, 1, 1] = fp / f ** 2
        d[1, 2, 2] = -2.0 * r
        d[1, 3, 3] = -2.0 * r * np.sin(th) ** 2
        d[2, 3, 3] = -2.0 * r * r * np.sin(th) * np.cos(th)
        return d

    return MetricField("schwarzschild", ev, dv, params={"M": M})


def custom_metric(fn, name="custom", deriv=None, params=None) -> MetricField:
    """Wrap a user callable point -> 4x4 into a MetricField."""
    return MetricField(name, fn, deriv, params=params or {})


def metric_from_config(cfg: dict) -> MetricField:
    """Build a catalogue metric from {"metric": name, <param>: value} config."""
    kind = cfg.get("metric", "minkowski")
    if kind == "minkowski":
        return minkowski()
    if kind == "rindler":
        return rindler(float(cfg["g"]))
    if kind == "schwarzschild":
        return schwarzschild(float(cfg["M"]))
    raise KeyError(f"unknown metric '{kind}'")


# ---------------------------------------------------------------------------
# Christoffel symbols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChristoffelSymbols:
    """Gamma^rho_{mu nu} at a point, stored as at_point[rho, mu, nu]."""

    at_point: np.ndarray
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "at_point", np.asarray(self.at_point, dtype=float))
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))


def christoffel(metric: MetricField, x, step: float | None = None) -> ChristoffelSymbols:
    """Levi-Civita connection coefficients from the metric.

    Gamma^rho_{mu nu} = (1/2) g^{rho sigma} (d_mu g_{sigma nu}
                         + d_nu g_{sigma mu} - d_sigma g_{mu nu}).
    """
    x = np.asarray(x, dtype=float)
    ginv = metric.inverse(x)
    dg = metric.derivative(x, step)  # dg[mu, sigma, nu]
    # bracket[sigma, mu, nu]
    bracket = (np.einsum("msn->smn", dg)
               + np.einsum("nsm->smn", dg)
               - dg)
    gamma = 0.5 * np.einsum("rs,smn->rmn", ginv, bracket)
    return ChristoffelSymbols(gamma, x)


# ---------------------------------------------------------------------------
# Tetrads
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TetradField:
    """Field of orthonormal frames e^mu_I(x), stored as frame(x)[mu, I].

    The inverse frame e^I_mu satisfies e^I_mu e^mu_J = delta^I_J.
    """

    metric: MetricField
    _frame: Callable[[np.ndarray], np.ndarray]
    _frame_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "tetrad"

    def frame(self, x) -> np.ndarray:
        return np.asarray(self._frame(np.asarray(x, dtype=float)), dtype=float)

    def inverse_frame(self, x) -> np.ndarray:
        e = self.frame(x)
        if abs(np.linalg.det(e)) < 1e-300:
            raise SingularMetric(f"tetrad '{self.name}' degenerate at x={x}")
        return np.linalg.inv(e)

    def derivative(self, x, step: float | None = None) -> np.ndarray:
        """d[nu, mu, I] = partial_nu e^mu_I(x)."""
        if self._frame_deriv is not None:
            return np.asarray(self._frame_deriv(np.asarray(x, dtype=float)), dtype=float)
        h = (step or _DEFAULT_FD_STEP) * _fd_scale(x)
        return _richardson_derivative(self.frame, x, h)

    def to_frame(self, x, v_coord) -> np.ndarray:
        """Coordinate components v^mu -> frame components v^I."""
        return self.inverse_frame(x) @ np.asarray(v_coord, dtype=float)

    def to_coord(self, x, v_frame) -> np.ndarray:
        """Frame components v^I -> coordinate components v^mu."""
        return self.frame(x) @ np.asarray(v_frame, dtype=float)


def diagonal_tetrad(metric: MetricField) -> TetradField:
    """Natural static tetrad of a diagonal metric: e^mu_I = delta^mu_I / sqrt|g_mumu|."""

    def fr(x):
        g = metric.matrix(x)
        d = np.abs(np.diag(g))
        return np.diag(1.0 / np.sqrt(d))

    def dfr(x):
        g = metric.matrix(x)
        dg = metric.derivative(x)
        diag = np.diag(g)
        out = np.zeros((4, 4, 4))
        for nu in range(4):
            for mu in range(4):
                # d/dx^nu |g_mumu|^(-1/2); |g_00| = g_00, |g_ii| = -g_ii
                s = 1.0 if mu == 0 else -1.0
                out[nu, mu, mu] = -0.5 * (s * diag[mu]) ** (-1.5) * s * dg[nu, mu, mu]
        return out

    return TetradField(metric, fr, dfr, name=f"diag({metric.name})")


def check_tetrad(metric: MetricField, tetrad: TetradField, x) -> float:
    """Max-norm orthonormality residual |g_{mu nu} e^mu_I e^nu_J - eta_IJ|."""
    g = metric.matrix(x)
    e = tetrad.frame(x)
    return float(np.max(np.abs(e.T @ g @ e - ETA)))


def transform_tetrad(tetrad: TetradField,
                     lambda_field: Callable[[np.ndarray], np.ndarray],
                     lambda_derivative=None,
                     validate: bool = True) -> TetradField:
    """Apply a local Lorentz transformation to a tetrad, e'^mu_I = Lambda_I^J e^mu_J.

    ``lambda_field`` maps a point to the 4x4 matrix Lambda^I_J.  The
    transformed frame is ``frame(x) @ inv(Lambda(x))`` since
    Lambda_I^J = (Lambda^-1)^J_I.
    """

    def lam(x):
        L = np.asarray(lambda_field(np.asarray(x, dtype=float)), dtype=float)
        if validate and check_lorentz(L) > 1e-9:
            raise ImproperTransform(f"not a proper orthochronous Lorentz matrix at x={x}")
        return L

    def fr(x):
        return tetrad.frame(x) @ lorentz_inverse(lam(x))

    def dfr(x):
        de = tetrad.derivative(x)  # (nu, mu, J)
        L = lam(x)
        Linv = lorentz_inverse(L)
        if lambda_derivative is not None:
            dL = np.asarray(lambda_derivative(np.asarray(x, dtype=float)), dtype=float)
        else:
            h = _DEFAULT_FD_STEP * _fd_scale(x)
            dL = _richardson_derivative(lambda_field, x, h)
        # d(e Linv) = de Linv + e d(Linv); d(Linv) = -Linv dL Linv
        dLinv = -np.einsum("ab,nbc,cd->nad", Linv, dL, Linv)
        e = tetrad.frame(x)
        return np.einsum("nmj,ji->nmi", de, Linv) + np.einsum("mj,nji->nmi", e, dLinv)

    return TetradField(tetrad.metric, fr, dfr, name=f"{tetrad.name}*Lambda")


# ---------------------------------------------------------------------------
# Connection 1-form
# ---------------------------------------------------------------------------

def connection_one_form(tetrad: TetradField, gamma, x,
                        orthonormality_tol: float = 1e-6) -> np.ndarray:
    """omega[nu, I, J] = e^I_rho d_nu e^rho_J + Gamma^sigma_{nu rho} e^I_sigma e^rho_J.

    ``gamma`` may be a ChristoffelSymbols instance or a raw (4,4,4) array.
    Raises NonOrthonormalTetrad if the tetrad fails orthonormality at x.
    """
    x = np.asarray(x, dtype=float)
    res = check_tetrad(tetrad.metric, tetrad, x)
    if res > orthonormality_tol:
        raise NonOrthonormalTetrad(f"orthonormality residual {res:.3e} at x={x}")
    G = gamma.at_point if isinstance(gamma, ChristoffelSymbols) else np.asarray(gamma)
    e = tetrad.frame(x)            # e[rho, J]
    einv = tetrad.inverse_frame(x)  # einv[I, rho]
    de = tetrad.derivative(x)       # de[nu, rho, J]
    om = (np.einsum("ir,nrj->nij", einv, de)
          + np.einsum("snr,is,rj->nij", G, einv, e))
    return om


def lower_connection(omega: np.ndarray) -> np.ndarray:
    """omega[nu, I, J] with mixed frame indices -> omega_{nu I J} (both lowered)."""
    return np.einsum("ik,nkj->nij", ETA, omega)


def connection_field(metric: MetricField, tetrad: TetradField):
    """Callable x -> omega[nu, I, J], recomputing Christoffels at each point."""

    def om(x):
        return connection_one_form(tetrad, christoffel(metric, x), x)

    return om


# ---------------------------------------------------------------------------
# Lorentz transformations
# ---------------------------------------------------------------------------

def lorentz_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of a Lorentz matrix via (L^-1)^I_J = eta_JK L^K_L eta^LI transpose."""
    return ETA @ np.asarray(L).T @ ETA


def check_lorentz(L: np.ndarray) -> float:
    """Residual of eta_KL L^K_I L^L_J = eta_IJ plus properness penalties."""
    L = np.asarray(L, dtype=float)
    res = float(np.max(np.abs(L.T @ ETA @ L - ETA)))
    if np.linalg.det(L) < 0 or L[0, 0] < 1.0 - 1e-12:
        res = max(res, 1.0)
    return res


def rotation_lorentz(axis, angle: float) -> np.ndarray:
    """Pure spatial rotation by ``angle`` about the 3-axis ``axis`` (4x4)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0.0, -n[2], n[1]],
                  [n[2], 0.0, -n[0]],
                  [-n[1], n[0], 0.0]])
    R3 = np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
    out = np.eye(4)
    out[1:, 1:] = R3
    return out


def boost_lorentz(u) -> np.ndarray:
    """Standard boost Lambda(u) with Lambda^I_0 = u^I for timelike unit u."""
    u = np.asarray(u, dtype=float)
    u0, ui = u[0], u[1:]
    out = np.eye(4)
    out[0, 0] = u0
    out[0, 1:] = ui
    out[1:, 0] = ui
    out[1:, 1:] = np.eye(3) + np.outer(ui, ui) / (u0 + 1.0)
    return out


def boost_from_beta(beta) -> np.ndarray:
    """Boost built from a 3-velocity vector beta (|beta| < 1)."""
    b = np.asarray(beta, dtype=float)
    b2 = float(b @ b)
    gam = 1.0 / np.sqrt(1.0 - b2)
    u = np.concatenate([[gam], gam * b])
    return boost_lorentz(u)


def random_proper_lorentz(rng, max_rapidity: float = 1.0) -> np.ndarray:
    """Random proper orthochronous Lorentz matrix: rotation * boost * rotation."""
    def rand_rot():
        v = rng.normal(size=3)
        return rotation_lorentz(v, rng.uniform(0.0, np.pi))
    w = rng.uniform(0.0, max_rapidity)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    u = np.concatenate([[np.cosh(w)], np.sinh(w) * direction])
    return rand_rot() @ boost_lorentz(u) @ rand_rot()


def minkowski_dot(a, b) -> float:
    """eta_IJ a^I b^J."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[0] * b[0] - a[1:] @ b[1:]
