"""Degree-theoretic diagnostics of the clamped cone.

The boundary gradient of any admissible configuration is the closed curve
``gamma(t) = beta(t) e_t + beta'(t) e_t^perp``. Its winding number around a
point ``z`` is the degree of ``Dv`` at ``z``; integrating a bump against it
gives a positive constant that also equals the integral of
``phi(Dv) det D^2 v`` over the disk (change of variables).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import ndimage

from . import kernels
from .ansatz import SmoothedCone, ansatz_fields
from .energy import strain
from .errors import NoWitness, NonIntegerWinding, TooCloseToCurve
from .grid import DiskGrid, FieldState, hessian_op, gradient_op
from .profile import BoundaryProfile, ConeTrace, eval_beta

RESIDUAL_MAX = 0.25


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    points: np.ndarray  # (m, 2), t_j = 2 pi j / m; closure is implicit
    profile: BoundaryProfile

    @property
    def max_gap(self) -> float:
        d = np.diff(np.vstack([self.points, self.points[:1]]), axis=0)
        return float(np.max(np.hypot(d[:, 0], d[:, 1])))

    @property
    def eps_wind(self) -> float:
        return 2.0 * self.max_gap

    def bbox(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return lo, hi

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return kernels.polyline_distances(self.points[:, 0], self.points[:, 1], z[..., 0], z[..., 1])


def boundary_curve(profile: BoundaryProfile, n_samples: int | None = None) -> BoundaryCurve:
    """Sample Dv_beta on the unit circle."""
    n = n_samples or max(1024, 16 * profile.K)
    if n < 16 * profile.K:
        raise ValueError(f"need at least 16*K = {16 * profile.K} samples")
    t = 2 * np.pi * np.arange(n) / n
    b0 = eval_beta(profile, t)
    b1 = eval_beta(profile, t, 1)
    c, s = np.cos(t), np.sin(t)
    pts = np.stack([b0 * c - b1 * s, b0 * s + b1 * c], axis=-1)
    return BoundaryCurve(pts, profile)


class WindingResult(NamedTuple):
    values: np.ndarray  # int
    residual: np.ndarray
    too_close: np.ndarray  # bool


def winding_numbers(curve: BoundaryCurve, z) -> WindingResult:
    """Vectorised winding numbers; points within ``eps_wind`` of the curve are flagged, value 0."""
    z = np.asarray(z, dtype=float)
    raw = kernels.winding_sums(curve.points[:, 0], curve.points[:, 1], z[..., 0], z[..., 1])
    close = curve.distance(z) <= curve.eps_wind
    vals = np.rint(raw)
    resid = np.abs(raw - vals)
    vals = np.where(close, 0, vals).astype(int)
    return WindingResult(vals, np.where(close, 0.0, resid), close)


def winding_number(curve: BoundaryCurve, z) -> int:
    z = np.asarray(z, dtype=float)
    if float(curve.distance(z)) <= curve.eps_wind:
        raise TooCloseToCurve(f"point {z} within {curve.eps_wind:.3e} of the curve")
    raw = float(kernels.winding_sums(curve.points[:, 0], curve.points[:, 1], z[0], z[1]))
    k = round(raw)
    if abs(raw - k) >= RESIDUAL_MAX:
        raise NonIntegerWinding(raw)
    return int(k)


@dataclass(frozen=True, eq=False)
class DegreeField:
    x: np.ndarray  # cell centres
    y: np.ndarray
    values: np.ndarray  # (nx, ny) int, 'ij' indexing
    mask: np.ndarray  # True where too close to the curve
    residual: np.ndarray

    @property
    def cell_area(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.y[1] - self.y[0]))

    @property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def components(self):
        """Label connected components of the unmasked cells (4-connectivity)."""
        return ndimage.label(~self.mask)

    def nonzero_area(self) -> float:
        return float(np.count_nonzero(self.values)) * self.cell_area

    def integrate(self, phi) -> float:
        """Midpoint rule for ``int phi(z) deg(z) dz``."""
        vals = phi.value(self.points)
        return float(np.sum(vals * self.values) * self.cell_area)


def degree_field(curve: BoundaryCurve, box=None, resolution: int = 200, margin: float = 0.1) -> DegreeField:
    """Winding numbers on a ``resolution x resolution`` cell-centred grid over ``box``.

    ``box = ((x0, y0), (x1, y1))``; defaults to the curve's bounding box
    enlarged by ``margin`` of its extent.
    """
    if box is None:
        lo, hi = curve.bbox()
        pad = margin * float(np.max(hi - lo)) + 1e-12
        box = (lo - pad, hi + pad)
    (x0, y0), (x1, y1) = box
    dx = (x1 - x0) / resolution
    dy = (y1 - y0) / resolution
    x = x0 + (np.arange(resolution) + 0.5) * dx
    y = y0 + (np.arange(resolution) + 0.5) * dy
    X, Y = np.meshgrid(x, y, indexing="ij")
    res = winding_numbers(curve, np.stack([X, Y], axis=-1))
    return DegreeField(x, y, res.values, res.too_close, res.residual)


class _RadialBump:
    """Shared machinery for radial bumps ``A f((|z - c| / rho)^2)``-style profiles."""

    center: np.ndarray
    radius: float
    amplitude: float

    def _radial(self, s):  # -> q, q'(s), q''(s)
        raise NotImplementedError

    def value(self, z):
        s = np.hypot(*(np.moveaxis(np.asarray(z, dtype=float) - self.center, -1, 0))) / self.radius
        return self.amplitude * self._radial(s)[0]

    def grad(self, z):
        d = np.asarray(z, dtype=float) - self.center
        r = np.hypot(d[..., 0], d[..., 1])
        s = r / self.radius
        _, q1, _ = self._radial(s)
        safe = np.where(r > 0, r, 1.0)
        fac = np.where(r > 0, self.amplitude * q1 / (self.radius * safe), 0.0)
        return fac[..., None] * d

    def hessian(self, z):
        d = np.asarray(z, dtype=float) - self.center
        r = np.hypot(d[..., 0], d[..., 1])
        s = r / self.radius
        _, q1, q2 = self._radial(s)
        safe = np.where(r > 0, r, 1.0)
        f1_over_r = np.where(r > 0, q1 / (self.radius * safe), q2 / self.radius**2)
        f2 = q2 / self.radius**2
        n = d / safe[..., None]
        nn = n[..., :, None] * n[..., None, :]
        eye = np.eye(2)
        H = f2[..., None, None] * nn + f1_over_r[..., None, None] * (eye - nn)
        return self.amplitude * H


# q(s) = 1 - (10 s^3 - 15 s^4 + 6 s^5) on [0, 1]
_Q = Polynomial([1, 0, 0, -10, 15, -6])
_Q1 = _Q.deriv()
_Q2 = _Q1.deriv()


@dataclass(frozen=True)
class TestFunction(_RadialBump):
    """Radially quintic C^2 bump of height ``amplitude`` supported in ``B(center, radius)``."""

    __test__ = False  # not a pytest class

    center: np.ndarray
    radius: float
    amplitude: float = 1.0

    def _radial(self, s):
        s = np.asarray(s, dtype=float)
        inside = s < 1.0
        return (
            np.where(inside, _Q(s), 0.0),
            np.where(inside, _Q1(s), 0.0),
            np.where(inside, _Q2(s), 0.0),
        )

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.center, self.radius, self.amplitude * c)

    def integral(self) -> float:
        """Closed form of ``int phi dz``."""
        P = (_Q * Polynomial([0, 1])).integ()
        return float(2 * np.pi * self.amplitude * self.radius**2 * (P(1) - P(0)))

    def w22_norm(self) -> float:
        """Closed form ``(|phi|_2^2 + |D phi|_2^2 + |D^2 phi|_2^2)^(1/2)``."""
        s = Polynomial([0, 1])
        q1_over_s = Polynomial(_Q1.coef[1:])
        A2 = self.amplitude**2
        rho = self.radius

        def I(p):
            P = p.integ()
            return float(P(1) - P(0))

        l2 = 2 * np.pi * A2 * rho**2 * I(_Q * _Q * s)
        h1 = 2 * np.pi * A2 * I(_Q1 * _Q1 * s)
        h2 = 2 * np.pi * A2 / rho**2 * I((_Q2 * _Q2 + q1_over_s * q1_over_s) * s)
        return math.sqrt(l2 + h1 + h2)


@dataclass(frozen=True)
class SmoothBump(_RadialBump):
    """C-infinity bump ``A exp(1 - 1 / (1 - s^2))`` on ``|z - c| < radius``."""

    center: np.ndarray
    radius: float
    amplitude: float = 1.0

    def _radial(self, s):
        s = np.asarray(s, dtype=float)
        inside = s < 1.0
        u = np.where(inside, 1.0 - s * s, 1.0)
        f = np.where(inside, np.exp(1.0 - 1.0 / u), 0.0)
        # d/ds of exp(1 - 1/(1 - s^2)) = f * (-2 s / u^2)
        g = -2.0 * s / u**2
        dg = -2.0 / u**2 - 8.0 * s * s / u**3
        return f, f * g, f * (g * g + dg)


class Witness(NamedTuple):
    phi: TestFunction
    integral: float
    degree: int


def find_test_function(field: DegreeField, curve: BoundaryCurve | None = None, shrink: float = 0.9) -> Witness:
    """Bump inside the widest nonzero-degree component, signed so that the pairing is positive."""
    if not np.any(field.values != 0):
        raise NoWitness("degree vanishes on every cell")
    best = None
    h = min(field.x[1] - field.x[0], field.y[1] - field.y[0])
    # label each level set on its own: on coarse fields the unmasked cells
    # can touch across the curve, which would merge regions of different degree
    for deg in np.unique(field.values[~field.mask]):
        if deg == 0:
            continue
        labels, n = ndimage.label(~field.mask & (field.values == deg))
        for k in range(1, n + 1):
            comp = labels == k
            dist = ndimage.distance_transform_edt(np.pad(comp, 1))[1:-1, 1:-1] * h
            idx = np.unravel_index(np.argmax(dist), dist.shape)
            if best is None or dist[idx] > best[0]:
                best = (float(dist[idx]), idx, int(deg))
    if best is None:
        raise NoWitness("no component with constant nonzero degree")
    inradius, (i, j), deg = best
    center = np.array([field.x[i], field.y[j]])
    radius = shrink * (inradius - 0.5 * h)
    if curve is not None:
        radius = min(radius, shrink * float(curve.distance(center)))
    if radius <= 0:
        raise NoWitness("nonzero component too thin for a bump")
    phi = TestFunction(center, radius, float(np.sign(deg)))
    return Witness(phi, field.integrate(phi), deg)


def gauss_curvature(state: FieldState) -> np.ndarray:
    """det D^2 v at every node (linearised Gauss curvature)."""
    H = hessian_op(state)
    return H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    rel_err: float


def pullback_identity_check(sc: SmoothedCone, phi, grid: DiskGrid, field: DegreeField) -> IdentityCheck:
    """Compare ``int phi deg dz`` (field grid) with ``int phi(Dv) det D^2 v dx`` (disk grid)."""
    lhs = field.integrate(phi)
    f = ansatz_fields(sc, grid.points())
    H = f.D2v
    det = H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
    rhs = grid.integrate(phi.value(f.Dv) * det)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))


def degree_pairing(state: FieldState, phi) -> float:
    """Discrete ``int_B1 phi(Dv) det D^2 v dx`` using the grid derivative operators."""
    Dv = gradient_op(state)
    return state.grid.integrate(phi.value(Dv) * gauss_curvature(state))


class WeakIdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    discrepancy: float
    strain_l2: float


def _cone_outer_terms(trace: ConeTrace, phi, r_outer: float, n_r: int, n_t: int):
    """Contributions of the cone extension on ``1 < |x| < r_outer``."""
    r, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (r_outer - 1.0) * r + 0.5 * (r_outer + 1.0)
    wr = 0.5 * (r_outer - 1.0) * wr
    t = 2 * np.pi * np.arange(n_t) / n_t
    R, T = np.meshgrid(r, t, indexing="ij")
    W = (wr * r)[:, None] * (2 * np.pi / n_t)
    b0 = eval_beta(trace.beta, T)
    b1 = eval_beta(trace.beta, T, 1)
    e_rr = trace.gamma(T) + 0.5 * b0 * b0
    e_rt = 0.5 * trace.gamma(T, 1) + 0.5 * b0 * b1
    e_tt = trace.gamma(T) + trace.zeta(T, 1) + 0.5 * b1 * b1
    c, s = np.cos(T), np.sin(T)
    pts = np.stack([R * c, R * s], axis=-1)
    Hphi = phi.hessian(pts)
    # rotate D^2 phi to the polar frame, contract with the cofactor
    prr = c * c * Hphi[..., 0, 0] + 2 * s * c * Hphi[..., 0, 1] + s * s * Hphi[..., 1, 1]
    ptt = s * s * Hphi[..., 0, 0] - 2 * s * c * Hphi[..., 0, 1] + c * c * Hphi[..., 1, 1]
    prt = -s * c * Hphi[..., 0, 0] + (c * c - s * s) * Hphi[..., 0, 1] + s * c * Hphi[..., 1, 1]
    contr = e_rr * ptt - 2 * e_rt * prt + e_tt * prr
    # the cone Hessian has rank one, so det D^2 v_beta = 0 off the tip
    return 0.0, float(np.sum(W * contr))


def weak_identity_check(state: FieldState, phi, r_outer: float = 2.0) -> WeakIdentityCheck:
    """``int det D^2 v phi`` against ``-int (sym Du + Dv (x) Dv / 2) : cof D^2 phi``.

    Integrals run over ``B_{r_outer}``: the grid covers ``B_1``, the exact cone
    extension covers the annulus outside.
    """
    g = state.grid
    P = g.points()
    det = gauss_curvature(state)
    lhs = g.integrate(det * phi.value(P))
    E = strain(state)
    Hphi = phi.hessian(P)
    contr = E[..., 0, 0] * Hphi[..., 1, 1] - 2 * E[..., 0, 1] * Hphi[..., 0, 1] + E[..., 1, 1] * Hphi[..., 0, 0]
    rhs = -g.integrate(contr)
    if state.bc.trace is not None and r_outer > 1.0:
        lo, ro = _cone_outer_terms(state.bc.trace, phi, r_outer, 16, max(64, g.n_theta))
        lhs += lo
        rhs -= ro
    strain_l2 = math.sqrt(g.integrate(np.sum(E * E, axis=(-2, -1))))
    return WeakIdentityCheck(lhs, rhs, lhs - rhs, strain_l2)


class ExponentTable(NamedTuple):
    p_prime: float
    alpha: float
    theta: float
    closing_exponent: float


def exponent_table(p: float) -> ExponentTable:
    """Interpolation exponents of the lower-bound argument and the identity they close."""
    if not 2.0 < p < 8.0 / 3.0:
        raise ValueError(f"p must lie in (2, 8/3), got {p}")
    p_prime = p / (p - 1.0)
    alpha = 2.0 / (3.0 * p - 4.0)
    theta = 1.0 - alpha
    closing = (6.0 - 4.0 * theta) / (3.0 - theta)
    if abs(closing - p_prime) > 1e-12:
        raise ArithmeticError(f"exponent identity fails at p={p}: {closing} != {p_prime}")
    return ExponentTable(p_prime, alpha, theta, closing)
