"""Smoothed cone: the cone v_beta cut off at radius h^(p'/2).

The in-plane field stays the exact u_beta; only v is smoothed,

    v_{beta,h}(x) = eta(|x| / R) |x| beta(x/|x|),   R = h^(p'/2),

with a C^2 quintic cutoff eta. All derivatives are closed form, and the
energy is evaluated by panel Gauss-Legendre quadrature in r (breaks at R/2
and R, log-spaced panels outside) times the periodic trapezoid rule in theta.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .energy import EnergyBreakdown, check_exponent
from .errors import UnresolvedCore
from .grid import BoundaryCondition, DiskGrid, FieldState
from .profile import ConeTrace, eval_beta


def dual_exponent(p: float) -> float:
    if not p > 1:
        raise ValueError(f"dual exponent needs p > 1, got {p}")
    return p / (p - 1.0)


def eta(t, order: int = 0):
    """Quintic C^2 cutoff: 0 on [0, 1/2], 1 on [1, inf), smoothstep in between."""
    t = np.asarray(t, dtype=float)
    s = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    inside = (t > 0.5) & (t < 1.0)
    if order == 0:
        return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
    if order == 1:
        return np.where(inside, 2.0 * 30.0 * s * s * (1.0 - s) ** 2, 0.0)
    if order == 2:
        return np.where(inside, 4.0 * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s), 0.0)
    raise ValueError("order must be 0, 1 or 2")


@dataclass(frozen=True, eq=False)
class SmoothedCone:
    trace: ConeTrace
    h: float
    p: float

    def __post_init__(self):
        if not 0.0 < self.h < 1.0:
            raise ValueError("h must lie in (0, 1)")
        check_exponent(self.p)

    @property
    def p_dual(self) -> float:
        return dual_exponent(self.p)

    @property
    def core_radius(self) -> float:
        return self.h ** (self.p_dual / 2.0)


def _radial_profile(r, R):
    """g(r) = r eta(r/R) with g', g''."""
    t = r / R
    e0, e1, e2 = eta(t), eta(t, 1), eta(t, 2)
    return r * e0, e0 + t * e1, 2.0 * e1 / R + t * e2 / R


class PolarParts(NamedTuple):
    """Frame-independent pieces at (r, theta), in the (e_r, e_theta) basis."""

    Dv: np.ndarray  # (..., 2)
    D2v: np.ndarray  # (..., 2, 2)
    strain_u: np.ndarray  # sym Du_beta, (..., 2, 2)
    v: np.ndarray


def _polar_parts(sc: SmoothedCone, r, t) -> PolarParts:
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    b0 = eval_beta(sc.trace.beta, t)
    b1 = eval_beta(sc.trace.beta, t, 1)
    b2 = eval_beta(sc.trace.beta, t, 2)
    g0, g1, g2 = _radial_profile(r, sc.core_radius)
    safe_r = np.where(r > 0, r, 1.0)
    g_over_r = np.where(r > 0, g0 / safe_r, 0.0)
    Dv = np.stack([g1 * b0, g_over_r * b1], -1)
    Hrr = g2 * b0
    Hrt = np.where(r > 0, (g1 - g_over_r) / safe_r, 0.0) * b1
    Htt = np.where(r > 0, (g1 * b0 + g_over_r * b2) / safe_r, 0.0)
    D2v = np.stack([np.stack([Hrr, Hrt], -1), np.stack([Hrt, Htt], -1)], -2)
    gam = sc.trace.gamma(t)
    dgam = sc.trace.gamma(t, 1)
    dzeta = sc.trace.zeta(t, 1)
    Eu = np.stack(
        [np.stack([gam, 0.5 * dgam], -1), np.stack([0.5 * dgam, gam + dzeta], -1)], -2
    ) * np.ones_like(r)[..., None, None]
    return PolarParts(Dv, D2v, Eu, g0 * b0)


class AnsatzFields(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    Dv: np.ndarray
    D2v: np.ndarray


def ansatz_fields(sc: SmoothedCone, x) -> AnsatzFields:
    """Cartesian ``u, v, Dv, D2v`` of the smoothed cone at points ``x`` (``(..., 2)``)."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    t = np.arctan2(x[..., 1], x[..., 0])
    parts = _polar_parts(sc, r, t)
    c, s = np.cos(t), np.sin(t)
    Q = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)  # columns e_r, e_theta
    Dv = np.einsum("...ij,...j->...i", Q, parts.Dv)
    D2v = np.einsum("...ik,...kl,...jl->...ij", Q, parts.D2v, Q)
    gam = sc.trace.gamma(t)
    zet = sc.trace.zeta(t)
    u = r[..., None] * (np.asarray(gam)[..., None] * np.stack([c, s], -1) + np.asarray(zet)[..., None] * np.stack([-s, c], -1))
    return AnsatzFields(u, parts.v, Dv, D2v)


def membrane_density(sc: SmoothedCone, r, t):
    parts = _polar_parts(sc, r, t)
    E = parts.strain_u + 0.5 * parts.Dv[..., :, None] * parts.Dv[..., None, :]
    return np.sum(E * E, axis=(-2, -1))


def bending_density(sc: SmoothedCone, r, t):
    """|D^2 v_{beta,h}|_F^p."""
    H = _polar_parts(sc, r, t).D2v
    return np.sum(H * H, axis=(-2, -1)) ** (sc.p / 2.0)


@dataclass(frozen=True)
class QuadratureSpec:
    n_theta: int = 256
    core_panels: int = 8
    outer_panels: int = 48
    order: int = 8

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.n_theta, 2 * self.core_panels, 2 * self.outer_panels, self.order)


def _panel_nodes(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def radial_rule(R: float, quad: QuadratureSpec):
    """Nodes/weights for dr on [R/2, 1]; raises if the core is under-resolved."""
    core_edges = np.linspace(0.5 * R, R, quad.core_panels + 1)
    outer_edges = np.geomspace(R, 1.0, quad.outer_panels + 1) if R < 1 else np.array([1.0])
    spacing = max(
        (core_edges[1] - core_edges[0]) / quad.order,
        (outer_edges[1] - outer_edges[0]) / quad.order if outer_edges.size > 1 else 0.0,
    )
    if spacing > R / 32:
        raise UnresolvedCore(f"radial node spacing {spacing:.3e} exceeds core_radius/32 = {R / 32:.3e}")
    nodes, weights = [], []
    for edges in (core_edges, outer_edges):
        if edges.size > 1:
            n_, w_ = _panel_nodes(edges, quad.order)
            nodes.append(n_)
            weights.append(w_)
    return np.concatenate(nodes), np.concatenate(weights)


def ansatz_energy(sc: SmoothedCone, quad: QuadratureSpec | None = None) -> EnergyBreakdown:
    quad = quad or QuadratureSpec()
    R = sc.core_radius
    r, wr = radial_rule(R, quad)
    n_t = max(quad.n_theta, 16 * sc.trace.beta.K)
    t = 2 * np.pi * np.arange(n_t) / n_t
    dt = 2 * np.pi / n_t
    rr, tt = np.meshgrid(r, t, indexing="ij")
    W = (wr * r)[:, None] * dt
    membrane = float(np.sum(W * membrane_density(sc, rr, tt)))
    # inner disk r < R/2: v = 0 there, integrand is 0-homogeneous
    inner = membrane_density(sc, np.full_like(t, 0.25 * R), t)
    membrane += float(np.sum(inner) * dt) * (0.5 * R) ** 2 / 2.0
    bending_raw = float(np.sum(W * bending_density(sc, rr, tt)))
    return EnergyBreakdown.from_parts(membrane, bending_raw, sc.h, sc.p)


def ansatz_state(sc: SmoothedCone, grid: DiskGrid) -> FieldState:
    """Sample the smoothed cone on the grid nodes; pins come from the exact cone."""
    f = ansatz_fields(sc, grid.points())
    bc = BoundaryCondition.from_trace(grid, sc.trace)
    return FieldState(f.u[..., 0], f.u[..., 1], f.v, grid=grid, bc=bc)


class SweepRow(NamedTuple):
    h: float
    core_radius: float
    breakdown: EnergyBreakdown

    def as_row(self) -> dict:
        return {"h": self.h, "core_radius": self.core_radius, **self.breakdown.as_row()}


def ansatz_sweep(trace: ConeTrace, p: float, hs, quad: QuadratureSpec | None = None, threads: int = 1):
    """Evaluate the ansatz energy for each ``h``; results keep the order of ``hs``."""

    def one(h):
        sc = SmoothedCone(trace, float(h), p)
        return SweepRow(float(h), sc.core_radius, ansatz_energy(sc, quad))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, hs))
    return [one(h) for h in hs]
