"""Discrete von Karman energy with L^p bending and its exact gradient.

    I_{h,p}(u, v) = sum_n w_n |sym Du + 1/2 Dv (x) Dv|_F^2
                    + h^2 (sum_n w_n |D^2 v|_F^p)^(2/p)

The L^p norm sits inside the square, so the bending term couples all nodes
through the outer power; the gradient chains through it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateBending
from .grid import FieldState, cartesian_derivatives

P_RANGE = (2.0, 8.0 / 3.0)


@dataclass(frozen=True)
class EnergyBreakdown:
    membrane: float
    bending_raw: float
    bending: float
    total: float
    h: float
    p: float

    @classmethod
    def from_parts(cls, membrane: float, bending_raw: float, h: float, p: float) -> "EnergyBreakdown":
        bending = h * h * bending_raw ** (2.0 / p)
        return cls(float(membrane), float(bending_raw), float(bending), float(membrane + bending), float(h), float(p))

    def as_row(self) -> dict:
        return {
            "E_membrane": self.membrane,
            "E_bending_raw": self.bending_raw,
            "E_bending": self.bending,
            "E_total": self.total,
        }


def check_exponent(p: float) -> bool:
    """Raise on ``p <= 1``; return False (and warn) outside the proven range (2, 8/3)."""
    if not p > 1.0:
        raise ValueError(f"bending exponent p must exceed 1, got {p}")
    inside = P_RANGE[0] < p < P_RANGE[1]
    if not inside:
        warnings.warn(f"p = {p} lies outside (2, 8/3); the scaling law is not proven there", stacklevel=3)
    return inside


def strain(state: FieldState) -> np.ndarray:
    """sym Du + 1/2 Dv (x) Dv at every node, shape ``(Nr, n, 2, 2)``."""
    u1x, u1y, *_ = cartesian_derivatives(state, "u1")
    u2x, u2y, *_ = cartesian_derivatives(state, "u2")
    vx, vy, *_ = cartesian_derivatives(state, "v")
    exx = u1x + 0.5 * vx * vx
    eyy = u2y + 0.5 * vy * vy
    exy = 0.5 * (u1y + u2x) + 0.5 * vx * vy
    return np.stack([np.stack([exx, exy], -1), np.stack([exy, eyy], -1)], -2)


def _kernel_args(state: FieldState):
    g = state.grid
    return (
        state.extended("u1"),
        state.extended("u2"),
        state.extended("v"),
        g.radii,
        g.cos,
        g.sin,
        g.ring_weights,
        g.d1,
        g.d2,
        g.a1,
        g.a2,
    )


def energy(state: FieldState, h: float, p: float) -> EnergyBreakdown:
    if not h > 0:
        raise ValueError("thickness h must be positive")
    check_exponent(p)
    membrane, S, *_ = kernels.energy_and_gradient(*_kernel_args(state), h, p)
    return EnergyBreakdown.from_parts(membrane, S, h, p)


def energy_and_gradient(state: FieldState, h: float, p: float, strict: bool = False):
    """Energy breakdown and gradient w.r.t. the free DOFs (``state.dofs()`` layout).

    The gradient on pinned rows (boundary ring, ghost ring) is dropped. When
    the bending integral vanishes the outer power contributes nothing; with
    ``strict=True`` that case raises :class:`DegenerateBending` instead.
    """
    membrane, S, g1, g2, gv = kernels.energy_and_gradient(*_kernel_args(state), h, p)
    if strict and S < 1e-300:
        raise DegenerateBending("bending integral below 1e-300")
    br = EnergyBreakdown.from_parts(membrane, S, h, p)
    grad = np.concatenate([g1[:-2].ravel(), g2[:-2].ravel(), gv[:-2].ravel()])
    return br, grad


def energy_gradient(state: FieldState, h: float, p: float) -> np.ndarray:
    """Per-node gradient ``(Nr, n, 3)`` with exact zeros on the boundary ring."""
    _, grad = energy_and_gradient(state, h, p)
    g = state.grid
    m = (g.Nr - 1) * g.n_theta
    out = np.zeros(g.shape + (3,))
    for k in range(3):
        out[:-1, :, k] = grad[k * m : (k + 1) * m].reshape(g.Nr - 1, g.n_theta)
    return out
