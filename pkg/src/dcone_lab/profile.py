"""Boundary angle profiles and the conical fields they generate.

A profile is a real trigonometric polynomial

    beta(t) = a_0 + sum_{k=1..K} a_k cos(k t) + b_k sin(k t)

on the circle. From it we build the radial in-plane trace gamma = -beta^2/2,
the tangential trace zeta(t) = 1/2 int_0^t (beta^2 - beta'^2) ds, and the
1-homogeneous cone u_beta, v_beta on the plane.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import AdmissibilityViolation, NonPeriodicZeta, OriginUndefined

MAX_HARMONIC = 32
TOL_CONDITION1 = 1e-9
TOL_CONDITION2 = 1e-6
ZETA_CLOSURE_TOL = 1e-8

PRESETS = {
    "paper-default": ((np.sqrt(1.5), 0.0, 1.0), ()),
    "unit-circle": ((1.0,), ()),
    "sine": ((0.0,), (1.0,)),
    "zero": ((0.0,), ()),
}


@dataclass(frozen=True)
class BoundaryProfile:
    """Fourier coefficients of beta: ``cos_coeffs = (a_0, ..., a_K)``, ``sin_coeffs = (b_1, ..., b_K)``."""

    cos_coeffs: tuple = (0.0,)
    sin_coeffs: tuple = ()

    def __post_init__(self):
        a = tuple(float(c) for c in self.cos_coeffs) or (0.0,)
        b = tuple(float(c) for c in self.sin_coeffs)
        if not all(np.isfinite(a)) or not all(np.isfinite(b)):
            raise ValueError("profile coefficients must be finite")
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)
        if self.K > MAX_HARMONIC:
            raise ValueError(f"at most {MAX_HARMONIC} harmonics supported, got {self.K}")

    @classmethod
    def preset(cls, name: str) -> "BoundaryProfile":
        try:
            a, b = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown profile preset {name!r}; known: {sorted(PRESETS)}") from None
        return cls(a, b)

    @property
    def K(self) -> int:
        return max(len(self.cos_coeffs) - 1, len(self.sin_coeffs))

    def dense_coeffs(self):
        """Return ``(a, b)`` as arrays of length K+1; ``b[0]`` is always 0."""
        n = self.K + 1
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.cos_coeffs)] = self.cos_coeffs
        b[1 : len(self.sin_coeffs) + 1] = self.sin_coeffs
        return a, b

    def __call__(self, t, order: int = 0):
        return eval_beta(self, t, order)


def eval_beta(profile: BoundaryProfile, t, order: int = 0):
    """Evaluate beta or its first/second derivative by term-wise differentiation."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    a, b = profile.dense_coeffs()
    k = np.arange(a.size)
    t = np.asarray(t, dtype=float)
    kt = np.multiply.outer(t, k)
    c, s = np.cos(kt), np.sin(kt)
    if order == 0:
        out = c @ a + s @ b
    elif order == 1:
        out = s @ (-k * a) + c @ (k * b)
    else:
        out = -(c @ (k**2 * a) + s @ (k**2 * b))
    return out if out.ndim else float(out)


def quadrature_nodes(profile: BoundaryProfile) -> np.ndarray:
    n = max(256, 16 * profile.K)
    return 2 * np.pi * np.arange(n) / n


class AdmissibilityReport(NamedTuple):
    condition1: float
    condition1_closed: float
    condition2: float
    admissible: bool

    def violated(self) -> list:
        out = []
        if abs(self.condition1) > TOL_CONDITION1:
            out.append("condition1 (int beta^2 - beta'^2 != 0)")
        if not self.condition2 > TOL_CONDITION2:
            out.append("condition2 (int |beta + beta''| == 0)")
        return out


def condition1_closed_form(profile: BoundaryProfile) -> float:
    a, b = profile.dense_coeffs()
    k = np.arange(a.size)
    return float(2 * np.pi * a[0] ** 2 + np.pi * np.sum(((1 - k**2) * (a**2 + b**2))[1:]))


def check_admissibility(profile: BoundaryProfile, strict: bool = False) -> AdmissibilityReport:
    t = quadrature_nodes(profile)
    dt = 2 * np.pi / t.size
    beta = eval_beta(profile, t)
    dbeta = eval_beta(profile, t, 1)
    ddbeta = eval_beta(profile, t, 2)
    c1 = float(np.sum(beta**2 - dbeta**2) * dt)
    c1_closed = condition1_closed_form(profile)
    if abs(c1 - c1_closed) > 1e-10 * max(1.0, abs(c1_closed)):
        raise AssertionError(f"Parseval cross-check failed: {c1} vs {c1_closed}")
    c2 = float(np.sum(np.abs(beta + ddbeta)) * dt)
    ok = abs(c1) <= TOL_CONDITION1 and c2 > TOL_CONDITION2
    report = AdmissibilityReport(c1, c1_closed, c2, ok)
    if strict and not ok:
        raise AdmissibilityViolation(c1, c2, "inadmissible profile: " + "; ".join(report.violated()))
    return report


@dataclass(frozen=True, eq=False)
class ConeTrace:
    """Boundary traces gamma, zeta of the cone built on ``beta``.

    ``zeta`` is stored through the Fourier coefficients of its derivative
    ``(beta^2 - beta'^2)/2``; the constant mode must vanish (closure).
    """

    beta: BoundaryProfile
    _dz_cos: np.ndarray = field(repr=False, default=None)
    _dz_sin: np.ndarray = field(repr=False, default=None)

    def gamma(self, t, order: int = 0):
        b0 = eval_beta(self.beta, t)
        if order == 0:
            return -0.5 * b0**2
        b1 = eval_beta(self.beta, t, 1)
        if order == 1:
            return -b0 * b1
        raise ValueError("order must be 0 or 1")

    def zeta(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        c, s = self._dz_cos, self._dz_sin
        k = np.arange(c.size)
        kt = np.multiply.outer(t, k)
        if order == 1:
            out = np.cos(kt) @ c + np.sin(kt) @ s
        elif order == 0:
            kk = np.where(k == 0, 1, k)
            # antiderivative normalised to zeta(0) = 0
            out = c[0] * t + np.sin(kt)[..., 1:] @ (c[1:] / kk[1:]) + (1 - np.cos(kt))[..., 1:] @ (s[1:] / kk[1:])
        else:
            raise ValueError("order must be 0 or 1")
        return out if np.ndim(out) else float(out)


def _zeta_derivative_coeffs(profile: BoundaryProfile):
    """Exact Fourier coefficients of (beta^2 - beta'^2)/2 from FFT of samples."""
    n = max(256, 16 * profile.K)
    t = 2 * np.pi * np.arange(n) / n
    g = 0.5 * (eval_beta(profile, t) ** 2 - eval_beta(profile, t, 1) ** 2)
    F = np.fft.rfft(g) / n
    m = 2 * profile.K + 1
    c = np.zeros(m)
    s = np.zeros(m)
    c[0] = F[0].real
    c[1:] = 2 * F[1:m].real
    s[1:] = -2 * F[1:m].imag
    return c, s


def build_trace(profile: BoundaryProfile) -> ConeTrace:
    c, s = _zeta_derivative_coeffs(profile)
    trace = ConeTrace(profile, c, s)
    gap = abs(trace.zeta(2 * np.pi) - trace.zeta(0.0))
    if gap > ZETA_CLOSURE_TOL:
        raise NonPeriodicZeta(gap)
    # drop the roundoff-level mean so zeta is exactly periodic
    c = c.copy()
    c[0] = 0.0
    return ConeTrace(profile, c, s)


class ConeFields(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    Dv: np.ndarray


def cone_fields(trace: ConeTrace, x) -> ConeFields:
    """u_beta, v_beta and Dv_beta at points ``x`` (shape ``(..., 2)``)."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    if np.any(r == 0):
        raise OriginUndefined("cone fields are undefined at the origin")
    t = np.arctan2(x[..., 1], x[..., 0])
    c, s = np.cos(t), np.sin(t)
    e_r = np.stack([c, s], axis=-1)
    e_t = np.stack([-s, c], axis=-1)
    g = trace.gamma(t)
    z = trace.zeta(t)
    b0 = eval_beta(trace.beta, t)
    b1 = eval_beta(trace.beta, t, 1)
    u = r[..., None] * (np.asarray(g)[..., None] * e_r + np.asarray(z)[..., None] * e_t)
    v = r * b0
    Dv = np.asarray(b0)[..., None] * e_r + np.asarray(b1)[..., None] * e_t
    return ConeFields(u, v, Dv)
