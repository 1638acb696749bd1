"""Graded polar tensor grid on the unit disk.

Nodes sit on rings ``r_0 < ... < r_{Nr-1} = 1`` at angles ``2 pi j / n``.
There is no node at the origin: the radial neighbour of ring 0 is the same
ring rotated by pi, i.e. the point at signed radius ``-r_0``. A ghost ring
at ``1 + dr`` carries the exact cone extension so that the clamped value and
slope conditions hold without penalties.

Radial derivatives use 3-point nonuniform stencils (exact on quadratics in
r). Angular derivatives use 5-point periodic stencils fitted to be exact on
harmonics of order <= 2, so that Cartesian polynomials of degree <= 2 are
differentiated exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import kernels
from .profile import ConeTrace, cone_fields


def angular_stencils(n: int):
    """Return ``(a1, a2)``, 5-point weights for d/dtheta and d^2/dtheta^2."""
    dt = 2 * np.pi / n
    offs = np.arange(-2, 3)
    # rows: 1, cos t, sin t, cos 2t, sin 2t evaluated at offsets (t = 0 centre)
    A = np.array(
        [np.ones(5), np.cos(offs * dt), np.sin(offs * dt), np.cos(2 * offs * dt), np.sin(2 * offs * dt)]
    )
    rhs1 = np.array([0.0, 0.0, 1.0, 0.0, 2.0])
    rhs2 = np.array([0.0, -1.0, 0.0, -4.0, 0.0])
    return np.linalg.solve(A, rhs1), np.linalg.solve(A, rhs2)


def radial_stencils(radii: np.ndarray, ghost_radius: float):
    """3-point weights ``(d1, d2)`` of shape ``(Nr, 3)`` for (lower, centre, upper)."""
    ext = np.concatenate([[-radii[0]], radii, [ghost_radius]])
    hl = ext[1:-1] - ext[:-2]
    hr = ext[2:] - ext[1:-1]
    d1 = np.stack([-hr / (hl * (hl + hr)), (hr - hl) / (hl * hr), hl / (hr * (hl + hr))], axis=1)
    d2 = np.stack([2 / (hl * (hl + hr)), -2 / (hl * hr), 2 / (hr * (hl + hr))], axis=1)
    return d1, d2


@dataclass(frozen=True, eq=False)
class DiskGrid:
    radii: np.ndarray
    n_theta: int
    grading_ratio: float
    ghost_radius: float
    theta: np.ndarray
    cos: np.ndarray
    sin: np.ndarray
    ring_weights: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray

    @property
    def Nr(self) -> int:
        return self.radii.size

    @property
    def shape(self):
        return (self.Nr, self.n_theta)

    @property
    def r_min(self) -> float:
        return float(self.radii[0])

    @property
    def quad_weights(self) -> np.ndarray:
        return np.broadcast_to(self.ring_weights[:, None], self.shape)

    @property
    def min_spacing(self) -> float:
        return float(min(np.min(np.diff(self.radii)), 2 * self.radii[0]))

    def points(self, radii=None) -> np.ndarray:
        """Cartesian node coordinates, shape ``(len(radii), n, 2)``."""
        r = self.radii if radii is None else np.atleast_1d(radii)
        return np.stack([np.outer(r, self.cos), np.outer(r, self.sin)], axis=-1)

    def integrate(self, f) -> float:
        return float(np.sum(self.ring_weights[:, None] * np.broadcast_to(f, self.shape)))


def _graded_radii(Nr: int, ratio: float, r_min: float | None):
    m = Nr - 1  # number of cells between r_min and 1
    geo = float(m) if ratio == 1.0 else (ratio**m - 1) / (ratio - 1)
    if r_min is None:
        d = 1.0 / (0.5 + geo)  # half-offset innermost ring
        r_min = 0.5 * d
    else:
        d = (1.0 - r_min) / geo
    cells = d * ratio ** np.arange(m)
    radii = np.concatenate([[r_min], r_min + np.cumsum(cells)])
    radii[-1] = 1.0
    return radii


def build_grid(Nr: int, n_theta: int, grading_ratio: float = 1.0, r_min: float | None = None) -> DiskGrid:
    """Geometrically graded polar grid; ``r_min=None`` selects the half-offset placement."""
    if Nr < 8 or n_theta < 16 or n_theta % 2:
        raise ValueError("need Nr >= 8 and an even n_theta >= 16")
    if grading_ratio < 1.0:
        raise ValueError("grading_ratio must be >= 1")
    if r_min is not None and not 0.0 < r_min < 1.0:
        raise ValueError("r_min must lie in (0, 1)")
    radii = _graded_radii(Nr, float(grading_ratio), r_min)
    return grid_from_radii(radii, n_theta, grading_ratio)


def grid_from_radii(radii, n_theta: int, grading_ratio: float = 1.0) -> DiskGrid:
    """Grid on arbitrary ring radii ending at 1 (used for coarsened grids)."""
    radii = np.asarray(radii, dtype=float)
    Nr = radii.size
    if Nr < 2 or n_theta < 8 or n_theta % 2:
        raise ValueError("need at least 2 rings and an even n_theta >= 8")
    if radii[0] <= 0 or radii[-1] != 1.0 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must increase strictly from a positive value to 1")
    dr_last = radii[-1] - radii[-2]
    ghost = 1.0 + dr_last
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    dtheta = 2 * np.pi / n_theta
    trap = np.empty(Nr)
    trap[1:-1] = 0.5 * (radii[2:] - radii[:-2])
    trap[0] = 0.5 * (radii[1] - radii[0])
    trap[-1] = 0.5 * dr_last
    ring_w = dtheta * radii * trap
    ring_w[0] += np.pi * radii[0] ** 2 / n_theta  # pole closure
    d1, d2 = radial_stencils(radii, ghost)
    a1, a2 = angular_stencils(n_theta)
    return DiskGrid(
        radii=radii,
        n_theta=int(n_theta),
        grading_ratio=float(grading_ratio),
        ghost_radius=float(ghost),
        theta=theta,
        cos=np.cos(theta),
        sin=np.sin(theta),
        ring_weights=ring_w,
        d1=d1,
        d2=d2,
        a1=a1,
        a2=a2,
    )


def grading_for_core(Nr: int, finest: float) -> float:
    """Grading ratio whose half-offset grid has innermost cell ``finest``."""
    m = Nr - 1
    if finest * (m + 0.5) >= 1.0:
        return 1.0
    f = lambda q: finest * (0.5 + (q**m - 1) / (q - 1)) - 1.0  # noqa: E731
    return brentq(f, 1.0 + 1e-12, 2.0)


def sweep_grid(Nr: int, n_theta: int, h_min: float, p: float, cells_per_core: float = 64.0) -> DiskGrid:
    """Grid whose finest radial cell is ``h_min**(p'/2) / cells_per_core``."""
    pp = p / (p - 1)
    finest = h_min ** (pp / 2) / cells_per_core
    return build_grid(Nr, n_theta, grading_for_core(Nr, finest))


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Pinned values on the boundary ring (``r = 1``) and the ghost ring."""

    boundary: np.ndarray  # (3, n): u1, u2, v at r = 1
    ghost: np.ndarray  # (3, n) at the ghost radius
    trace: ConeTrace | None = None

    @classmethod
    def from_trace(cls, grid: DiskGrid, trace: ConeTrace) -> "BoundaryCondition":
        pts = grid.points([1.0, grid.ghost_radius])
        f = cone_fields(trace, pts)
        vals = np.stack([f.u[..., 0], f.u[..., 1], f.v])  # (3, 2, n)
        return cls(vals[:, 0].copy(), vals[:, 1].copy(), trace)

    @classmethod
    def from_function(cls, grid: DiskGrid, fn) -> "BoundaryCondition":
        """``fn(x, y) -> (u1, u2, v)`` gives the pinned values (test hook)."""
        pts = grid.points([1.0, grid.ghost_radius])
        vals = np.stack([np.broadcast_to(a, pts.shape[:-1]) for a in fn(pts[..., 0], pts[..., 1])])
        return cls(vals[:, 0].copy(), vals[:, 1].copy(), None)

    @property
    def ghost_u(self):
        return self.ghost[:2]

    @property
    def ghost_v(self):
        return self.ghost[2]


FIELDS = ("u1", "u2", "v")


@dataclass(frozen=True, eq=False)
class FieldState:
    u1: np.ndarray
    u2: np.ndarray
    v: np.ndarray
    grid: DiskGrid
    bc: BoundaryCondition

    def __post_init__(self):
        for k, name in enumerate(FIELDS):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {a.shape}, expected {self.grid.shape}")
            a[-1] = self.bc.boundary[k]
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, a)

    @classmethod
    def from_function(cls, grid: DiskGrid, bc: BoundaryCondition, fn) -> "FieldState":
        pts = grid.points()
        vals = fn(pts[..., 0], pts[..., 1])
        return cls(*(np.broadcast_to(a, grid.shape) for a in vals), grid=grid, bc=bc)

    def extended(self, name: str) -> np.ndarray:
        k = FIELDS.index(name)
        return np.vstack([getattr(self, name), self.bc.ghost[k][None, :]])

    @property
    def n_dofs(self) -> int:
        return 3 * (self.grid.Nr - 1) * self.grid.n_theta

    def dofs(self) -> np.ndarray:
        return np.concatenate([getattr(self, name)[:-1].ravel() for name in FIELDS])

    def with_dofs(self, x: np.ndarray) -> "FieldState":
        m = (self.grid.Nr - 1) * self.grid.n_theta
        arrays = {}
        for k, name in enumerate(FIELDS):
            a = getattr(self, name).copy()
            a[:-1] = x[k * m : (k + 1) * m].reshape(self.grid.Nr - 1, self.grid.n_theta)
            arrays[name] = a
        return replace(self, **arrays)

    def dof_weights(self) -> np.ndarray:
        w = np.repeat(self.grid.ring_weights[:-1], self.grid.n_theta)
        return np.tile(w, 3)


def _partials(state: FieldState, name: str):
    g = state.grid
    return kernels.polar_partials(state.extended(name), g.d1, g.d2, g.a1, g.a2)


def cartesian_derivatives(state: FieldState, name: str):
    """``(fx, fy, fxx, fxy, fyy)`` of one field at every grid node."""
    g = state.grid
    return kernels.cartesian(*_partials(state, name), g.radii[:, None], g.cos, g.sin)


def gradient_op(state: FieldState, field: str = "v") -> np.ndarray:
    fx, fy, *_ = cartesian_derivatives(state, field)
    return np.stack([fx, fy], axis=-1)


def hessian_op(state: FieldState, field: str = "v") -> np.ndarray:
    _, _, fxx, fxy, fyy = cartesian_derivatives(state, field)
    return np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], -2)


SNAPSHOT_COLUMNS = ("r", "theta", "u1", "u2", "v")


def snapshot_text(state: FieldState) -> str:
    """Flat CSV ``r, theta, u1, u2, v`` with round-trip float formatting."""
    g = state.grid
    R, T = np.meshgrid(g.radii, g.theta, indexing="ij")
    cols = (R, T, state.u1, state.u2, state.v)
    lines = [",".join(SNAPSHOT_COLUMNS)]
    for row in zip(*(c.ravel().tolist() for c in cols)):
        lines.append(",".join(repr(x) for x in row))
    return "\n".join(lines) + "\n"


def write_snapshot(state: FieldState, path) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, snapshot_text(state))


def read_snapshot(path, grid: DiskGrid, bc: BoundaryCondition) -> FieldState:
    """Load a snapshot written on ``grid``; node coordinates must match."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.Nr * grid.n_theta, 5):
        raise ValueError(f"snapshot has {data.shape[0]} rows, grid has {grid.Nr * grid.n_theta} nodes")
    R, T = np.meshgrid(grid.radii, grid.theta, indexing="ij")
    if np.max(np.abs(data[:, 0] - R.ravel())) > 1e-12 or np.max(np.abs(data[:, 1] - T.ravel())) > 1e-12:
        raise ValueError("snapshot nodes do not match the grid")
    u1, u2, v = (data[:, k].reshape(grid.shape) for k in (2, 3, 4))
    return FieldState(u1, u2, v, grid=grid, bc=bc)


def core_grid(Nr: int, n_theta: int, core_radius: float, grading_ratio: float = 1.04, inner_fraction: float = 0.4) -> DiskGrid:
    """Grid resolving a single smoothed core: first ring inside the flat part at ``inner_fraction * R``."""
    return build_grid(Nr, n_theta, grading_ratio, inner_fraction * core_radius)


def can_coarsen(grid: DiskGrid) -> bool:
    return grid.Nr >= 8 and grid.n_theta % 4 == 0 and grid.n_theta >= 16


def coarsen(grid: DiskGrid) -> DiskGrid:
    """Every other ring (keeping r = 1) and every other angle."""
    if not can_coarsen(grid):
        raise ValueError("grid too small to coarsen")
    return grid_from_radii(grid.radii[(grid.Nr - 1) % 2 :: 2], grid.n_theta // 2, grid.grading_ratio**2)


def restrict(values: np.ndarray, grid: DiskGrid) -> np.ndarray:
    """Injection of nodal values onto :func:`coarsen` of ``grid``."""
    return np.array(values[(grid.Nr - 1) % 2 :: 2, ::2])


def prolong(values: np.ndarray, ghost: np.ndarray, coarse: DiskGrid, fine: DiskGrid) -> np.ndarray:
    """Interpolate coarse nodal values (with their ghost ring) to the nodes of ``fine``.

    Trigonometric interpolation in theta, then a cubic spline in the signed
    radius, where negative radii read the ring rotated by pi.
    """
    n_c, n_f = coarse.n_theta, fine.n_theta
    ext = np.vstack([values, ghost[None, :]])
    spec = np.fft.rfft(ext, axis=1)
    if n_f > n_c:
        spec[:, -1] *= 0.5  # split the coarse Nyquist mode symmetrically
    on_fine = np.fft.irfft(spec, n=n_f, axis=1) * (n_f / n_c)
    r_ext = np.concatenate([coarse.radii, [coarse.ghost_radius]])
    half = n_f // 2
    mirrored = np.roll(on_fine[:-1], -half, axis=1)[::-1]  # row k: ring Nr-1-k at theta + pi
    s = np.concatenate([-coarse.radii[::-1], r_ext])
    data = np.vstack([mirrored, on_fine])
    return CubicSpline(s, data, axis=0)(fine.radii)
