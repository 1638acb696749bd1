"""Limited-memory quasi-Newton descent on the discrete energy, plus h-continuation.

The two-loop recursion runs in the metric of the quadrature weights (initial
inverse Hessian ``gamma * W^-1``), which makes the search direction an
approximation of the variational derivative rather than of the raw nodal
gradient and keeps step lengths comparable across graded rings.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .ansatz import SmoothedCone, ansatz_state, dual_exponent
from .energy import EnergyBreakdown, energy, energy_and_gradient
from .errors import LineSearchFailure
from .io import write_csv, write_json
from .grid import (
    FIELDS,
    BoundaryCondition,
    DiskGrid,
    FieldState,
    can_coarsen,
    cartesian_derivatives,
    coarsen,
    prolong,
    restrict,
)
from .profile import BoundaryProfile, ConeTrace, build_trace, check_admissibility

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinimizeConfig:
    max_iters: int = 3000
    grad_tol: float = 1e-7
    memory: int = 10
    ls_shrink: float = 0.5
    ls_armijo: float = 1e-4
    h_schedule: tuple = (0.1, 0.05, 0.025, 0.0125)
    max_shrinks: int = 60
    first_step: float = 1e-2
    log_every: int = 100
    precond_refresh: int = 200
    stall_window: int = 500
    stall_rtol: float = 1e-6
    levels: int = 3
    coarse_iters: int = 3000
    perturbed_starts: int = 0
    perturb_scale: float = 1e-3

    def __post_init__(self):
        hs = tuple(float(h) for h in self.h_schedule)
        object.__setattr__(self, "h_schedule", hs)
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("h_schedule must be strictly decreasing")
        if self.memory < 1 or self.max_iters < 0:
            raise ValueError("memory must be >= 1 and max_iters >= 0")
        if not (0 < self.ls_shrink < 1 and 0 < self.ls_armijo < 1):
            raise ValueError("ls_shrink and ls_armijo must lie in (0, 1)")
        if self.levels < 1 or self.coarse_iters < 0 or self.precond_refresh < 0:
            raise ValueError("levels must be >= 1; coarse_iters and precond_refresh >= 0")
        if self.perturbed_starts < 0 or self.perturb_scale < 0:
            raise ValueError("perturbed_starts and perturb_scale must be >= 0")
        if self.stall_window < 0 or self.stall_rtol < 0:
            raise ValueError("stall_window and stall_rtol must be >= 0")


class LbfgsResult(NamedTuple):
    x: np.ndarray
    f: float
    g: np.ndarray
    iters: int
    converged: bool
    history: list  # (iter, f, grad_norm, step)
    message: str


def lbfgs(
    fun: Callable[[np.ndarray], tuple],
    x0: np.ndarray,
    cfg: MinimizeConfig,
    weights: np.ndarray | None = None,
    grad_norm: Callable[[float, np.ndarray], float] | None = None,
    tol: Callable[[float], float] | None = None,
    preconditioner: Callable[[np.ndarray], Callable[[np.ndarray], np.ndarray]] | None = None,
    refresh_every: int = 0,
) -> LbfgsResult:
    """Minimise ``fun(x) -> (f, g)`` from ``x0``.

    ``weights`` defines the metric (``None`` = Euclidean). Convergence is
    ``grad_norm(f, g) <= tol(f)``; both default to the weighted sup-norm and
    ``cfg.grad_tol``. Every accepted step satisfies the Armijo condition, so
    the recorded ``f`` sequence is strictly decreasing.

    ``preconditioner(x)`` may return an approximate inverse Hessian at ``x``;
    it then replaces ``gamma W^-1`` as the initial matrix of the recursion and
    is rebuilt every ``refresh_every`` iterations (memory is cleared then).
    """
    w = np.ones_like(x0) if weights is None else np.asarray(weights, dtype=float)
    winv = 1.0 / w
    grad_norm = grad_norm or (lambda f, g: float(np.max(np.abs(g) * winv)) if g.size else 0.0)
    tol = tol or (lambda f: cfg.grad_tol)

    x = np.array(x0, dtype=float)
    apply_h0 = preconditioner(x) if preconditioner is not None else None
    f, g = fun(x)
    gn = grad_norm(f, g)
    history = [(0, f, gn, 0.0)]
    pairs: deque = deque(maxlen=cfg.memory)
    it = 0
    reset_once = False
    message = "max_iters reached"
    converged = gn <= tol(f)
    if converged:
        message = "converged"

    while not converged and it < cfg.max_iters:
        if apply_h0 is not None and refresh_every and it and it % refresh_every == 0:
            apply_h0 = preconditioner(x)
            pairs.clear()
        # two-loop recursion with H0 = gamma W^-1 (or the preconditioner)
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(pairs):
            a = rho * s.dot(q)
            alphas.append(a)
            q -= a * y
        if apply_h0 is not None:
            d = apply_h0(q)
        elif pairs:
            s, y, _ = pairs[-1]
            d = s.dot(y) / y.dot(winv * y) * winv * q
        else:
            d = cfg.first_step / max(float(np.max(np.abs(winv * g))), 1e-300) * winv * q
        for (s, y, rho), a in zip(pairs, reversed(alphas)):
            b = rho * y.dot(d)
            d += (a - b) * s
        d = -d
        slope = g.dot(d)
        if not slope < 0:
            pairs.clear()
            d = -cfg.first_step / max(float(np.max(np.abs(winv * g))), 1e-300) * winv * g
            slope = g.dot(d)

        step = 1.0
        for _ in range(cfg.max_shrinks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + cfg.ls_armijo * step * slope and f_new < f:
                break
            step *= cfg.ls_shrink
        else:
            if pairs and not reset_once:
                # retry once from a steepest-descent direction
                pairs.clear()
                reset_once = True
                continue
            message = "line search failed"
            logger.warning("line search failed after %d shrinks at iter %d", cfg.max_shrinks, it)
            break

        reset_once = False
        s_vec = x_new - x
        y_vec = g_new - g
        sy = s_vec.dot(y_vec)
        if sy > 1e-16 * math.sqrt(s_vec.dot(s_vec) * y_vec.dot(y_vec)):
            pairs.append((s_vec, y_vec, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        it += 1
        gn = grad_norm(f, g)
        history.append((it, f, gn, step))
        if cfg.log_every and it % cfg.log_every == 0:
            logger.info("iter %d  E=%.10e  |g|=%.3e  step=%.3e", it, f, gn, step)
        else:
            logger.debug("iter %d  E=%.10e  |g|=%.3e  step=%.3e", it, f, gn, step)
        if gn <= tol(f):
            converged = True
            message = "converged"
        elif cfg.stall_window and it >= cfg.stall_window:
            if history[it - cfg.stall_window][1] - f <= cfg.stall_rtol * abs(f):
                message = "stalled"
                break

    return LbfgsResult(x, f, g, it, converged, history, message)


def jacobi_diagonal(state: FieldState, h: float, p: float, floor: float = 1e-2) -> np.ndarray:
    """Gauss-Newton estimate of the Hessian diagonal, in the ``dofs()`` layout.

    Each node's contribution is the squared stencil coefficient times the local
    curvature of the energy density (cross terms between polar partials are
    dropped). The bending factor ``|D^2 v|^(p-2)`` is floored at ``floor``
    times the L^p mean so flat regions keep a usable scale.
    """
    g = state.grid
    sq = [a * a for a in (g.d1, g.d2, g.a1, g.a2)]
    r = g.radii[:, None]
    w = g.ring_weights[:, None] * np.ones(g.shape)
    zero = np.zeros(g.shape)
    adj = kernels.numpy_backend.polar_partials_adjoint

    def grad_sq(c):  # sum_n c_n |d(Df)_n / df_j|^2
        return adj(c, c / r**2, zero, zero, zero, *sq)

    def hess_sq(c):  # sum_n c_n |d(D^2 f)_n / df_j|^2, polar-frame Frobenius
        return adj(c / r**2, 2 * c / r**4, c, 2 * c / r**2, c / r**4, *sq)

    vx, vy, vxx, vxy, vyy = cartesian_derivatives(state, "v")
    Hn = np.sqrt(vxx**2 + 2 * vxy**2 + vyy**2)
    S = float(np.sum(w * Hn**p))
    Hmean = (S / np.pi) ** (1.0 / p) if S > 0 else 1.0
    rho = np.maximum(Hn, floor * Hmean) ** (p - 2.0)
    kb = 2.0 * h * h * (p - 1.0) * max(S, 1e-300) ** (2.0 / p - 1.0)
    du = 2.0 * grad_sq(w)
    dv = 2.0 * grad_sq(w * (vx**2 + vy**2)) + kb * hess_sq(w * rho)
    diag = np.concatenate([du[:-2].ravel(), du[:-2].ravel(), dv[:-2].ravel()])
    wq = state.dof_weights()
    return np.maximum(diag, 1e-12 * float(np.max(diag / wq)) * wq)


class MinimizeResult(NamedTuple):
    state: FieldState
    breakdown: EnergyBreakdown
    iters: int
    converged: bool
    grad_norm: float
    history: list
    message: str
    coarse_iters: int = 0


def _descend(initial: FieldState, h: float, p: float, cfg: MinimizeConfig) -> LbfgsResult:
    weights = initial.dof_weights()

    def fun(x):
        br, g = energy_and_gradient(initial.with_dofs(x), h, p)
        return br.total, g

    def precondition(x):
        diag = jacobi_diagonal(initial.with_dofs(x), h, p)
        return lambda q: q / diag

    return lbfgs(
        fun,
        initial.dofs(),
        cfg,
        weights=weights,
        tol=lambda f: cfg.grad_tol * math.sqrt(max(f, 1e-300)),
        preconditioner=precondition,
        refresh_every=cfg.precond_refresh,
    )


def _coarse_correction(state: FieldState, h: float, p: float, cfg: MinimizeConfig):
    """Two-grid step: minimise the restricted state on the coarse grid, prolong the change.

    Returns the corrected fine state (or ``state`` itself if the correction
    does not lower the energy) and the coarse iteration count.
    """
    fine = state.grid
    coarse = coarsen(fine)
    cbc = BoundaryCondition.from_trace(coarse, state.bc.trace)
    cstate = FieldState(*(restrict(getattr(state, f), fine) for f in FIELDS), grid=coarse, bc=cbc)
    sub = minimize(cstate, h, p, replace(cfg, levels=cfg.levels - 1, max_iters=cfg.coarse_iters, log_every=0))
    zero_ghost = np.zeros(coarse.n_theta)
    fields = {}
    for f in FIELDS:
        delta = getattr(sub.state, f) - getattr(cstate, f)
        fields[f] = getattr(state, f) + prolong(delta, zero_ghost, coarse, fine)
    corrected = replace(state, **fields)
    before = energy(state, h, p).total
    after = energy(corrected, h, p).total
    logger.info(
        "coarse %dx%d: %d iters, E %.6e -> %.6e (fine)", coarse.Nr, coarse.n_theta, sub.iters + sub.coarse_iters, before, after
    )
    return (corrected if after < before else state), sub.iters + sub.coarse_iters


def minimize(initial: FieldState, h: float, p: float, cfg: MinimizeConfig | None = None) -> MinimizeResult:
    """Minimise I_{h,p} over the free nodes of ``initial``; pins are untouched.

    With ``cfg.levels > 1`` (and a cone trace for the coarse pins) the start is
    first improved by a coarse-grid correction; the fine descent then starts
    from whichever of the two has lower energy.
    """
    cfg = cfg or MinimizeConfig()
    start, coarse_iters = initial, 0
    if cfg.levels > 1 and cfg.coarse_iters > 0 and initial.bc.trace is not None and can_coarsen(initial.grid):
        start, coarse_iters = _coarse_correction(initial, h, p, cfg)
    res = _descend(start, h, p, cfg)
    state = start.with_dofs(res.x)
    br, _ = energy_and_gradient(state, h, p)
    if res.message == "line search failed" and res.iters == 0:
        logger.warning("%s", LineSearchFailure("no descent step accepted"))
    return MinimizeResult(
        state, br, res.iters, res.converged, res.history[-1][2], res.history, res.message, coarse_iters
    )


def fit_loglog(h, E):
    """Least-squares fit of ``ln E = slope ln h + c``; returns ``(slope, intercept, stderr)``."""
    h = np.asarray(h, dtype=float)
    E = np.asarray(E, dtype=float)
    if h.size < 2:
        return math.nan, math.nan, math.nan
    X = np.log(h)
    Y = np.log(E)
    A = np.vstack([X, np.ones_like(X)]).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    if h.size > 2:
        resid = Y - A @ coef
        s2 = float(resid @ resid) / (h.size - 2)
        stderr = math.sqrt(s2 / float(np.sum((X - X.mean()) ** 2)))
    else:
        stderr = math.nan
    return slope, intercept, stderr


@dataclass
class ScalingEntry:
    h: float
    breakdown: EnergyBreakdown
    iters: int
    final_grad_norm: float
    converged: bool
    start: str = "ansatz"
    ansatz_total: float = math.nan
    message: str = ""

    def as_row(self) -> dict:
        return {
            "h": self.h,
            **self.breakdown.as_row(),
            "ansatz_total": self.ansatz_total,
            "iters": self.iters,
            "final_grad_norm": self.final_grad_norm,
            "converged": int(self.converged),
            "start": self.start,
        }


@dataclass
class ScalingReport:
    p: float
    entries: list = field(default_factory=list)
    fitted_slope: float = math.nan
    slope_stderr: float = math.nan
    intercept: float = math.nan

    @property
    def theoretical_slope(self) -> float:
        return dual_exponent(self.p)

    def refit(self) -> "ScalingReport":
        self.fitted_slope, self.intercept, self.slope_stderr = fit_loglog(
            [e.h for e in self.entries], [e.breakdown.total for e in self.entries]
        )
        return self

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "theoretical_slope": self.theoretical_slope,
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "entries": [
                {**asdict(e), "breakdown": asdict(e.breakdown)} for e in self.entries
            ],
        }

    def write_json(self, path) -> None:
        write_json(path, self.to_dict())

    def write_csv(self, path) -> None:
        write_csv(path, [e.as_row() for e in self.entries])


def perturbed(state: FieldState, scale: float, rng: np.random.Generator) -> FieldState:
    """Random interior perturbation of ``v``, tapered to vanish at the clamped ring."""
    r = state.grid.radii[:, None]
    taper = (1.0 - r) ** 2
    noise = rng.standard_normal(state.grid.shape)
    return replace(state, v=state.v + scale * taper * noise)


def _best_of_starts(start, h, p, cfg, rng, threads):
    starts = [start] + [perturbed(start, cfg.perturb_scale, rng) for _ in range(cfg.perturbed_starts)]
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda s: minimize(s, h, p, cfg), starts))
    else:
        results = [minimize(s, h, p, cfg) for s in starts]
    return min(results, key=lambda r: r.breakdown.total)


def continuation_run(
    profile: BoundaryProfile | ConeTrace,
    p: float,
    cfg: MinimizeConfig,
    grid: DiskGrid,
    on_entry: Callable[[ScalingEntry, FieldState], None] | None = None,
    resume: list | None = None,
    resume_state: FieldState | None = None,
    seed: int = 0,
    threads: int = 1,
) -> ScalingReport:
    """Minimise along ``cfg.h_schedule``, warm-starting each h from the previous minimiser.

    A warm start is replaced by the interpolated ansatz whenever the ansatz has
    lower energy at the new h. ``resume`` holds already finished entries, and
    ``resume_state`` the last minimiser, so an interrupted sweep can continue.
    With ``cfg.perturbed_starts > 0`` every h also tries that many randomly
    perturbed copies of the start (``seed`` fixes them) and keeps the lowest.
    """
    if isinstance(profile, ConeTrace):
        trace = profile
    else:
        check_admissibility(profile, strict=True)
        trace = build_trace(profile)
    rng = np.random.default_rng(seed)
    report = ScalingReport(p=p, entries=list(resume or []))
    done = {e.h for e in report.entries}
    prev = resume_state
    for h in cfg.h_schedule:
        if h in done:
            continue
        ans = ansatz_state(SmoothedCone(trace, h, p), grid)
        ans_br, _ = energy_and_gradient(ans, h, p)
        start, label = ans, "ansatz"
        if prev is not None:
            warm_br, _ = energy_and_gradient(prev, h, p)
            if warm_br.total < ans_br.total:
                start, label = prev, "warm"
        logger.info("h=%.6g: start=%s, E_ansatz=%.6e", h, label, ans_br.total)
        try:
            res = _best_of_starts(start, h, p, cfg, rng, threads)
            entry = ScalingEntry(h, res.breakdown, res.iters, res.grad_norm, res.converged, label, ans_br.total, res.message)
            prev = res.state
        except Exception as exc:  # keep the sweep going, mark the entry
            logger.error("h=%.6g failed: %s", h, exc)
            start_br, _ = energy_and_gradient(start, h, p)
            entry = ScalingEntry(h, start_br, 0, math.nan, False, label, ans_br.total, f"error: {exc}")
            prev = start
        report.entries.append(entry)
        if on_entry is not None:
            on_entry(entry, prev)
        logger.info(
            "h=%.6g: E=%.6e (ansatz %.6e) iters=%d converged=%s (%s)",
            h, entry.breakdown.total, ans_br.total, entry.iters, entry.converged, entry.message,
        )
    report.entries.sort(key=lambda e: -e.h)
    return report.refit()
