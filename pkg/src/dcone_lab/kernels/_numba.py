"""numba kernels; same contracts as :mod:`._numpy`, written as fused loops."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _neighbours(n):
    # periodic column indices j-2..j+2, plus the opposite column across the pole
    J = np.empty((n, 6), dtype=np.int64)
    for j in range(n):
        for k in range(5):
            J[j, k] = (j + k - 2) % n
        J[j, 5] = (j + n // 2) % n
    return J


@njit(cache=True)
def _angular_row(f, i, j, a, J):
    return (
        a[0] * f[i, J[j, 0]]
        + a[1] * f[i, J[j, 1]]
        + a[2] * f[i, j]
        + a[3] * f[i, J[j, 3]]
        + a[4] * f[i, J[j, 4]]
    )


@njit(cache=True)
def _first_partials(f, d1, a1, J):
    nr = f.shape[0] - 1
    n = f.shape[1]
    fr = np.empty((nr, n))
    ft = np.empty((nr, n))
    for i in range(nr):
        for j in range(n):
            fl = f[0, J[j, 5]] if i == 0 else f[i - 1, j]
            fr[i, j] = d1[i, 0] * fl + d1[i, 1] * f[i, j] + d1[i, 2] * f[i + 1, j]
            ft[i, j] = _angular_row(f, i, j, a1, J)
    return fr, ft


@njit(cache=True)
def _partials(f, d1, d2, a1, a2, J):
    nr = f.shape[0] - 1
    n = f.shape[1]
    ft_ext = np.empty((nr + 1, n))
    for i in range(nr + 1):
        for j in range(n):
            ft_ext[i, j] = _angular_row(f, i, j, a1, J)
    fr = np.empty((nr, n))
    ft = np.empty((nr, n))
    frr = np.empty((nr, n))
    frt = np.empty((nr, n))
    ftt = np.empty((nr, n))
    for i in range(nr):
        for j in range(n):
            if i == 0:
                jl = J[j, 5]
                fl = f[0, jl]
                tl = ft_ext[0, jl]
            else:
                fl = f[i - 1, j]
                tl = ft_ext[i - 1, j]
            fr[i, j] = d1[i, 0] * fl + d1[i, 1] * f[i, j] + d1[i, 2] * f[i + 1, j]
            frr[i, j] = d2[i, 0] * fl + d2[i, 1] * f[i, j] + d2[i, 2] * f[i + 1, j]
            frt[i, j] = d1[i, 0] * tl + d1[i, 1] * ft_ext[i, j] + d1[i, 2] * ft_ext[i + 1, j]
            ft[i, j] = ft_ext[i, j]
            ftt[i, j] = _angular_row(f, i, j, a2, J)
    return fr, ft, frr, frt, ftt


def polar_partials(f, d1, d2, a1, a2):
    f = np.ascontiguousarray(f, dtype=np.float64)
    return _partials(f, d1, d2, a1, a2, _neighbours(f.shape[1]))


@njit(cache=True)
def _scatter_first(g, T, i, j, Fr, Ft, d1, J):
    # adjoint of the first-order partials only (in-plane fields)
    if i == 0:
        g[0, J[j, 5]] += d1[0, 0] * Fr
    else:
        g[i - 1, j] += d1[i, 0] * Fr
    g[i, j] += d1[i, 1] * Fr
    g[i + 1, j] += d1[i, 2] * Fr
    T[i, j] += Ft


@njit(cache=True)
def _scatter(g, T, i, j, Fr, Ft, Frr, Frt, Ftt, d1, d2, a2, J):
    # radial stencils of f (value part) and of f_theta (into T)
    if i == 0:
        jl = J[j, 5]
        g[0, jl] += d1[0, 0] * Fr + d2[0, 0] * Frr
        T[0, jl] += d1[0, 0] * Frt
    else:
        g[i - 1, j] += d1[i, 0] * Fr + d2[i, 0] * Frr
        T[i - 1, j] += d1[i, 0] * Frt
    g[i, j] += d1[i, 1] * Fr + d2[i, 1] * Frr
    g[i + 1, j] += d1[i, 2] * Fr + d2[i, 2] * Frr
    T[i, j] += d1[i, 1] * Frt + Ft
    T[i + 1, j] += d1[i, 2] * Frt
    g[i, J[j, 0]] += a2[0] * Ftt
    g[i, J[j, 1]] += a2[1] * Ftt
    g[i, j] += a2[2] * Ftt
    g[i, J[j, 3]] += a2[3] * Ftt
    g[i, J[j, 4]] += a2[4] * Ftt


@njit(cache=True)
def _flush_angular(g, T, a1, J):
    for i in range(T.shape[0]):
        for j in range(T.shape[1]):
            t = T[i, j]
            if t != 0.0:
                g[i, J[j, 0]] += a1[0] * t
                g[i, J[j, 1]] += a1[1] * t
                g[i, j] += a1[2] * t
                g[i, J[j, 3]] += a1[3] * t
                g[i, J[j, 4]] += a1[4] * t


@njit(cache=True)
def _adjoint(Fr, Ft, Frr, Frt, Ftt, d1, d2, a1, a2):
    nr, n = Fr.shape
    J = _neighbours(n)
    g = np.zeros((nr + 1, n))
    T = np.zeros((nr + 1, n))
    for i in range(nr):
        for j in range(n):
            _scatter(g, T, i, j, Fr[i, j], Ft[i, j], Frr[i, j], Frt[i, j], Ftt[i, j], d1, d2, a2, J)
    _flush_angular(g, T, a1, J)
    return g


def polar_partials_adjoint(Fr, Ft, Frr, Frt, Ftt, d1, d2, a1, a2):
    return _adjoint(Fr, Ft, Frr, Frt, Ftt, d1, d2, a1, a2)


@njit(cache=True)
def _energy_grad(u1, u2, v, r, c, s, w, d1, d2, a1, a2, h, p):
    nr = u1.shape[0] - 1
    n = u1.shape[1]
    J = _neighbours(n)
    u1r, u1t = _first_partials(u1, d1, a1, J)
    u2r, u2t = _first_partials(u2, d1, a1, J)
    vr, vt, vrr, vrt, vtt = _partials(v, d1, d2, a1, a2, J)

    vx = np.empty((nr, n))
    vy = np.empty((nr, n))
    vxx = np.empty((nr, n))
    vxy = np.empty((nr, n))
    vyy = np.empty((nr, n))
    Gexx = np.empty((nr, n))
    Geyy = np.empty((nr, n))
    Gexy = np.empty((nr, n))
    Hp2 = np.empty((nr, n))
    membrane = 0.0
    S = 0.0
    ex = 0.5 * (p - 2.0)
    for i in range(nr):
        ir = 1.0 / r[i]
        ir2 = ir * ir
        mem_i = 0.0
        S_i = 0.0
        for j in range(n):
            cj = c[j]
            sj = s[j]
            cc = cj * cj
            ss = sj * sj
            sc = sj * cj
            u1x = cj * u1r[i, j] - sj * ir * u1t[i, j]
            u1y = sj * u1r[i, j] + cj * ir * u1t[i, j]
            u2x = cj * u2r[i, j] - sj * ir * u2t[i, j]
            u2y = sj * u2r[i, j] + cj * ir * u2t[i, j]
            a_r = vr[i, j]
            a_t = vt[i, j]
            a_rr = vrr[i, j]
            a_rt = vrt[i, j]
            a_tt = vtt[i, j]
            x_ = cj * a_r - sj * ir * a_t
            y_ = sj * a_r + cj * ir * a_t
            xx = cc * a_rr + ss * ir * a_r + ss * ir2 * a_tt - 2 * sc * ir * a_rt + 2 * sc * ir2 * a_t
            yy = ss * a_rr + cc * ir * a_r + cc * ir2 * a_tt + 2 * sc * ir * a_rt - 2 * sc * ir2 * a_t
            xy = sc * a_rr - sc * ir * a_r - sc * ir2 * a_tt + (cc - ss) * ir * a_rt - (cc - ss) * ir2 * a_t
            vx[i, j] = x_
            vy[i, j] = y_
            vxx[i, j] = xx
            vxy[i, j] = xy
            vyy[i, j] = yy
            exx = u1x + 0.5 * x_ * x_
            eyy = u2y + 0.5 * y_ * y_
            exy = 0.5 * (u1y + u2x) + 0.5 * x_ * y_
            mem_i += exx * exx + eyy * eyy + 2 * exy * exy
            H2 = xx * xx + 2 * xy * xy + yy * yy
            hp = H2**ex
            Hp2[i, j] = hp
            S_i += H2 * hp
            Gexx[i, j] = 2 * w[i] * exx
            Geyy[i, j] = 2 * w[i] * eyy
            Gexy[i, j] = 4 * w[i] * exy
        membrane += w[i] * mem_i
        S += w[i] * S_i

    kappa = 0.0
    if S >= 1e-300:
        kappa = h * h * 2.0 * S ** (2.0 / p - 1.0)

    g1 = np.zeros((nr + 1, n))
    g2 = np.zeros((nr + 1, n))
    gv = np.zeros((nr + 1, n))
    T1 = np.zeros((nr + 1, n))
    T2 = np.zeros((nr + 1, n))
    Tv = np.zeros((nr + 1, n))
    for i in range(nr):
        ir = 1.0 / r[i]
        ir2 = ir * ir
        for j in range(n):
            cj = c[j]
            sj = s[j]
            cc = cj * cj
            ss = sj * sj
            sc = sj * cj
            # u1: (Gx, Gy) = (Gexx, Gexy/2)
            Gx = Gexx[i, j]
            Gy = 0.5 * Gexy[i, j]
            _scatter_first(g1, T1, i, j, cj * Gx + sj * Gy, -sj * ir * Gx + cj * ir * Gy, d1, J)
            Gx = 0.5 * Gexy[i, j]
            Gy = Geyy[i, j]
            _scatter_first(g2, T2, i, j, cj * Gx + sj * Gy, -sj * ir * Gx + cj * ir * Gy, d1, J)
            Gx = Gexx[i, j] * vx[i, j] + 0.5 * Gexy[i, j] * vy[i, j]
            Gy = Geyy[i, j] * vy[i, j] + 0.5 * Gexy[i, j] * vx[i, j]
            m = kappa * w[i] * Hp2[i, j]
            Gxx = m * vxx[i, j]
            Gxy = 2.0 * m * vxy[i, j]
            Gyy = m * vyy[i, j]
            Fr = cj * Gx + sj * Gy + ss * ir * Gxx + cc * ir * Gyy - sc * ir * Gxy
            Ft = -sj * ir * Gx + cj * ir * Gy + 2 * sc * ir2 * (Gxx - Gyy) - (cc - ss) * ir2 * Gxy
            Frr = cc * Gxx + ss * Gyy + sc * Gxy
            Frt = 2 * sc * ir * (Gyy - Gxx) + (cc - ss) * ir * Gxy
            Ftt = ir2 * (ss * Gxx + cc * Gyy - sc * Gxy)
            _scatter(gv, Tv, i, j, Fr, Ft, Frr, Frt, Ftt, d1, d2, a2, J)
    _flush_angular(g1, T1, a1, J)
    _flush_angular(g2, T2, a1, J)
    _flush_angular(gv, Tv, a1, J)
    return membrane, S, g1, g2, gv


def energy_and_gradient(u1, u2, v, r, c, s, w, d1, d2, a1, a2, h, p):
    return _energy_grad(
        np.ascontiguousarray(u1, dtype=np.float64),
        np.ascontiguousarray(u2, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
        r, c, s, w, d1, d2, a1, a2, float(h), float(p),
    )


@njit(cache=True)
def _winding(px, py, fx, fy):
    m = px.size
    out = np.empty(fx.size)
    for k in range(fx.size):
        acc = 0.0
        for j in range(m):
            jn = j + 1 if j + 1 < m else 0
            ax = px[j] - fx[k]
            ay = py[j] - fy[k]
            bx = px[jn] - fx[k]
            by = py[jn] - fy[k]
            acc += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
        out[k] = acc / (2 * math.pi)
    return out


def winding_sums(px, py, zx, zy):
    zx = np.asarray(zx, dtype=float)
    zy = np.asarray(zy, dtype=float)
    out = _winding(np.ascontiguousarray(px, dtype=np.float64), np.ascontiguousarray(py, dtype=np.float64),
                   np.ascontiguousarray(zx.ravel()), np.ascontiguousarray(zy.ravel()))
    return out.reshape(zx.shape)


@njit(cache=True)
def _distances(px, py, fx, fy):
    m = px.size
    out = np.empty(fx.size)
    for k in range(fx.size):
        best = np.inf
        for j in range(m):
            jn = j + 1 if j + 1 < m else 0
            ex = px[jn] - px[j]
            ey = py[jn] - py[j]
            ee = max(ex * ex + ey * ey, 1e-300)
            dx = fx[k] - px[j]
            dy = fy[k] - py[j]
            t = min(max((dx * ex + dy * ey) / ee, 0.0), 1.0)
            ddx = dx - t * ex
            ddy = dy - t * ey
            d = ddx * ddx + ddy * ddy
            if d < best:
                best = d
        out[k] = math.sqrt(best)
    return out


def polyline_distances(px, py, zx, zy):
    zx = np.asarray(zx, dtype=float)
    zy = np.asarray(zy, dtype=float)
    out = _distances(np.ascontiguousarray(px, dtype=np.float64), np.ascontiguousarray(py, dtype=np.float64),
                     np.ascontiguousarray(zx.ravel()), np.ascontiguousarray(zy.ravel()))
    return out.reshape(zx.shape)
