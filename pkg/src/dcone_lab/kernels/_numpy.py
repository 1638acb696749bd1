"""Vectorised numpy kernels (reference path, used when JIT is disabled).

Fields live on an extended polar array of shape ``(Nr + 1, n)``: rows
``0..Nr-1`` are the grid rings, row ``Nr`` is the ghost ring. The radial
neighbour below ring 0 is ring 0 itself rotated by pi (``n`` is even).
"""
import numpy as np


def _lower(f, half):
    out = np.empty_like(f[:-1])
    out[0] = np.roll(f[0], -half)
    out[1:] = f[:-2]
    return out


def _angular(f, a):
    # sum_k a[k] f[:, j + k - 2], periodic in j
    return (
        a[0] * np.roll(f, 2, axis=-1)
        + a[1] * np.roll(f, 1, axis=-1)
        + a[2] * f
        + a[3] * np.roll(f, -1, axis=-1)
        + a[4] * np.roll(f, -2, axis=-1)
    )


def _angular_adjoint(g, a):
    return (
        a[0] * np.roll(g, -2, axis=-1)
        + a[1] * np.roll(g, -1, axis=-1)
        + a[2] * g
        + a[3] * np.roll(g, 1, axis=-1)
        + a[4] * np.roll(g, 2, axis=-1)
    )


def _radial(f, d, half):
    L = _lower(f, half)
    return d[:, 0:1] * L + d[:, 1:2] * f[:-1] + d[:, 2:3] * f[1:]


def _radial_adjoint(G, d, half):
    nr = G.shape[0]
    out = np.zeros((nr + 1, G.shape[1]))
    out[:-1] += d[:, 1:2] * G
    out[1:] += d[:, 2:3] * G
    out[: nr - 1] += d[1:, 0:1] * G[1:]
    out[0] += np.roll(d[0, 0] * G[0], half)
    return out


def polar_partials(f, d1, d2, a1, a2):
    """Return ``(f_r, f_t, f_rr, f_rt, f_tt)`` on the ``Nr`` grid rings."""
    half = f.shape[1] // 2
    ft_ext = _angular(f, a1)
    fr = _radial(f, d1, half)
    frr = _radial(f, d2, half)
    frt = _radial(ft_ext, d1, half)
    ftt = _angular(f[:-1], a2)
    return fr, ft_ext[:-1], frr, frt, ftt


def polar_partials_adjoint(Fr, Ft, Frr, Frt, Ftt, d1, d2, a1, a2):
    half = Fr.shape[1] // 2
    g = _radial_adjoint(Fr, d1, half) + _radial_adjoint(Frr, d2, half)
    T = _radial_adjoint(Frt, d1, half)
    T[:-1] += Ft
    g += _angular_adjoint(T, a1)
    g[:-1] += _angular_adjoint(Ftt, a2)
    return g


def cartesian(fr, ft, frr, frt, ftt, r, c, s):
    """Chain polar partials to ``(fx, fy, fxx, fxy, fyy)``; ``r`` has shape ``(Nr, 1)``."""
    ir = 1.0 / r
    ir2 = ir * ir
    cc, ss, sc = c * c, s * s, s * c
    fx = c * fr - s * ir * ft
    fy = s * fr + c * ir * ft
    fxx = cc * frr + ss * ir * fr + ss * ir2 * ftt - 2 * sc * ir * frt + 2 * sc * ir2 * ft
    fyy = ss * frr + cc * ir * fr + cc * ir2 * ftt + 2 * sc * ir * frt - 2 * sc * ir2 * ft
    fxy = sc * frr - sc * ir * fr - sc * ir2 * ftt + (cc - ss) * ir * frt - (cc - ss) * ir2 * ft
    return fx, fy, fxx, fxy, fyy


def cartesian_adjoint(Gx, Gy, Gxx, Gxy, Gyy, r, c, s):
    ir = 1.0 / r
    ir2 = ir * ir
    cc, ss, sc = c * c, s * s, s * c
    Fr = c * Gx + s * Gy + ss * ir * Gxx + cc * ir * Gyy - sc * ir * Gxy
    Ft = -s * ir * Gx + c * ir * Gy + 2 * sc * ir2 * (Gxx - Gyy) - (cc - ss) * ir2 * Gxy
    Frr = cc * Gxx + ss * Gyy + sc * Gxy
    Frt = 2 * sc * ir * (Gyy - Gxx) + (cc - ss) * ir * Gxy
    Ftt = ir2 * (ss * Gxx + cc * Gyy - sc * Gxy)
    return Fr, Ft, Frr, Frt, Ftt


def energy_and_gradient(u1, u2, v, r, c, s, w, d1, d2, a1, a2, h, p):
    """Membrane, raw bending integral and the gradient w.r.t. every extended node.

    ``w`` has shape ``(Nr,)`` (ring weights); ``c``/``s`` shape ``(n,)``.
    """
    rr = r[:, None]
    W = w[:, None]
    zeros = np.zeros((u1.shape[0] - 1, u1.shape[1]))

    u1r, u1t, *_ = polar_partials(u1, d1, d2, a1, a2)
    u2r, u2t, *_ = polar_partials(u2, d1, d2, a1, a2)
    vp = polar_partials(v, d1, d2, a1, a2)
    u1x, u1y, *_ = cartesian(u1r, u1t, zeros, zeros, zeros, rr, c, s)
    u2x, u2y, *_ = cartesian(u2r, u2t, zeros, zeros, zeros, rr, c, s)
    vx, vy, vxx, vxy, vyy = cartesian(*vp, rr, c, s)

    exx = u1x + 0.5 * vx * vx
    eyy = u2y + 0.5 * vy * vy
    exy = 0.5 * (u1y + u2x) + 0.5 * vx * vy
    membrane = float(np.sum(W * (exx * exx + eyy * eyy + 2 * exy * exy)))

    H2 = vxx * vxx + 2 * vxy * vxy + vyy * vyy
    Hp2 = H2 ** (0.5 * (p - 2.0))
    S = float(np.sum(W * H2 * Hp2))

    Gexx = 2 * W * exx
    Geyy = 2 * W * eyy
    Gexy = 4 * W * exy
    kappa = 0.0 if S < 1e-300 else h * h * 2.0 * S ** (2.0 / p - 1.0)
    m = kappa * W * Hp2

    g1 = polar_partials_adjoint(
        *cartesian_adjoint(Gexx, 0.5 * Gexy, zeros, zeros, zeros, rr, c, s), d1, d2, a1, a2
    )
    g2 = polar_partials_adjoint(
        *cartesian_adjoint(0.5 * Gexy, Geyy, zeros, zeros, zeros, rr, c, s), d1, d2, a1, a2
    )
    gv = polar_partials_adjoint(
        *cartesian_adjoint(
            Gexx * vx + 0.5 * Gexy * vy,
            Geyy * vy + 0.5 * Gexy * vx,
            m * vxx,
            2 * m * vxy,
            m * vyy,
            rr,
            c,
            s,
        ),
        d1,
        d2,
        a1,
        a2,
    )
    return membrane, S, g1, g2, gv


def winding_sums(px, py, zx, zy):
    """Signed angle sum / 2 pi of the closed polygon ``(px, py)`` around each ``z``."""
    zx = np.asarray(zx, dtype=float)
    zy = np.asarray(zy, dtype=float)
    out = np.empty(zx.size)
    fx, fy = zx.ravel(), zy.ravel()
    chunk = max(1, 2_000_000 // max(px.size, 1))
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for lo in range(0, fx.size, chunk):
        ax = px[None, :] - fx[lo : lo + chunk, None]
        ay = py[None, :] - fy[lo : lo + chunk, None]
        bx = qx[None, :] - fx[lo : lo + chunk, None]
        by = qy[None, :] - fy[lo : lo + chunk, None]
        ang = np.arctan2(ax * by - ay * bx, ax * bx + ay * by)
        out[lo : lo + chunk] = ang.sum(axis=1) / (2 * np.pi)
    return out.reshape(zx.shape)


def polyline_distances(px, py, zx, zy):
    """Distance from each ``z`` to the closed polygon ``(px, py)``."""
    zx = np.asarray(zx, dtype=float)
    zy = np.asarray(zy, dtype=float)
    fx, fy = zx.ravel(), zy.ravel()
    out = np.empty(fx.size)
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    ex, ey = qx - px, qy - py
    ee = np.maximum(ex * ex + ey * ey, 1e-300)
    chunk = max(1, 2_000_000 // max(px.size, 1))
    for lo in range(0, fx.size, chunk):
        dx = fx[lo : lo + chunk, None] - px[None, :]
        dy = fy[lo : lo + chunk, None] - py[None, :]
        t = np.clip((dx * ex + dy * ey) / ee, 0.0, 1.0)
        ddx = dx - t * ex
        ddy = dy - t * ey
        out[lo : lo + chunk] = np.sqrt(np.min(ddx * ddx + ddy * ddy, axis=1))
    return out.reshape(zx.shape)
