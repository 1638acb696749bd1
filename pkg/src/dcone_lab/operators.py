"""Sparse-matrix form of the grid derivative operators.

The stencil kernels never build matrices; these assemblies give an
independent check of the kernels and a linear map for external solvers. Operators act on
the free nodes of one field (rings ``0..Nr-2``) and return values on all
``Nr`` rings; the pinned rings only add constants and are left out.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .grid import DiskGrid


def _circulant(a, n):
    rows = np.repeat(np.arange(n), 5)
    cols = (rows + np.tile(np.arange(-2, 3), n)) % n
    return sp.csr_matrix((np.tile(a, n), (rows, cols)), shape=(n, n))


def _radial(d, Nr, n):
    """(Nr n) x ((Nr + 1) n) matrix of a 3-point radial stencil with the pole wrap."""
    i = np.repeat(np.arange(Nr), n)
    j = np.tile(np.arange(n), Nr)
    row = i * n + j
    lower = np.where(i == 0, (j + n // 2) % n, (i - 1) * n + j)
    rows = np.concatenate([row, row, row])
    cols = np.concatenate([lower, row, row + n])
    vals = np.concatenate([d[i, 0], d[i, 1], d[i, 2]])
    return sp.csr_matrix((vals, (rows, cols)), shape=(Nr * n, (Nr + 1) * n))


class CartesianOps(NamedTuple):
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    Dxx: sp.csr_matrix
    Dxy: sp.csr_matrix
    Dyy: sp.csr_matrix


@lru_cache(maxsize=4)
def cartesian_operators(grid: DiskGrid) -> CartesianOps:
    """Matrices of ``(fx, fy, fxx, fxy, fyy)`` with respect to the free nodes."""
    Nr, n = grid.shape
    C1, C2 = _circulant(grid.a1, n), _circulant(grid.a2, n)
    ang_ext = sp.kron(sp.identity(Nr + 1), C1, format="csr")
    R1, R2 = _radial(grid.d1, Nr, n), _radial(grid.d2, Nr, n)
    keep = Nr * n
    fr = R1
    ft = ang_ext[:keep]
    frr = R2
    frt = R1 @ ang_ext
    ftt = sp.hstack([sp.kron(sp.identity(Nr), C2), sp.csr_matrix((keep, n))], format="csr")

    r = np.repeat(grid.radii, n)
    c = np.tile(grid.cos, Nr)
    s = np.tile(grid.sin, Nr)
    ir, ir2 = 1.0 / r, 1.0 / r**2
    cc, ss, sc = c * c, s * s, s * c
    D = sp.diags

    free = (Nr - 1) * n
    ops = [
        D(c) @ fr - D(s * ir) @ ft,
        D(s) @ fr + D(c * ir) @ ft,
        D(cc) @ frr + D(ss * ir) @ fr + D(ss * ir2) @ ftt - D(2 * sc * ir) @ frt + D(2 * sc * ir2) @ ft,
        D(sc) @ frr - D(sc * ir) @ fr - D(sc * ir2) @ ftt + D((cc - ss) * ir) @ frt - D((cc - ss) * ir2) @ ft,
        D(ss) @ frr + D(cc * ir) @ fr + D(cc * ir2) @ ftt + D(2 * sc * ir) @ frt - D(2 * sc * ir2) @ ft,
    ]
    return CartesianOps(*(sp.csr_matrix(op[:, :free]) for op in ops))
