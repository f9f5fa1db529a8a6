"""Compiled inner loops for the time steppers.

The diffuse stepper advances u_t = lap(u) + cz u_z + u(1-u)(alpha u - beta(y))
(the solver-form reaction covering the built-in cubic-family wells with
product forcings) with diffusion implicit per axis (Lie ADI, Thomas solves)
and reaction/advection explicit.  Neumann walls enter through mirrored
ghost nodes, which for the tridiagonal systems means a doubled off-diagonal
in the first and last rows.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def neumann_tridiag(n: int, lam: float, h: float):
    """Coefficient arrays of I - lam * Lap_h with mirrored-ghost Neumann rows."""
    r = lam / (h * h)
    lower = np.full(n, -r)
    diag = np.full(n, 1.0 + 2.0 * r)
    upper = np.full(n, -r)
    upper[0] = -2.0 * r
    lower[-1] = -2.0 * r
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper


def thomas_factor(lower, diag, upper):
    """Precompute the forward-elimination coefficients of the Thomas solve."""
    n = diag.size
    cp = np.empty(n)
    den = np.empty(n)
    den[0] = 1.0 / diag[0]
    cp[0] = upper[0] * den[0]
    for i in range(1, n):
        den[i] = 1.0 / (diag[i] - lower[i] * cp[i - 1])
        cp[i] = upper[i] * den[i]
    return lower.copy(), cp, den


@njit(cache=True)
def solve_axis1(a, cp, den, d):
    """In-place Thomas solve along the last axis, one system per row."""
    m, n = d.shape
    for i in range(m):
        d[i, 0] = d[i, 0] * den[0]
        for j in range(1, n):
            d[i, j] = (d[i, j] - a[j] * d[i, j - 1]) * den[j]
        for j in range(n - 2, -1, -1):
            d[i, j] = d[i, j] - cp[j] * d[i, j + 1]


@njit(cache=True)
def solve_axis0(a, cp, den, d):
    """In-place Thomas solve along the first axis, blocked for cache reuse."""
    m, n = d.shape
    block = 128
    for j0 in range(0, n, block):
        j1 = min(j0 + block, n)
        for j in range(j0, j1):
            d[0, j] = d[0, j] * den[0]
        for i in range(1, m):
            for j in range(j0, j1):
                d[i, j] = (d[i, j] - a[i] * d[i - 1, j]) * den[i]
        for i in range(m - 2, -1, -1):
            for j in range(j0, j1):
                d[i, j] = d[i, j] - cp[i] * d[i + 1, j]


@njit(cache=True)
def diffuse_chunk(u, alpha, beta, cz, dz, dt, nsteps,
                  za, zcp, zden, ya, ycp, yden, work):
    """Advance nsteps of the IMEX scheme in place; returns (min u, max |u|).

    Explicit stage writes u + dt*(advection + reaction) into work, then the
    two implicit diffusion solves run in place and the result is copied back.
    """
    ny, nz = u.shape
    umin = u[0, 0]
    umax_abs = 0.0
    inv2dz = 1.0 / (2.0 * dz)
    for _ in range(nsteps):
        for i in range(ny):
            b = beta[i]
            work[i, 0] = u[i, 0] + dt * (u[i, 0] * (1.0 - u[i, 0]) * (alpha * u[i, 0] - b))
            for j in range(1, nz - 1):
                adv = cz * (u[i, j + 1] - u[i, j - 1]) * inv2dz
                r = u[i, j] * (1.0 - u[i, j]) * (alpha * u[i, j] - b)
                work[i, j] = u[i, j] + dt * (adv + r)
            work[i, nz - 1] = u[i, nz - 1] + dt * (
                u[i, nz - 1] * (1.0 - u[i, nz - 1]) * (alpha * u[i, nz - 1] - b))
        solve_axis1(za, zcp, zden, work)
        if ny > 1:
            solve_axis0(ya, ycp, yden, work)
        umin = work[0, 0]
        umax_abs = 0.0
        for i in range(ny):
            for j in range(nz):
                u[i, j] = work[i, j]
                if u[i, j] < umin:
                    umin = u[i, j]
                a = abs(u[i, j])
                if a > umax_abs:
                    umax_abs = a
        if umax_abs > 3.0:
            break
    return umin, umax_abs


@njit(cache=True)
def shift_columns(u, k, fill_left, fill_right):
    """Shift field content k cells toward lower z (k > 0) or higher z (k < 0).

    Vacated columns are filled with the boundary trace, which is exact for
    fields that have flattened to their limit states at the window ends.
    """
    ny, nz = u.shape
    if k > 0:
        for i in range(ny):
            for j in range(nz - k):
                u[i, j] = u[i, j + k]
            for j in range(nz - k, nz):
                u[i, j] = fill_right[i]
    elif k < 0:
        kk = -k
        for i in range(ny):
            for j in range(nz - 1, kk - 1, -1):
                u[i, j] = u[i, j - kk]
            for j in range(kk):
                u[i, j] = fill_left[i]


@njit(cache=True)
def fmc_chunk(h, gcw, dy, dt, nsteps):
    """Explicit steps of h_t = h_yy/(1+h_y^2) + (g/c_w) sqrt(1+h_y^2).

    Returns the largest |h_y| seen, for the gradient blow-up guard.
    """
    n = h.size
    out = np.empty(n)
    max_grad = 0.0
    inv2dy = 1.0 / (2.0 * dy)
    invdy2 = 1.0 / (dy * dy)
    for _ in range(nsteps):
        for i in range(n):
            im = 1 if i == 0 else i - 1
            ip = n - 2 if i == n - 1 else i + 1
            hy = (h[ip] - h[im]) * inv2dy
            if i == 0 or i == n - 1:
                hy = 0.0
            hyy = (h[ip] - 2.0 * h[i] + h[im]) * invdy2
            q = 1.0 + hy * hy
            out[i] = h[i] + dt * (hyy / q + gcw[i] * np.sqrt(q))
            a = abs(hy)
            if a > max_grad:
                max_grad = a
        for i in range(n):
            h[i] = out[i]
        if max_grad > 1.0e3:
            break
    return max_grad


@njit(cache=True)
def crossing_position(u, theta, z0, dz):
    """Largest interpolated z where the y-max of u crosses theta from above.

    Returns NaN when there is no crossing or the field still exceeds theta
    at the top of the window.
    """
    ny, nz = u.shape
    prev = 0.0
    for i in range(ny):
        if u[i, 0] > prev:
            prev = u[i, 0]
    top = 0.0
    for i in range(ny):
        if u[i, nz - 1] > top:
            top = u[i, nz - 1]
    if top > theta:
        return np.nan
    pos = np.nan
    for j in range(1, nz):
        cur = 0.0
        for i in range(ny):
            if u[i, j] > cur:
                cur = u[i, j]
        if prev > theta >= cur:
            frac = (prev - theta) / (prev - cur)
            pos = z0 + (j - 1 + frac) * dz
        prev = cur
    return pos
