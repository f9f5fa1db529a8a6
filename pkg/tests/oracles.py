"""Independent oracles used by the test suite.

These deliberately avoid the package's discretizations: the wave-speed
oracle is a shooting integration of the traveling-wave ODE, and the
interval-search oracle is a brute-force scan.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp


def shooting_front_speed(f, fprime_at_1: float, c_lo: float = 0.0,
                         c_hi: float = 1.0, tol: float = 1e-10,
                         span: float = 400.0) -> float:
    """Front speed of u'' + c u' + f(u) = 0 connecting 1 (left) to 0 (right).

    Launches along the unstable manifold of u = 1 and bisects on c: if the
    trajectory crosses below zero the damping was too weak (c too small);
    if it turns around before reaching zero the damping was too strong.
    """
    delta = 1e-8

    def classify(c: float) -> int:
        lam = 0.5 * (-c + np.sqrt(c * c - 4.0 * fprime_at_1))
        y0 = [1.0 - delta, -delta * lam]

        def rhs(_t, y):
            return [y[1], -c * y[1] - f(y[0])]

        def crossed_zero(_t, y):
            return y[0] + 1e-6
        crossed_zero.terminal = True
        crossed_zero.direction = -1

        def turned_back(_t, y):
            return y[1] - 1e-12 if y[0] < 0.9 else -1.0
        turned_back.terminal = True
        turned_back.direction = 1

        sol = solve_ivp(rhs, (0.0, span), y0, rtol=1e-10, atol=1e-12,
                        events=[crossed_zero, turned_back], max_step=1.0)
        if sol.t_events[0].size:
            return -1  # undershot: c too small
        if sol.t_events[1].size:
            return +1  # turned around: c too large
        return +1 if sol.y[0, -1] > 1e-6 else -1

    lo, hi = c_lo, c_hi
    if classify(hi) < 0 or (lo > 0 and classify(lo) > 0):
        raise ValueError("shooting bracket does not straddle the front speed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def brute_force_interval_margin(y: np.ndarray, g: np.ndarray, c_w: float,
                                n_grid: int = 81):
    """Best single-interval value of integral(g) - c_w * (interior endpoints)."""
    from stratfront.functionals import _integrate_pwlinear

    length = float(y[-1])
    cand = np.linspace(0.0, length, n_grid)
    best, witness = -np.inf, None
    for i in range(n_grid):
        for j in range(i + 1, n_grid):
            a, b = float(cand[i]), float(cand[j])
            per = int(a > 1e-12) + int(b < length - 1e-12)
            val = _integrate_pwlinear(y, g, a, b) - c_w * per
            if val > best:
                best, witness = val, (a, b)
    return best, witness


def quad_simpson(f, a: float, b: float, n: int = 4097) -> float:
    x = np.linspace(a, b, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(w @ f(x)) * (b - a) / (n - 1) / 3.0
