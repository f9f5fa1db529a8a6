"""Domain types: cylinder geometry, double wells, stratified forcings, fields.

Everything here is immutable after construction and safe to share across
parallel workers.  The cylinder is Omega x R with Omega a 1D interval
(transverse coordinate y) and z the propagation axis; boundary conditions
are homogeneous Neumann throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ModelError


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n nodes (n odd) with spacing h."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson rule needs an odd node count >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _simpson_integral(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      n: int = 2049) -> float:
    x = np.linspace(a, b, n)
    return float(simpson_weights(n, (b - a) / (n - 1)) @ f(x))


@dataclass(frozen=True)
class CrossSection:
    """Uniform node grid on the interval [0, length] with Neumann ends."""

    length: float
    nodes: int

    def __post_init__(self):
        if self.nodes < 3:
            raise ModelError(f"cross-section needs >= 3 nodes, got {self.nodes}")
        if self.length <= 0:
            raise ModelError("cross-section length must be positive")

    @property
    def dy(self) -> float:
        return self.length / (self.nodes - 1)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.nodes)

    def quad_weights(self) -> np.ndarray:
        """Dual-cell (trapezoid) weights; half cells at the Neumann ends."""
        w = np.full(self.nodes, self.dy)
        w[0] = w[-1] = 0.5 * self.dy
        return w


@dataclass(frozen=True)
class CylinderGrid:
    """Truncated cylinder window [z_min, z_max] over a cross-section.

    z_shift records the accumulated translation of the moving computational
    window; physical coordinates are window coordinates plus z_shift.
    """

    section: CrossSection
    z_min: float
    z_max: float
    dz: float
    z_shift: float = 0.0

    def __post_init__(self):
        if self.dz <= 0 or self.z_max <= self.z_min:
            raise ModelError("cylinder window needs dz > 0 and z_max > z_min")

    @property
    def nz(self) -> int:
        return int(round((self.z_max - self.z_min) / self.dz)) + 1

    @property
    def z(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.nz)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.section.nodes, self.nz)

    def check_window(self, eps: float) -> None:
        if self.z_max - self.z_min < 10.0 * eps:
            raise ModelError(
                f"window length {self.z_max - self.z_min} too short for "
                f"interface width {eps} (need >= 10*eps)")

    def shifted(self, amount: float) -> "CylinderGrid":
        return CylinderGrid(self.section, self.z_min, self.z_max, self.dz,
                            self.z_shift + amount)


@dataclass(frozen=True)
class WellCertificate:
    """Record of the sample grid on which a well's shape was validated."""

    u_lo: float
    u_hi: float
    samples: int
    balanced: bool
    checks: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DoubleWell:
    """Potential W with nonlinearity f = -W' and surface tension constant.

    tension is the cumulative integral of sqrt(2 W) from 0, so tension(1)
    equals the constant c_w used to convert forcing into normal velocity.
    """

    w: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    w2: Callable[[np.ndarray], np.ndarray]
    c_w: float
    tension: Callable[[np.ndarray], np.ndarray]
    certificate: WellCertificate
    name: str = "custom"


def _validate_well(w, f, w2, u_lo=-1.0, u_hi=2.0, samples=3001,
                   require_balanced=True) -> WellCertificate:
    u = np.linspace(u_lo, u_hi, samples)
    checks = {}
    wu = w(u)
    interior = (np.abs(u) > 1e-9) & (np.abs(u - 1.0) > 1e-9)
    checks["w_positive_off_wells"] = bool(np.all(wu[interior] > 0)) if require_balanced else None
    checks["w_zero_at_0"] = abs(float(w(np.array([0.0]))[0])) < 1e-14
    checks["w_zero_at_1"] = abs(float(w(np.array([1.0]))[0])) < 1e-14 if require_balanced else None
    checks["f_zero_at_roots"] = (abs(float(f(np.array([0.0]))[0])) < 1e-14
                                 and abs(float(f(np.array([1.0]))[0])) < 1e-14)
    du = 1e-6
    fp0 = (float(f(np.array([du]))[0]) - float(f(np.array([-du]))[0])) / (2 * du)
    fp1 = (float(f(np.array([1 + du]))[0]) - float(f(np.array([1 - du]))[0])) / (2 * du)
    checks["f_slope_negative_at_0"] = fp0 < 0
    checks["f_slope_negative_at_1"] = fp1 < 0
    # f = -W' by central differences at 1e3 points, O(du^2) agreement
    us = np.linspace(u_lo + 0.01, u_hi - 0.01, 1000)
    dh = 1e-5
    fd = -(w(us + dh) - w(us - dh)) / (2 * dh)
    checks["f_matches_minus_w_prime"] = bool(np.max(np.abs(fd - f(us))) < 1e-8)
    balanced = bool(require_balanced and checks["w_zero_at_1"]
                    and checks["w_positive_off_wells"])
    return WellCertificate(u_lo, u_hi, samples, balanced, checks)


class _TensionTable:
    """Interpolated primitive of sqrt(2 W); picklable for worker processes."""

    def __init__(self, w, u_lo=-1.0, u_hi=2.0, n=3 * 2 ** 13 + 1):
        # node count keeps the sqrt kinks of balanced wells on even nodes,
        # so the cumulative Simpson rule never straddles them
        from scipy.integrate import cumulative_simpson

        u = np.linspace(u_lo, u_hi, n)
        g = np.sqrt(np.maximum(2.0 * w(u), 0.0))
        cum = cumulative_simpson(g, x=u, initial=0.0)
        cum -= np.interp(0.0, u, cum)  # anchor tension(0) = 0
        self.u = u
        self.cum = cum

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.u, self.cum)


def _make_tension_table(w, u_lo=-1.0, u_hi=2.0, n=3 * 2 ** 13 + 1):
    return _TensionTable(w, u_lo, u_hi, n)


class _CubicFamilyW:
    """W for f(u) = u (1-u) (u - a); the quartic well is the a = 1/2 case."""

    def __init__(self, a: float):
        self.a = a

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a = self.a
        return 0.25 * u ** 4 + 0.5 * a * u ** 2 - (1.0 + a) * u ** 3 / 3.0


class _CubicFamilyF:
    def __init__(self, a: float):
        self.a = a

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return u * (1.0 - u) * (u - self.a)


class _CubicFamilyW2:
    def __init__(self, a: float):
        self.a = a

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return 3.0 * u * u - 2.0 * (1.0 + self.a) * u + self.a


def quartic_double_well() -> DoubleWell:
    """The balanced quartic well W(u) = u^2 (1-u)^2 / 4."""
    w, f, w2 = _CubicFamilyW(0.5), _CubicFamilyF(0.5), _CubicFamilyW2(0.5)
    c_w = _simpson_integral(lambda u: np.sqrt(2.0 * w(u)), 0.0, 1.0)
    cert = _validate_well(w, f, w2)
    exact = 1.0 / (6.0 * np.sqrt(2.0))
    if abs(c_w - exact) > 1e-8 * exact:
        raise ModelError("quadrature of the surface tension constant is off")
    return DoubleWell(w, f, w2, c_w, _make_tension_table(w), cert, name="quartic")


def cubic_bistable_well(threshold: float) -> DoubleWell:
    """Classical cubic nonlinearity f(u) = u (1-u) (u - threshold).

    For threshold != 1/2 the associated potential is unbalanced (the u = 1
    well is deeper); used for folded-forcing test problems.
    """
    a = float(threshold)
    if not 0.0 < a < 1.0:
        raise ModelError("cubic threshold must lie in (0, 1)")
    w, f, w2 = _CubicFamilyW(a), _CubicFamilyF(a), _CubicFamilyW2(a)
    c_w = _simpson_integral(lambda u: np.sqrt(np.maximum(2.0 * w(u), 0.0)), 0.0, 1.0)
    cert = _validate_well(w, f, w2, require_balanced=(a == 0.5))
    return DoubleWell(w, f, w2, c_w, _make_tension_table(w), cert,
                      name=f"cubic(threshold={a})")


@dataclass(frozen=True)
class Forcing:
    """Stratified forcing a(y, u), its u-antiderivative G, and g(y) = G(y, 1).

    a_u is the partial derivative in u, needed by second-variation checks.
    g is sampled on the cross-section grid at construction.
    """

    section: CrossSection
    a: Callable[[np.ndarray, np.ndarray], np.ndarray]
    biggrad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    a_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: np.ndarray
    name: str = "custom"

    def g_fun(self, y: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(y, dtype=float), self.section.y, self.g)

    @property
    def g_mean(self) -> float:
        return float(self.section.quad_weights() @ self.g) / self.section.length

    @property
    def g_sup(self) -> float:
        return float(np.max(self.g))


def _check_zero_at_origin(a, y, tol=1e-10):
    a0 = np.abs(a(y, np.zeros_like(y)))
    if np.max(a0) > tol:
        raise ModelError(
            f"nonzero-at-origin: forcing must vanish at u = 0, max |a(y,0)| = {np.max(a0):.3g}")


def _verify_antiderivative(a, big_g, section, tol=1e-8):
    # G(y,1) against Simpson quadrature of a(y,.) over [0,1] on every grid y
    n = 2049
    u = np.linspace(0.0, 1.0, n)
    wq = simpson_weights(n, 1.0 / (n - 1))
    for yv in section.y:
        quad = float(wq @ a(np.full(n, yv), u))
        g1 = float(big_g(np.array([yv]), np.array([1.0]))[0])
        if abs(g1 - quad) > tol:
            raise ModelError(
                f"antiderivative mismatch at y={yv:.4f}: G(y,1)={g1:.3e} vs quad {quad:.3e}")


class _ProductEval:
    """Picklable evaluator family for a(y, u) = 6 g0(y) (u - u^2)."""

    def __init__(self, y_grid: np.ndarray, g0_arr: np.ndarray, part: str):
        self.y_grid = y_grid
        self.g0_arr = g0_arr
        self.part = part

    def __call__(self, y, u):
        g0 = np.interp(np.asarray(y, dtype=float), self.y_grid, self.g0_arr)
        u = np.asarray(u, dtype=float)
        if self.part == "a":
            return 6.0 * g0 * (u - u * u)
        if self.part == "G":
            return 6.0 * g0 * (u * u / 2.0 - u ** 3 / 3.0)
        return 6.0 * g0 * (1.0 - 2.0 * u)  # a_u


def product_forcing(section: CrossSection, g0, name: str | None = None) -> Forcing:
    """Forcing of the form a(y, u) = 6 g0(y) (u - u^2).

    g0 may be a scalar, a callable of y, or an array sampled on the grid.
    The induced curvature forcing is g(y) = g0(y) exactly, since
    6 * integral of (u - u^2) over [0, 1] equals 1.
    """
    y_grid = section.y
    if np.isscalar(g0):
        g0_arr = np.full(section.nodes, float(g0))
        label = f"product(g0={float(g0)})"
    elif callable(g0):
        g0_arr = np.asarray(g0(y_grid), dtype=float)
        label = "product(g0=callable)"
    else:
        g0_arr = np.asarray(g0, dtype=float)
        if g0_arr.shape != y_grid.shape:
            raise ModelError("tabulated g0 must match the cross-section grid")
        label = "product(g0=table)"

    a = _ProductEval(y_grid, g0_arr, "a")
    big_g = _ProductEval(y_grid, g0_arr, "G")
    a_u = _ProductEval(y_grid, g0_arr, "a_u")
    _check_zero_at_origin(a, y_grid)
    _verify_antiderivative(a, big_g, section)
    return Forcing(section, a, big_g, a_u, g0_arr.copy(), name=name or label)


def cosine_forcing(section: CrossSection, mean: float,
                   relative_amplitude: float) -> Forcing:
    """Neumann-compatible cosine profile g0(y) = mean (1 + r cos(pi y / L))."""
    ly = section.length

    def g0(y):
        return mean * (1.0 + relative_amplitude * np.cos(np.pi * y / ly))

    return product_forcing(section, g0,
                           name=f"cosine(mean={mean},rel_amp={relative_amplitude})")


def zero_forcing(section: CrossSection) -> Forcing:
    return product_forcing(section, 0.0, name="zero")


class _GridEval:
    """Bilinear table evaluator on a (y, u) grid; picklable."""

    def __init__(self, y_pts, u_pts, table):
        from scipy.interpolate import RegularGridInterpolator

        self.y_pts, self.u_pts, self.table = y_pts, u_pts, table
        self._interp = RegularGridInterpolator((y_pts, u_pts), table,
                                               bounds_error=False,
                                               fill_value=None)

    def __call__(self, y, u):
        y = np.asarray(y, dtype=float)
        u = np.asarray(u, dtype=float)
        y, u = np.broadcast_arrays(y, u)
        return self._interp(np.stack([y.ravel(), u.ravel()], axis=-1)).reshape(y.shape)

    def __getstate__(self):
        return {"y_pts": self.y_pts, "u_pts": self.u_pts, "table": self.table}

    def __setstate__(self, state):
        self.__init__(state["y_pts"], state["u_pts"], state["table"])


class _CentralDiffU:
    def __init__(self, fn, dh: float = 1e-5):
        self.fn = fn
        self.dh = dh

    def __call__(self, y, u):
        return (self.fn(y, u + self.dh) - self.fn(y, u - self.dh)) / (2 * self.dh)


def tabulated_forcing(section: CrossSection, y_pts: np.ndarray,
                      u_pts: np.ndarray, a_table: np.ndarray,
                      tol_origin: float = 1e-8) -> Forcing:
    """General forcing from a table a[y_i, u_j], bilinearly interpolated.

    Rejects tables with a(y, 0) != 0 beyond tolerance; G is cached by
    cumulative Simpson quadrature of each y-slice.
    """
    y_pts = np.asarray(y_pts, dtype=float)
    u_pts = np.asarray(u_pts, dtype=float)
    a_table = np.asarray(a_table, dtype=float)
    if a_table.shape != (y_pts.size, u_pts.size):
        raise ModelError("forcing table shape must be (len(y), len(u))")
    if u_pts[0] > 0.0 or u_pts[-1] < 1.0:
        raise ModelError("forcing table must cover u in [0, 1]")

    a0 = np.abs(np.array([np.interp(0.0, u_pts, a_table[i]) for i in range(y_pts.size)]))
    if np.max(a0) > tol_origin:
        raise ModelError(
            f"nonzero-at-origin: tabulated forcing has max |a(y,0)| = {np.max(a0):.3g}")

    a = _GridEval(y_pts, u_pts, a_table)

    # cumulative antiderivative cached per table row; including the table's
    # own u-breakpoints makes the trapezoid rule exact for the interpolant
    base = np.linspace(min(u_pts[0], -0.5), max(u_pts[-1], 1.5), 2049)
    u_fine = np.unique(np.concatenate((base, u_pts)))
    du = np.diff(u_fine)
    rows = np.empty((y_pts.size, u_fine.size))
    for i, yv in enumerate(y_pts):
        av = a(np.full(u_fine.size, yv), u_fine)
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (av[1:] + av[:-1]) * du)))
        cum -= np.interp(0.0, u_fine, cum)
        rows[i] = cum
    big_g = _GridEval(y_pts, u_fine, rows)
    a_u = _CentralDiffU(a)

    g = big_g(section.y, np.ones(section.nodes))
    _verify_antiderivative(a, big_g, section)
    return Forcing(section, a, big_g, a_u, np.asarray(g, dtype=float), name="tabulated")


@dataclass
class Field:
    """Scalar field u(y, z) on a cylinder window; mutated in place by runs."""

    grid: CylinderGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ModelError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ModelError("field values must be finite")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)


@dataclass
class Profile:
    """Scalar profile on the cross-section; -inf marks empty (masked) nodes."""

    section: CrossSection
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.section.nodes,):
            raise ModelError("profile length must match the cross-section grid")
        bad = np.isnan(self.values) | (self.values == np.inf)
        if np.any(bad):
            raise ModelError("profile values must be finite or -inf")

    @property
    def mask(self) -> np.ndarray:
        """True where the profile is -inf (empty column)."""
        return np.isneginf(self.values)

    @property
    def is_classical(self) -> bool:
        return not bool(self.mask.any())

    def copy(self) -> "Profile":
        return Profile(self.section, self.values.copy())


def constant_profile(section: CrossSection, value: float) -> Profile:
    return Profile(section, np.full(section.nodes, float(value)))


@dataclass(frozen=True)
class SpeedResult:
    """A selected wave speed with provenance and diagnostics."""

    speed: float
    method: str
    bracket: tuple[float, float]
    residual: float
    diagnostics: dict = field(default_factory=dict)


def check_well_constants(well: DoubleWell, forcing: Forcing, eps_list,
                         c: float = 1.0, delta0: float = 0.2,
                         n_u: int = 801) -> dict:
    """Scan whether W/eps dominates G outside the upper-well neighborhood.

    For each eps, checks on a dense (y, u) grid that W(u)/eps - G(y,u) >= 0
    for u outside (1 - C sqrt(eps), 1 + C sqrt(eps)), and that the same
    expression is increasing on [1 + C eps, 1 + delta0].  Report-only; also
    returns the largest passing eps from the supplied list.
    """
    eps_list = [float(e) for e in np.atleast_1d(eps_list)]
    y = forcing.section.y
    results = {}
    for eps in eps_list:
        u_all = np.linspace(well.certificate.u_lo, well.certificate.u_hi, n_u)
        in_range = eps <= delta0 / c
        if in_range:
            lo, hi = 1.0 - c * np.sqrt(eps), 1.0 + c * np.sqrt(eps)
            outside = u_all[(u_all <= lo) | (u_all >= hi)]
            band = np.linspace(1.0 + c * eps, 1.0 + delta0, 201)
        else:
            # beyond the guaranteed range eps <= delta0/C the comparison
            # must hold without any excluded neighborhood
            outside = u_all
            band = np.linspace(1.0, 1.0 + delta0, 201)
        if outside.size:
            uu, yy = np.meshgrid(outside, y)
            vals = well.w(uu) / eps - forcing.biggrad(yy, uu)
            nonneg = bool(vals.min() >= -1e-12)
        else:
            nonneg = True
        if band[0] >= band[-1]:
            increasing = True
        else:
            ub, yb = np.meshgrid(band, y)
            vb = well.w(ub) / eps - forcing.biggrad(yb, ub)
            increasing = bool(np.all(np.diff(vb, axis=1) >= -1e-12))
        results[eps] = {"nonnegative_outside": nonneg, "increasing_band": increasing,
                        "in_guaranteed_range": in_range,
                        "passes": nonneg and increasing}
    passing = [e for e in eps_list if results[e]["passes"]]
    return {"per_eps": results, "largest_passing_eps": max(passing) if passing else None,
            "C": c, "delta0": delta0}
