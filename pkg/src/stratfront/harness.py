"""Experiment orchestration: the interface-width sweep, the long-time
stability experiment, level-set geometry, and density audits.

Sweep rows are computed independently (optionally in parallel) and merged
in width order, never completion order, so reruns are reproducible.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diffuse, sharp
from .errors import ModelError, NumericalError
from .model import CylinderGrid, DoubleWell, Field, Forcing, Profile

_N_DIM = 2  # cylinder dimension: 1D cross-section plus the axis


def extract_level_segments(u: Field, theta: float) -> np.ndarray:
    """Marching-squares segments of {u = theta}, shape (n, 2, 2) as (y, z).

    z carries the window offset so segments live in physical coordinates.
    """
    vals = u.values
    y = u.grid.section.y
    z = u.grid.z + u.grid.z_shift
    s = vals - theta
    segs = []
    ny, nz = vals.shape
    for i in range(ny - 1):
        for j in range(nz - 1):
            c = [s[i, j], s[i, j + 1], s[i + 1, j + 1], s[i + 1, j]]
            pts = []
            # cell edges: bottom (j..j+1 at i), right (i..i+1 at j+1),
            # top (j..j+1 at i+1), left (i..i+1 at j)
            if c[0] * c[1] < 0:
                t = c[0] / (c[0] - c[1])
                pts.append((y[i], z[j] + t * (z[j + 1] - z[j])))
            if c[1] * c[2] < 0:
                t = c[1] / (c[1] - c[2])
                pts.append((y[i] + t * (y[i + 1] - y[i]), z[j + 1]))
            if c[3] * c[2] < 0:
                t = c[3] / (c[3] - c[2])
                pts.append((y[i + 1], z[j] + t * (z[j + 1] - z[j])))
            if c[0] * c[3] < 0:
                t = c[0] / (c[0] - c[3])
                pts.append((y[i] + t * (y[i + 1] - y[i]), z[j]))
            if len(pts) >= 2:
                segs.append((pts[0], pts[1]))
                if len(pts) == 4:  # saddle: pair the remaining crossings
                    segs.append((pts[2], pts[3]))
    if not segs:
        return np.empty((0, 2, 2))
    return np.asarray(segs)


def profile_segments(psi: Profile, z_clip: tuple[float, float] | None = None) -> np.ndarray:
    y = psi.section.y
    v = psi.values
    segs = []
    for i in range(len(y) - 1):
        if np.isneginf(v[i]) or np.isneginf(v[i + 1]):
            continue
        segs.append(((y[i], v[i]), (y[i + 1], v[i + 1])))
    return np.asarray(segs) if segs else np.empty((0, 2, 2))


def _clip_segments(segs: np.ndarray, z_lo: float, z_hi: float) -> np.ndarray:
    if segs.size == 0:
        return segs
    zmid = 0.5 * (segs[:, 0, 1] + segs[:, 1, 1])
    keep = (zmid >= z_lo) & (zmid <= z_hi)
    return segs[keep]


def _sample_segments(segs: np.ndarray, per_seg: int = 3) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_seg)[None, :, None]
    pts = segs[:, 0][:, None, :] * (1 - t) + segs[:, 1][:, None, :] * t
    return pts.reshape(-1, 2)


def _directed_hausdorff(pts: np.ndarray, segs: np.ndarray) -> float:
    a = segs[:, 0]
    ab = segs[:, 1] - segs[:, 0]
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    worst = 0.0
    for chunk in np.array_split(pts, max(1, len(pts) // 2048)):
        diff = chunk[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", diff, ab) / denom, 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(chunk[:, None, :] - proj, axis=2).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


def hausdorff_level_set(u: Field, theta: float, psi: Profile, m: float) -> float:
    """Symmetric Hausdorff distance between {u = theta} and the graph of psi,
    both clipped to the slab |z| <= m."""
    level = _clip_segments(extract_level_segments(u, theta), -m, m)
    graph = _clip_segments(profile_segments(psi), -m, m)
    if level.size == 0:
        raise NumericalError("empty level set in the comparison slab")
    if graph.size == 0:
        raise ModelError("profile graph misses the comparison slab")
    d1 = _directed_hausdorff(_sample_segments(level), graph)
    d2 = _directed_hausdorff(_sample_segments(graph), level)
    return max(d1, d2)


@dataclass(frozen=True)
class SweepRow:
    eps: float
    c_eps: float
    dynamic_speed: float
    err_abs: float
    hausdorff: float
    v_sup_dev: float
    wall_clock: float
    failed: str | None = None


CSV_COLUMNS = ["eps", "c_eps", "dynamic_speed", "err_abs", "hausdorff", "v_sup_dev"]


@dataclass
class SweepResult:
    rows: list
    c_sharp: float
    psi: Profile
    monotone_errors: bool
    fit_order: float
    extrapolated_limit: float
    extras: dict = field(default_factory=dict)

    def csv_rows(self):
        # wall-clock is reported in the manifest, not the table, so the CSV
        # is byte-stable across reruns
        for r in self.rows:
            yield [r.eps, r.c_eps, r.dynamic_speed, r.err_abs, r.hausdorff,
                   r.v_sup_dev]


def sharp_reference(well: DoubleWell, forcing: Forcing,
                    params: sharp.SharpRunParams | None = None):
    """Critical speed and max-normalized profile from the sharp model."""
    params = params or sharp.SharpRunParams()
    res = sharp.find_critical_speed(params, well, forcing)
    zeta = res.diagnostics["minimizer"].zeta
    psi = sharp.profile_from_lift(zeta, res.speed)
    finite = ~psi.mask
    vals = psi.values.copy()
    vals[finite] -= vals[finite].max()
    return res.speed, Profile(psi.section, vals), res


def _sweep_row(eps: float, well: DoubleWell, forcing: Forcing,
               c_sharp: float, psi: Profile, theta: float,
               slab: float, diffuse_overrides: dict) -> SweepRow:
    t0 = time.perf_counter()
    try:
        params = diffuse.DiffuseRunParams(eps=eps, **diffuse_overrides)
        res = diffuse.find_critical_speed(eps, params, well, forcing,
                                          cross_check=True)
        wave = res.diagnostics["wave"]
        eq = res.diagnostics["v_limit"]
        d_h = hausdorff_level_set(wave, theta, psi, slab)
        v_dev = float(np.max(np.abs(eq.profile.values - 1.0)))
        return SweepRow(eps=eps, c_eps=res.speed,
                        dynamic_speed=res.diagnostics["dynamic_speed"],
                        err_abs=abs(res.speed - c_sharp), hausdorff=d_h,
                        v_sup_dev=v_dev, wall_clock=time.perf_counter() - t0)
    except (NumericalError, ModelError) as exc:
        return SweepRow(eps=eps, c_eps=np.nan, dynamic_speed=np.nan,
                        err_abs=np.nan, hausdorff=np.nan, v_sup_dev=np.nan,
                        wall_clock=time.perf_counter() - t0, failed=str(exc))


def run_eps_sweep(eps_list, well: DoubleWell, forcing: Forcing,
                  theta: float = 0.5, slab: float | None = None,
                  workers: int = 1,
                  sharp_params: sharp.SharpRunParams | None = None,
                  diffuse_overrides: dict | None = None) -> SweepResult:
    """Width sweep: per-eps diffuse speed and wave versus the sharp reference.

    Rows marked failed keep the sweep alive; order fits use the last three
    clean rows.  The comparison slab defaults to 2 plus the profile height
    range.
    """
    eps_list = sorted(float(e) for e in eps_list)[::-1]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ModelError("eps list must be strictly decreasing")
    from .conditions import check_invasion_condition
    if check_invasion_condition(well, forcing).verdict != "holds":
        raise NumericalError("invasion condition must hold for a sweep")

    c_sharp, psi, sharp_res = sharp_reference(well, forcing, sharp_params)
    if slab is None:
        finite = ~psi.mask
        slab = 2.0 + float(psi.values[finite].max() - psi.values[finite].min())
    overrides = diffuse_overrides or {}

    args = [(eps, well, forcing, c_sharp, psi, theta, slab, overrides)
            for eps in eps_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row_star, args))
    else:
        rows = [_sweep_row(*a) for a in args]
    rows.sort(key=lambda r: -r.eps)

    clean = [r for r in rows if r.failed is None]
    errs = np.array([r.err_abs for r in clean])
    eps_clean = np.array([r.eps for r in clean])
    monotone = bool(np.all(np.diff(errs) < 0)) if len(errs) >= 2 else False
    order = np.nan
    limit = np.nan
    if len(clean) >= 3:
        e3, r3 = eps_clean[-3:], errs[-3:]
        if np.all(r3 > 0):
            order = float(np.polyfit(np.log(e3), np.log(r3), 1)[0])
        c3 = [r.c_eps for r in clean[-3:]]
        ratio = e3[1] / e3[2]
        p = order if np.isfinite(order) and order > 0 else 2.0
        limit = float(c3[-1] + (c3[-1] - c3[-2]) / (ratio ** p - 1.0))
    uniqueness = None
    try:
        from .conditions import check_uniqueness_conditions
        uniqueness = check_uniqueness_conditions(well, forcing).verdict
    except ModelError:
        uniqueness = "precondition-failed"
    extras = {
        "sharp_bracket": sharp_res.bracket,
        "uniqueness_verdict": uniqueness,
        "subsequence_caveat": uniqueness != "holds",
        "slab": slab,
    }
    return SweepResult(rows, c_sharp, psi, monotone, order, limit, extras)


def _sweep_row_star(a):
    return _sweep_row(*a)


def subgraph_indicator(grid: CylinderGrid, psi: Profile) -> np.ndarray:
    """Indicator of {z < psi(y)} in window coordinates."""
    z = grid.z
    vals = np.where(psi.mask, -np.inf, psi.values)
    on_grid = np.interp(grid.section.y, psi.section.y, vals)
    return (z[None, :] < on_grid[:, None]).astype(float)


def aligned_l1_distance(u: Field, psi: Profile, theta: float, m: float) -> float:
    """L1 distance over the slab |z| <= m after aligning the theta crossing to 0.

    Alignment absorbs all window shifts, so the slab and the subgraph
    indicator live in window coordinates around the front.
    """
    aligned = diffuse.align_to_level(u, theta, 0.0)
    chi = subgraph_indicator(aligned.grid, psi)
    grid = aligned.grid
    wy = grid.section.quad_weights()[:, None]
    wz = np.full(grid.nz, grid.dz)
    wz[0] = wz[-1] = 0.5 * grid.dz
    wz = wz * ((grid.z >= -m) & (grid.z <= m))
    return float(np.sum(np.abs(aligned.values - chi) * wy * wz[None, :]))


def stability_experiment(eps: float, initials, well: DoubleWell,
                         forcing: Forcing, psi: Profile,
                         params: diffuse.DiffuseRunParams | None = None,
                         m: float = 2.0, run_time: float = 12.0,
                         n_checks: int = 30, band_delta: float = 0.2,
                         plateau_window: int = 5,
                         plateau_tol: float = 0.05) -> dict:
    """Long-time relaxation of front-like data toward the sharp-interface set.

    Evolves each initial field, sampling the aligned L1 distance to the
    subgraph indicator on a fixed schedule; the distance must settle to a
    plateau (trailing window with small relative spread).  The limit order
    is fixed: each run is driven to its plateau at this eps before any
    cross-eps comparison is made by the caller.
    """
    params = params or diffuse.DiffuseRunParams(eps=eps)
    out = {"eps": eps, "runs": [], "m": m}
    final_fields = []
    for u0 in initials:
        vals = u0.values
        if vals.min() < -1e-12 or vals.max() > 1.0 + band_delta + 1e-12:
            raise ModelError("initial data leaves [0, 1 + delta]")
        if float(np.min(vals[:, 0])) < 1.0 - band_delta:
            raise ModelError("initial data must approach the invaded state "
                             "on the far left")
        u = u0.copy()
        stepper = diffuse.DiffuseStepper(u.grid, well, forcing, eps, params.dt)
        times = np.linspace(run_time / n_checks, run_time, n_checks)
        rec_t, rec_d = [0.0], [aligned_l1_distance(u, psi, 0.5, m)]
        done_steps = 0
        from . import _kernels as K
        for t in times:
            target = int(round(t / params.dt))
            stepper.run(u, target - done_steps)
            done_steps = target
            # keep the front at window center so the comparison slab always
            # sees real data on both sides (integer shifts are exact)
            lead = K.crossing_position(u.values, 0.5, u.grid.z_min, u.grid.dz)
            if not np.isnan(lead):
                k = int(round(lead / u.grid.dz))
                if k != 0:
                    left, right = u.values[:, 0].copy(), u.values[:, -1].copy()
                    K.shift_columns(u.values, k, left, right)
                    u.grid = u.grid.shifted(k * u.grid.dz)
            rec_t.append(float(u.time))
            rec_d.append(aligned_l1_distance(u, psi, 0.5, m))
        tail = np.array(rec_d[-plateau_window:])
        plateau = float(tail.mean())
        spread = float(tail.max() - tail.min())
        settled = spread <= plateau_tol * max(plateau, 1e-12)
        out["runs"].append({
            "initial_distance": rec_d[0], "plateau": plateau,
            "settled": settled, "ratio": rec_d[0] / max(plateau, 1e-300),
            "times": rec_t, "distances": rec_d})
        final_fields.append(diffuse.align_to_level(u, 0.5, 0.0))
    if len(final_fields) >= 2:
        base = final_fields[0].values
        out["max_pairwise_l1"] = max(
            float(np.mean(np.abs(f.values - base))) * forcing.section.length
            * (final_fields[0].grid.z_max - final_fields[0].grid.z_min)
            for f in final_fields[1:])
    out["plateau"] = max(r["plateau"] for r in out["runs"])
    out["all_settled"] = all(r["settled"] for r in out["runs"])
    return out


@dataclass(frozen=True)
class DensityAudit:
    centers: list
    radii: list
    alpha: float
    table: dict
    verdict: str
    fitted_alpha: float = np.nan


def _stretched_nodes(u: Field, eps: float):
    grid = u.grid
    ys = grid.section.y / eps
    zs = (grid.z + grid.z_shift) / eps
    wy = grid.section.quad_weights() / eps
    wz = np.full(grid.nz, grid.dz / eps)
    wz[0] = wz[-1] = 0.5 * grid.dz / eps
    return ys, zs, wy, wz


def _ball_average(f2: np.ndarray, ys, zs, wy, wz, cy, cz, r) -> float:
    dy2 = (ys - cy)[:, None] ** 2
    dz2 = (zs - cz)[None, :] ** 2
    inside = dy2 + dz2 <= r * r
    w = wy[:, None] * wz[None, :] * inside
    tot = float(w.sum())
    if tot <= 0:
        return np.nan
    return float((w * f2).sum() / tot)


def interface_centers(u: Field, eps: float, theta: float = 0.5,
                      max_centers: int = 8,
                      clearance: float | None = None) -> list:
    """Stretched coordinates of nodes nearest the theta level, spread in y.

    With a clearance, only centers whose balls of that radius stay inside
    the cylinder width are kept, plus the wall nodes themselves (where the
    Neumann reflection keeps ball fractions radius-stable).  Centers at
    intermediate wall distances see radius-dependent clipping and would
    corrupt growth-exponent fits.
    """
    grid = u.grid
    ny = grid.section.nodes
    width = grid.section.length / eps
    picks = []
    candidates = set(np.linspace(0, ny - 1, max_centers).astype(int))
    candidates.add((ny - 1) // 2)
    for i in sorted(candidates):
        i = int(i)
        ys = grid.section.y[i] / eps
        if clearance is not None:
            at_wall = min(ys, width - ys) < 1e-12
            cleared = min(ys, width - ys) >= clearance - 1e-12
            if not (at_wall or cleared):
                continue
        j = int(np.argmin(np.abs(u.values[i] - theta)))
        picks.append((ys, (grid.z[j] + grid.z_shift) / eps))
    seen = []
    for p in picks:
        if all(abs(p[0] - q[0]) + abs(p[1] - q[1]) > 1e-9 for q in seen):
            seen.append(p)
    return seen


def density_audit_mean_square(u: Field, eps: float, centers, alpha: float,
                              r0: int = 2, big_r: int = 10) -> DensityAudit:
    """Ball-average persistence audit of u^2 and (1-u)^2 in stretched frame.

    For every center whose r0-ball average clears alpha, the average must
    stay above alpha out to radius big_r; the audit also reports the
    largest alpha that would pass at every audited center.
    """
    if not (isinstance(r0, (int, np.integer)) and isinstance(big_r, (int, np.integer))
            and r0 + 1 <= big_r):
        raise ModelError("radii must be integers with r0 + 1 <= R0")
    ys, zs, wy, wz = _stretched_nodes(u, eps)
    radii = list(range(r0, big_r + 1))
    table = {"u2": {}, "one_minus_u2": {}}
    fits = []
    verdict = "pass"
    for label, f2 in (("u2", u.values ** 2), ("one_minus_u2", (1.0 - u.values) ** 2)):
        for cy, cz in centers:
            avgs = [_ball_average(f2, ys, zs, wy, wz, cy, cz, r) for r in radii]
            if np.any(np.isnan(avgs)):
                raise ModelError("audit ball leaves the window")
            table[label][(cy, cz)] = avgs
            if avgs[0] >= alpha:
                fits.append(min(avgs))
                if min(avgs) < alpha:
                    verdict = "fail"
    fitted = float(min(fits)) if fits else np.nan
    return DensityAudit(list(centers), radii, alpha, table,
                        verdict if fits else "vacuous-pass", fitted)


def density_audit_level_set(u: Field, eps: float, beta: float, radii,
                            centers=None) -> dict:
    """Growth of the superlevel volume fraction: fit mu(R) ~ C R^n.

    Passes when the fitted exponent reaches n - 0.2 at every center."""
    ys, zs, wy, wz = _stretched_nodes(u, eps)
    radii = [float(r) for r in radii]
    if centers is None:
        centers = interface_centers(u, eps)
    ind = (np.abs(u.values) > beta).astype(float)
    results = {}
    exps = []
    for cy, cz in centers:
        mu1 = _ball_measure(ind, ys, zs, wy, wz, cy, cz, 1.0)
        if not mu1 > 0:
            results[(cy, cz)] = {"status": "precondition-empty"}
            continue
        mus = [_ball_measure(ind, ys, zs, wy, wz, cy, cz, r) for r in radii]
        fit = np.polyfit(np.log(radii), np.log(np.maximum(mus, 1e-300)), 1)
        exps.append(float(fit[0]))
        results[(cy, cz)] = {"mu": mus, "exponent": float(fit[0]),
                             "constant": float(np.exp(fit[1]))}
    if not exps:
        return {"status": "precondition-empty", "centers": results}
    return {"status": "pass" if min(exps) >= _N_DIM - 0.2 else "fail",
            "min_exponent": min(exps), "centers": results, "radii": radii}


def _ball_measure(ind, ys, zs, wy, wz, cy, cz, r) -> float:
    dy2 = (ys - cy)[:, None] ** 2
    dz2 = (zs - cz)[None, :] ** 2
    inside = dy2 + dz2 <= r * r
    return float((wy[:, None] * wz[None, :] * inside * ind).sum())


def density_constant_scan(u: Field, eps: float, delta: float = 0.3,
                          r_bar: float = 0.25, n_radii: int = 4,
                          max_centers: int = 6) -> dict:
    """Fitted constants of the unstretched ball-mass lower bounds.

    Scans interface-adjacent nodes with u >= delta (and u <= 1 - delta for
    the complementary bound) over radii between eps and r_bar, reporting
    the smallest integral / r^n ratio."""
    grid = u.grid
    ys = grid.section.y
    zs = grid.z + grid.z_shift
    wy = grid.section.quad_weights()
    wz = np.full(grid.nz, grid.dz)
    wz[0] = wz[-1] = 0.5 * grid.dz
    radii = np.linspace(1.5 * eps, r_bar, n_radii)
    consts = {"u2": np.inf, "one_minus_u2": np.inf}
    for label, f2, sel in (("u2", u.values ** 2, u.values >= delta),
                           ("one_minus_u2", (1 - u.values) ** 2,
                            u.values <= 1 - delta)):
        iy, iz = np.where(sel)
        if iy.size == 0:
            consts[label] = np.nan
            continue
        picks = np.linspace(0, iy.size - 1, min(max_centers, iy.size)).astype(int)
        for p in picks:
            cy, cz = ys[iy[p]], zs[iz[p]]
            for r in radii:
                if cz - r < zs[0] or cz + r > zs[-1]:
                    continue
                mass = float((wy[:, None] * wz[None, :] *
                              (((ys - cy)[:, None] ** 2 + (zs - cz)[None, :] ** 2)
                               <= r * r) * f2).sum())
                consts[label] = min(consts[label], mass / r ** _N_DIM)
    return consts
