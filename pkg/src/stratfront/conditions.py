"""Constructive checks of the forcing conditions that gate wave selection.

The invasion condition asks for a cross-section subset where the forcing
gain beats the perimeter cost; in 1D that is an exact dynamic program over
unions of up to a few intervals.  The uniqueness conditions are a list of
sufficient criteria evaluated in order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .model import DoubleWell, Forcing


@dataclass(frozen=True)
class AssumptionReport:
    assumption: str
    verdict: str               # holds / fails / undetermined
    witness: object = None     # interval list or condition label
    margins: dict = field(default_factory=dict)
    notes: tuple = ()


def _refined_cells(forcing: Forcing, refine: int):
    y = forcing.section.y
    g = forcing.g
    fine = np.linspace(0.0, forcing.section.length,
                       (forcing.section.nodes - 1) * refine + 1)
    gf = np.interp(fine, y, g)
    cell = 0.5 * (gf[1:] + gf[:-1]) * np.diff(fine)
    return fine, cell


def _best_interval_union(cell: np.ndarray, endpoint_cost: float,
                         max_intervals: int):
    """Maximize sum of up to k disjoint cell runs minus interior endpoint costs.

    Runs touching the domain boundary pay no cost there.  Exact DP; returns
    (value, list of (start, stop) cell-index pairs).
    """
    n = cell.size
    neg = -np.inf
    # state: (intervals used, inside?) -> best value; parents for recovery
    best = {(0, False): 0.0}
    parent = {}
    for j in range(n):
        new = {}
        newp = {}
        for (k, inside), v in best.items():
            # stay outside / close before consuming cell j
            if inside:
                cost = endpoint_cost  # closing at node j (interior since j < n)
                key = (k, False)
                cand = v - cost
                if cand > new.get(key, neg):
                    new[key] = cand
                    newp[key] = ((k, inside), "close", j)
            key = (k, inside)
            if not inside:
                if v > new.get(key, neg):
                    new[key] = v
                    newp[key] = ((k, inside), "skip", j)
            # consume cell j inside an interval
            if inside:
                key = (k, True)
                cand = v + cell[j]
                if cand > new.get(key, neg):
                    new[key] = cand
                    newp[key] = ((k, inside), "grow", j)
            else:
                if k < max_intervals:
                    cost = endpoint_cost if j > 0 else 0.0
                    key = (k + 1, True)
                    cand = v - cost + cell[j]
                    if cand > new.get(key, neg):
                        new[key] = cand
                        newp[key] = ((k, inside), "open", j)
        best = new
        parent[j] = newp
    # close any open interval at the right boundary (free there)
    final = {}
    final_parent = {}
    for (k, inside), v in best.items():
        key = k
        cand = v
        tag = "end-closed" if not inside else "end-open"
        if cand > final.get(key, neg):
            final[key] = cand
            final_parent[key] = ((k, inside), tag)
    k_star = max(final, key=lambda k: final[k])
    value = final[k_star]

    # walk parents back to recover the runs
    state, tag = final_parent[k_star]
    runs = []
    open_stop = None
    if tag == "end-open":
        open_stop = n
    j = n - 1
    while j >= 0:
        prev, action, _ = parent[j][state]
        if action == "close" and open_stop is None:
            open_stop = j
        elif action == "open" and open_stop is not None:
            runs.append((j, open_stop))
            open_stop = None
        state = prev
        j -= 1
    runs.reverse()
    return value, runs


def check_invasion_condition(well: DoubleWell, forcing: Forcing,
                             max_intervals: int = 3,
                             refine: int = 4) -> AssumptionReport:
    """Decide whether some subset A beats the perimeter cost: int_A g > c_w Per.

    Fast path: positive total forcing makes the whole section a witness with
    zero perimeter.  Otherwise an exact dynamic program searches unions of
    up to max_intervals intervals with endpoints on a refined grid.
    """
    sec = forcing.section
    total = float(sec.quad_weights() @ forcing.g)
    if total > 0.0:
        return AssumptionReport(
            "invasion", "holds", witness=[(0.0, sec.length)],
            margins={"margin": total, "integral": total, "perimeter_cost": 0.0},
            notes=("positive total forcing: the whole cross-section wins",))

    fine, cell = _refined_cells(forcing, refine)
    value, runs = _best_interval_union(cell, well.c_w, max_intervals)
    witness = [(float(fine[a]), float(fine[b])) for a, b in runs]
    verdict = "holds" if value > 0.0 else "fails"
    per = sum(int(a > 1e-14) + int(b < sec.length - 1e-14) for a, b in witness)
    integral = value + well.c_w * per
    return AssumptionReport(
        "invasion", verdict, witness=witness if witness else None,
        margins={"margin": float(value), "integral": float(integral),
                 "perimeter_cost": well.c_w * per},
        notes=(f"searched unions of <= {max_intervals} intervals on a "
               f"{refine}x refined grid",))


def check_uniqueness_conditions(well: DoubleWell, forcing: Forcing,
                                c_omega: float = 1.0,
                                dim: int = 2) -> AssumptionReport:
    """Evaluate the sufficient conditions for wave uniqueness, in order.

    Requires positive total forcing.  Conditions: (ii) positive forcing in a
    planar section; (iii) small oscillation when the minimum dips below
    zero; (iv) the positive analog in higher dimension; (v) a pointwise
    slope bound.  The relative isoperimetric constant is configuration
    (default 1) and the dim = 2 evaluation of (iii)-(iv) is flagged as
    degenerate.  The non-constructive no-solution condition (i) is not
    evaluated.
    """
    sec = forcing.section
    g = forcing.g
    total = float(sec.quad_weights() @ g)
    if total <= 0.0:
        raise ModelError("uniqueness conditions require positive total forcing")

    gmin = float(np.min(g))
    gmax = float(np.max(g))
    omega = sec.length
    margins = {}
    notes = ["condition (i) (no prescribed-curvature hypersurface): not evaluated"]
    holds = None

    margins["ii"] = gmin
    if dim == 2 and gmin > 0.0:
        holds = "ii"

    iso_bound = c_omega * well.c_w * 2.0 ** (1.0 / (dim - 1)) * omega ** (-1.0 / (dim - 1))
    margins["iii"] = iso_bound - (gmax - gmin)
    if dim == 2:
        notes.append("isoperimetric formulas evaluated verbatim at dim = 2 "
                     "(degenerate; C_Omega is configuration)")
    if holds is None and gmin <= 0.0 and margins["iii"] > 0.0:
        holds = "iii"

    if dim > 2:
        margins["iv"] = iso_bound - gmax
        if holds is None and gmin > 0.0 and margins["iv"] > 0.0:
            holds = "iv"
    else:
        margins["iv"] = None
        notes.append("condition (iv) needs dim > 2: not applicable")

    dg = np.gradient(g, sec.dy)
    margins["v"] = float(np.min(g * g - (dim - 1) * np.abs(dg)))
    if holds is None and gmin > 0.0 and margins["v"] > 0.0:
        holds = "v"

    verdict = "holds" if holds else "undetermined"
    return AssumptionReport("uniqueness", verdict, witness=holds,
                            margins=margins, notes=tuple(notes))
