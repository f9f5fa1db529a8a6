"""Experiment configuration: a single JSON document with a strict schema.

Unknown keys anywhere are errors, so a typo in a tolerance name cannot
silently fall back to a default.  The schema_version field guards against
stale files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .diffuse import DiffuseRunParams
from .errors import ConfigError
from .model import (CrossSection, DoubleWell, Forcing, cosine_forcing,
                    cubic_bistable_well, product_forcing, quartic_double_well,
                    tabulated_forcing)
from .sharp import SharpRunParams

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "well", "forcing", "section", "eps_list",
             "tolerances", "sharp", "diffuse", "conditions", "simulate",
             "stability", "density"}
_WELL_KEYS = {"kind", "threshold"}
_FORCING_KEYS = {"kind", "g0", "path"}
_G0_KEYS = {"kind", "value", "mean", "relative_amplitude", "path"}
_SECTION_KEYS = {"length", "nodes"}
_TOL_KEYS = {"tol_c_sharp", "tol_c_diffuse", "residual"}
_SHARP_KEYS = {"nodes", "dt_factor", "max_time", "shape_drift_tol",
               "smoothing_schedule", "minimizer_max_iter", "tol_c"}
_DIFFUSE_KEYS = {"resolution", "dt_factor", "fine_dt_factor", "fine_dz_scale",
                 "window", "theta_pin", "max_time", "settle_time",
                 "measure_time", "probe_time", "tol_c", "bracket_margin"}
_CONDITIONS_KEYS = {"C", "delta0", "C_omega", "max_intervals"}
_SIMULATE_KEYS = {"eps", "kind", "width", "run_time", "theta", "z0"}
_STABILITY_KEYS = {"eps", "run_time", "m", "initial_kinds", "width", "n_checks"}
_DENSITY_KEYS = {"eps", "alpha", "r0", "R0", "beta"}


def _check_keys(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)} "
                          f"(allowed: {sorted(allowed)})")


@dataclass
class ExperimentConfig:
    raw: dict
    base_dir: str = "."

    # ---- builders -------------------------------------------------------
    def section(self) -> CrossSection:
        sec = self.raw.get("section", {})
        return CrossSection(float(sec.get("length", 1.0)),
                            int(sec.get("nodes", 201)))

    def well(self) -> DoubleWell:
        w = self.raw.get("well", {"kind": "quartic"})
        if w["kind"] == "quartic":
            return quartic_double_well()
        if w["kind"] == "cubic":
            if "threshold" not in w:
                raise ConfigError("cubic well needs a threshold")
            return cubic_bistable_well(float(w["threshold"]))
        raise ConfigError(f"unknown well kind {w['kind']!r}")

    def forcing(self, section: CrossSection | None = None) -> Forcing:
        section = section or self.section()
        f = self.raw.get("forcing")
        if f is None:
            raise ConfigError("missing forcing")
        kind = f.get("kind")
        if kind == "product":
            g0 = f.get("g0")
            if g0 is None:
                raise ConfigError("product forcing needs g0")
            gk = g0.get("kind")
            if gk == "constant":
                return product_forcing(section, float(g0["value"]))
            if gk == "cosine":
                return cosine_forcing(section, float(g0["mean"]),
                                      float(g0["relative_amplitude"]))
            if gk == "table":
                path = os.path.join(self.base_dir, g0["path"])
                y, v = _read_columns(path, ["y", "g0"])
                return product_forcing(section, np.interp(section.y, y, v),
                                       name="product(g0=table)")
            raise ConfigError(f"unknown g0 kind {gk!r}")
        if kind == "table":
            path = os.path.join(self.base_dir, f["path"])
            return _forcing_from_table(path, section)
        raise ConfigError(f"unknown forcing kind {kind!r}")

    def eps_list(self) -> list[float]:
        eps = self.raw.get("eps_list", [0.1, 0.05, 0.025])
        eps = [float(e) for e in eps]
        if any(e <= 0 for e in eps):
            raise ConfigError("eps_list entries must be positive")
        return eps

    def tolerances(self) -> dict:
        t = dict({"tol_c_sharp": 1e-4, "tol_c_diffuse": 1e-3, "residual": 1e-8})
        t.update(self.raw.get("tolerances", {}))
        if any(v <= 0 for v in t.values()):
            raise ConfigError("tolerances must be positive")
        return t

    def sharp_params(self) -> SharpRunParams:
        over = dict(self.raw.get("sharp", {}))
        over.setdefault("tol_c", self.tolerances()["tol_c_sharp"])
        if "smoothing_schedule" in over:
            over["smoothing_schedule"] = tuple(over["smoothing_schedule"])
        return SharpRunParams(**over)

    def diffuse_params(self, eps: float) -> DiffuseRunParams:
        over = dict(self.raw.get("diffuse", {}))
        over.setdefault("tol_c", self.tolerances()["tol_c_diffuse"])
        if "window" in over:
            over["window"] = tuple(over["window"])
        return DiffuseRunParams(eps=eps, **over)

    def conditions_options(self) -> dict:
        d = {"C": 1.0, "delta0": 0.2, "C_omega": 1.0, "max_intervals": 3}
        d.update(self.raw.get("conditions", {}))
        return d

    def command_options(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))


def _read_columns(path: str, expected: list[str]):
    try:
        with open(path) as f:
            lines = [ln.strip() for ln in f if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc
    header = [h.strip() for h in lines[0].split(",")]
    if header != expected:
        raise ConfigError(f"{path}: expected header {','.join(expected)}")
    cols = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return (cols[:, i] for i in range(cols.shape[1]))


def _forcing_from_table(path: str, section: CrossSection) -> Forcing:
    y, u, a = _read_columns(path, ["y", "u", "a"])
    y_pts = np.unique(y)
    u_pts = np.unique(u)
    if y_pts.size * u_pts.size != y.size:
        raise ConfigError(f"{path}: table must be a full (y, u) grid")
    order = np.lexsort((u, y))
    table = np.asarray(a)[order].reshape(y_pts.size, u_pts.size)
    return tabulated_forcing(section, y_pts, u_pts, table)


def validate(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    _check_keys(raw, _TOP_KEYS, "config")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    if "forcing" not in raw:
        raise ConfigError("missing forcing")
    _check_keys(raw.get("well", {"kind": "quartic"}), _WELL_KEYS, "well")
    _check_keys(raw["forcing"], _FORCING_KEYS, "forcing")
    if raw["forcing"].get("kind") == "product":
        _check_keys(raw["forcing"].get("g0", {}), _G0_KEYS, "forcing.g0")
    _check_keys(raw.get("section", {}), _SECTION_KEYS, "section")
    _check_keys(raw.get("tolerances", {}), _TOL_KEYS, "tolerances")
    _check_keys(raw.get("sharp", {}), _SHARP_KEYS, "sharp")
    _check_keys(raw.get("diffuse", {}), _DIFFUSE_KEYS, "diffuse")
    _check_keys(raw.get("conditions", {}), _CONDITIONS_KEYS, "conditions")
    _check_keys(raw.get("simulate", {}), _SIMULATE_KEYS, "simulate")
    _check_keys(raw.get("stability", {}), _STABILITY_KEYS, "stability")
    _check_keys(raw.get("density", {}), _DENSITY_KEYS, "density")
    cfg = ExperimentConfig(raw, base_dir)
    cfg.section()
    cfg.eps_list()
    cfg.tolerances()
    return cfg


def load(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate(raw, base_dir=os.path.dirname(os.path.abspath(path)))
