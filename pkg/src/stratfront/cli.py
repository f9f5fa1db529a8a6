"""Command-line front end: configuration-driven experiments with CSV/JSON/SVG
artifacts.

Exit codes: 0 success (negative verdicts included), 2 configuration error,
3 numerical failure.  Failed commands leave a machine-readable error.json
in the output directory; partial artifacts never appear under final names
(atomic renames throughout).
"""

from __future__ import annotations

import hashlib
import json
import os
import sys

import click
import numpy as np

from . import __version__, conditions, diffuse, harness, plots, sharp
from .config import ExperimentConfig, load as load_config
from .errors import ConfigError, NumericalError, StratFrontError
from .io import append_jsonl, write_csv, write_json
from .model import check_well_constants, constant_profile


def _config_hash(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _manifest(out: str, command: str, cfg_path: str | None, seed: int,
              extra: dict | None = None):
    doc = {"tool": "stratfront", "version": __version__, "command": command,
           "seed": seed,
           "config_sha256": _config_hash(cfg_path) if cfg_path else None}
    doc.update(extra or {})
    write_json(os.path.join(out, "manifest.json"), doc)


def _fail(out: str, code: int, exc: Exception):
    record = {"error": {"type": type(exc).__name__, "message": str(exc),
                        "exit_code": code}}
    try:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "error.json"), record)
    except OSError:
        pass
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guard(ctx, fn):
    out = ctx.obj["out"]
    try:
        fn()
    except ConfigError as exc:
        _fail(out, 2, exc)
    except (NumericalError, StratFrontError) as exc:
        _fail(out, 3, exc)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="experiment configuration (JSON)")
@click.option("--out", "out_dir", type=click.Path(), default="out",
              help="output directory")
@click.option("--workers", type=int, default=1, help="parallel sweep rows")
@click.option("--seed", type=int, default=0, help="recorded in the manifest")
@click.pass_context
def main(ctx, config_path, out_dir, workers, seed):
    """Front-propagation lab for stratified media."""
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, out=out_dir, workers=workers, seed=seed)


def _load(ctx) -> ExperimentConfig:
    path = ctx.obj["config"]
    if path is None:
        raise ConfigError("--config is required for this command")
    return load_config(path)


def _prepare(ctx):
    cfg = _load(ctx)
    out = ctx.obj["out"]
    os.makedirs(out, exist_ok=True)
    return cfg, out


@main.command("speed-sharp")
@click.pass_context
def cmd_speed_sharp(ctx):
    """Critical speed of the sharp-interface model, both routes."""
    def run():
        cfg, out = _prepare(ctx)
        section = cfg.section()
        well, forcing = cfg.well(), cfg.forcing(section)
        params = cfg.sharp_params()
        res = sharp.find_critical_speed(params, well, forcing)
        dyn = sharp.measure_front_speed(constant_profile(section, 0.0),
                                        params, well, forcing)
        minimum = res.diagnostics["minimizer"]
        psi = sharp.profile_from_lift(minimum.zeta, res.speed)
        finite = ~psi.mask
        vals = psi.values.copy()
        vals[finite] -= vals[finite].max()
        agreement = abs(res.speed - dyn.speed) / res.speed
        write_json(os.path.join(out, "c_dagger.json"), {
            "value": res.speed, "bracket": list(res.bracket),
            "bracket_width_final": res.residual * 2,
            "dynamic_speed": dyn.speed, "relative_agreement": agreement,
            "method_agreement_ok": bool(agreement <= 0.01),
            "finger": res.diagnostics["finger"],
            "m_minimum": minimum.value})
        # plots first: the profile/m(c) CSV artifacts own these file names,
        # so they are written after the SVG sidecars
        scan = sorted(res.diagnostics["m_scan"])
        plots.plot_m_of_c(os.path.join(out, "m_of_c.svg"),
                          [c for c, _ in scan], [m for _, m in scan])
        write_csv(os.path.join(out, "m_of_c.csv"), ["c", "m"], scan)
        plots.plot_profile(os.path.join(out, "psi.svg"), section.y,
                           np.where(finite, vals, np.nan), label="psi",
                           masked=~finite)
        write_csv(os.path.join(out, "psi.csv"), ["y", "value", "masked"],
                  zip(section.y, np.where(finite, vals, np.nan),
                      ~finite))
        append_jsonl(os.path.join(out, "run.jsonl"),
                     {"event": "speed-sharp", "c_dagger": res.speed,
                      "dynamic": dyn.speed})
        _manifest(out, "speed-sharp", ctx.obj["config"], ctx.obj["seed"])
    _guard(ctx, run)


@main.command("speed-diffuse")
@click.pass_context
def cmd_speed_diffuse(ctx):
    """Variational wave speed of the diffuse model at the first eps."""
    def run():
        cfg, out = _prepare(ctx)
        eps = cfg.eps_list()[0]
        well = cfg.well()
        params = cfg.diffuse_params(eps)
        grid = params.build_grid(cfg.section().length)
        forcing = cfg.forcing(grid.section)
        res = diffuse.find_critical_speed(eps, params, well, forcing,
                                          cross_check=True)
        wave = res.diagnostics["wave"]
        energy = res.diagnostics["energy"]
        eq = res.diagnostics["v_limit"]
        write_json(os.path.join(out, "c_dagger_eps.json"), {
            "eps": eps, "value": res.speed, "bracket": list(res.bracket),
            "dynamic_speed": res.diagnostics["dynamic_speed"],
            "dynamic_within_5pct": res.diagnostics["dynamic_within_5pct"],
            "energy_value": energy.value, "energy_tail_bound": energy.tail_bound,
            "v_limit_energy": eq.energy, "v_limit_nu": eq.nu})
        gy, gz = np.meshgrid(wave.grid.section.y, wave.grid.z, indexing="ij")
        write_csv(os.path.join(out, "wave.csv"), ["y", "z", "u"],
                  zip(gy.ravel(), gz.ravel(), wave.values.ravel()))
        mid = wave.grid.section.nodes // 2
        plots.plot_trace(os.path.join(out, "wave_profile.svg"), wave.grid.z,
                         {"u(mid, z)": wave.values[mid],
                          "max_y u": wave.values.max(axis=0)},
                         xlabel="z", ylabel="u")
        append_jsonl(os.path.join(out, "run.jsonl"),
                     {"event": "speed-diffuse", "eps": eps, "c": res.speed})
        _manifest(out, "speed-diffuse", ctx.obj["config"], ctx.obj["seed"])
    _guard(ctx, run)


@main.command("sweep")
@click.pass_context
def cmd_sweep(ctx):
    """Interface-width sweep against the sharp reference."""
    def run():
        cfg, out = _prepare(ctx)
        section = cfg.section()
        well, forcing = cfg.well(), cfg.forcing(section)
        result = harness.run_eps_sweep(
            cfg.eps_list(), well, forcing, workers=ctx.obj["workers"],
            sharp_params=cfg.sharp_params(),
            diffuse_overrides=cfg.raw.get("diffuse", {}))
        errs = [(r.eps, r.err_abs) for r in result.rows if r.failed is None]
        if len(errs) >= 2:
            plots.plot_loglog(os.path.join(out, "sweep.svg"),
                              [e for e, _ in errs], [v for _, v in errs],
                              xlabel="eps", ylabel="err_abs")
        write_csv(os.path.join(out, "sweep.csv"), harness.CSV_COLUMNS,
                  result.csv_rows())
        for r in result.rows:
            append_jsonl(os.path.join(out, "run.jsonl"),
                         {"event": "sweep-row", "eps": r.eps, "c_eps": r.c_eps,
                          "err_abs": r.err_abs, "failed": r.failed})
        _manifest(out, "sweep", ctx.obj["config"], ctx.obj["seed"], extra={
            "c_sharp": result.c_sharp,
            "monotone_errors": result.monotone_errors,
            "fit_order": result.fit_order,
            "extrapolated_limit": result.extrapolated_limit,
            "wall_clock": {repr(r.eps): r.wall_clock for r in result.rows},
            "extras": result.extras})
    _guard(ctx, run)


@main.command("check-assumptions")
@click.pass_context
def cmd_check_assumptions(ctx):
    """Invasion and uniqueness condition verdicts (a verdict is success)."""
    def run():
        cfg, out = _prepare(ctx)
        section = cfg.section()
        well, forcing = cfg.well(), cfg.forcing(section)
        opts = cfg.conditions_options()
        inv = conditions.check_invasion_condition(
            well, forcing, max_intervals=int(opts["max_intervals"]))
        doc = {"invasion": {"verdict": inv.verdict, "witness": inv.witness,
                            "margins": inv.margins, "notes": list(inv.notes)}}
        try:
            uni = conditions.check_uniqueness_conditions(
                well, forcing, c_omega=float(opts["C_omega"]))
            doc["uniqueness"] = {"verdict": uni.verdict, "witness": uni.witness,
                                 "margins": uni.margins, "notes": list(uni.notes)}
        except StratFrontError as exc:
            doc["uniqueness"] = {"verdict": "precondition-failed",
                                 "message": str(exc)}
        doc["well_constants"] = check_well_constants(
            well, forcing, cfg.eps_list(), c=float(opts["C"]),
            delta0=float(opts["delta0"]))
        write_json(os.path.join(out, "assumptions.json"), doc)
        append_jsonl(os.path.join(out, "run.jsonl"),
                     {"event": "check-assumptions",
                      "invasion": inv.verdict,
                      "uniqueness": doc["uniqueness"]["verdict"]})
        _manifest(out, "check-assumptions", ctx.obj["config"], ctx.obj["seed"])
    _guard(ctx, run)


@main.command("simulate")
@click.pass_context
def cmd_simulate(ctx):
    """Evolve front-like data and log the leading edge and window energy."""
    def run():
        cfg, out = _prepare(ctx)
        opts = cfg.command_options("simulate")
        eps = float(opts.get("eps", cfg.eps_list()[0]))
        well = cfg.well()
        params = cfg.diffuse_params(eps)
        grid = params.build_grid(cfg.section().length)
        forcing = cfg.forcing(grid.section)
        u = diffuse.make_front_field(grid, eps, well,
                                     z0=float(opts.get("z0", 0.0)),
                                     kind=opts.get("kind", "connection"),
                                     width=float(opts.get("width", 2.0)))
        theta = float(opts.get("theta", 0.5))
        run_time = float(opts.get("run_time", 10.0))
        res = diffuse.measure_front_speed(u, params, well, forcing,
                                          theta=theta, max_time=run_time,
                                          record_energy=True)
        trace = res.diagnostics["trace"]
        log_path = os.path.join(out, "run.jsonl")
        for i, t in enumerate(trace["t"]):
            append_jsonl(log_path, {"event": "trace", "t": t,
                                    "r_theta": trace["edges"][theta][i],
                                    "energy": trace["energy"][i]})
        final = res.diagnostics["final_field"]
        gy, gz = np.meshgrid(final.grid.section.y,
                             final.grid.z + final.grid.z_shift, indexing="ij")
        write_csv(os.path.join(out, "final.csv"), ["y", "z", "u"],
                  zip(gy.ravel(), gz.ravel(), final.values.ravel()))
        write_csv(os.path.join(out, "trace.csv"),
                  ["t"] + [f"r_{th}" for th in trace["edges"]],
                  zip(trace["t"], *trace["edges"].values()))
        plots.plot_trace(os.path.join(out, "trace.svg"), trace["t"],
                         {f"r_{th}": v for th, v in trace["edges"].items()})
        write_json(os.path.join(out, "speed.json"), {
            "eps": eps, "speed": res.speed, "stderr": res.residual,
            "slopes": res.diagnostics["slopes"]})
        _manifest(out, "simulate", ctx.obj["config"], ctx.obj["seed"])
    _guard(ctx, run)


@main.command("density-audit")
@click.pass_context
def cmd_density_audit(ctx):
    """Density audits of the computed wave in stretched coordinates."""
    def run():
        cfg, out = _prepare(ctx)
        opts = cfg.command_options("density")
        eps = float(opts.get("eps", cfg.eps_list()[0]))
        well = cfg.well()
        params = cfg.diffuse_params(eps)
        grid = params.build_grid(cfg.section().length)
        forcing = cfg.forcing(grid.section)
        res = diffuse.find_critical_speed(eps, params, well, forcing)
        wave = res.diagnostics["wave"]
        # balls must stay inside the stretched cylinder: beyond the
        # half-width the superlevel count grows like a slab, not a disc
        half_width = int(cfg.section().length / eps // 2)
        big_r = min(int(opts.get("R0", 10)), max(half_width, 3))
        r0 = min(int(opts.get("r0", 2)), big_r - 1)
        centers = harness.interface_centers(wave, eps, clearance=big_r)
        audit = harness.density_audit_mean_square(
            wave, eps, centers, alpha=float(opts.get("alpha", 0.2)),
            r0=r0, big_r=big_r)
        level = harness.density_audit_level_set(
            wave, eps, float(opts.get("beta", 0.5)),
            list(range(2, big_r + 1)), centers=centers)
        unstretched = harness.density_constant_scan(wave, eps)
        write_json(os.path.join(out, "density.json"), {
            "eps": eps, "centers": centers,
            "mean_square": {"verdict": audit.verdict,
                            "fitted_alpha": audit.fitted_alpha,
                            "alpha": audit.alpha},
            "level_set": {"status": level["status"],
                          "min_exponent": level.get("min_exponent")},
            "unstretched_constants": unstretched})
        rows = []
        for label, tab in audit.table.items():
            for (cy, cz), avgs in tab.items():
                for r, a in zip(audit.radii, avgs):
                    rows.append((label, cy, cz, r, a))
        write_csv(os.path.join(out, "density.csv"),
                  ["quantity", "center_y", "center_z", "radius", "average"],
                  rows)
        _manifest(out, "density-audit", ctx.obj["config"], ctx.obj["seed"])
    _guard(ctx, run)


@main.command("plot")
@click.argument("input_csv", type=click.Path(exists=False))
@click.option("--kind", type=str, required=True,
              help="profile, trace, m_of_c, or loglog")
@click.pass_context
def cmd_plot(ctx, input_csv, kind):
    """Re-plot a CSV produced by this tool."""
    def run():
        out = ctx.obj["out"]
        os.makedirs(out, exist_ok=True)
        if not os.path.exists(input_csv):
            raise ConfigError(f"input CSV {input_csv} does not exist")
        stem = os.path.splitext(os.path.basename(input_csv))[0]
        plots.plot_from_csv(input_csv, kind,
                            os.path.join(out, f"{stem}_{kind}.svg"))
    _guard(ctx, run)


if __name__ == "__main__":
    main()
