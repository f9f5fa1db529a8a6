"""SVG plot emitters with byte-reproducible output and sidecar CSVs.

Matplotlib is configured for deterministic SVGs (fixed hash salt, no
embedded date, text kept as text); every figure gets a CSV next to it with
exactly the plotted numbers.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "stratfront"
matplotlib.rcParams["svg.fonttype"] = "none"
import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError
from .io import atomic_write_text, write_csv


def _save(fig, path: str):
    import io as _io
    buf = _io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write_text(path, buf.getvalue())


def _sidecar(path: str, header, rows):
    write_csv(os.path.splitext(path)[0] + ".csv", header, rows)


def plot_profile(path: str, y, values, label: str = "profile",
                 masked=None) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    v = np.array(values, dtype=float)
    ax.plot(y, v, "-", lw=1.5)
    if masked is not None and np.any(masked):
        ax.plot(np.asarray(y)[masked], np.zeros(int(np.sum(masked))), "rx",
                label="empty columns")
        ax.legend()
    ax.set_xlabel("y")
    ax.set_ylabel(label)
    fig.tight_layout()
    _save(fig, path)
    _sidecar(path, ["y", label], zip(y, v))


def plot_trace(path: str, t, series: dict, xlabel="t", ylabel="position") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for name, vals in series.items():
        ax.plot(t, vals, lw=1.2, label=str(name))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    header = [xlabel] + [str(k) for k in series]
    rows = zip(t, *series.values())
    _sidecar(path, header, rows)


def plot_m_of_c(path: str, c_values, m_values) -> None:
    order = np.argsort(c_values)
    c = np.asarray(c_values)[order]
    m = np.asarray(m_values)[order]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.axhline(0.0, color="k", lw=0.6)
    ax.plot(c, m, "o-", ms=3)
    ax.set_xlabel("c")
    ax.set_ylabel("m(c)")
    fig.tight_layout()
    _save(fig, path)
    _sidecar(path, ["c", "m"], zip(c, m))


def plot_loglog(path: str, x, y, xlabel="eps", ylabel="error") -> None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        raise ConfigError("log-log plot needs at least two positive points")
    slope, intercept = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.loglog(x[ok], y[ok], "o-", ms=4)
    ax.loglog(x[ok], np.exp(intercept) * x[ok] ** slope, "--", lw=1,
              label=f"fitted slope {slope:.2f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    _sidecar(path, [xlabel, ylabel, "fitted_slope"],
             [(a, b, slope) for a, b in zip(x[ok], y[ok])])


def plot_from_csv(in_path: str, kind: str, out_path: str) -> None:
    """Re-plot a CSV produced by this tool."""
    with open(in_path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if kind == "profile":
        plot_profile(out_path, data[:, 0], data[:, 1], label=header[1])
    elif kind == "trace":
        series = {header[i]: data[:, i] for i in range(1, data.shape[1])}
        plot_trace(out_path, data[:, 0], series, xlabel=header[0])
    elif kind == "m_of_c":
        plot_m_of_c(out_path, data[:, 0], data[:, 1])
    elif kind == "loglog":
        # sweep tables carry several columns; plot the error against eps
        xi, yi = 0, 1
        if "eps" in header and "err_abs" in header:
            xi, yi = header.index("eps"), header.index("err_abs")
        plot_loglog(out_path, data[:, xi], data[:, yi],
                    xlabel=header[xi], ylabel=header[yi])
    else:
        raise ConfigError(f"unknown plot kind {kind!r} "
                          "(profile, trace, m_of_c, loglog)")
