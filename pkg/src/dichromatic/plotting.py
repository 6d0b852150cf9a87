"""SVG figures for the CLI report path (written next to the CSV output)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps reruns byte-identical
_SVG_META = {"Date": None, "Creator": None}
matplotlib.rcParams["svg.hashsalt"] = "dichromatic"


def _render(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def spectrum_figure(omega, curves: dict, sql, title: str = "") -> bytes:
    """Force-referred spectra on a log axis, with the SQL as a dashed reference."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    omega = np.asarray(omega, dtype=float)
    for name, values in curves.items():
        ax.plot(omega, values, label=name, lw=1.3)
    ax.plot(omega, sql, "k--", lw=1, label="SQL")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\Omega$ (rad/s)")
    ax.set_ylabel(r"$S_f$ (rad/s)")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _render(fig)


def optimize_figure(omega, k_opt: dict, s_min: dict, sql) -> bytes:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for name in k_opt:
        ax1.plot(omega, k_opt[name], label=name)
        ax2.plot(omega, s_min[name], label=name)
    ax2.plot(omega, sql, "k--", lw=1, label="SQL")
    for ax in (ax1, ax2):
        ax.set_yscale("log")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    ax1.set_ylabel(r"optimal $\mathcal{K}$ (rad/s)")
    ax2.set_ylabel(r"min $S_f$ (rad/s)")
    ax2.set_xlabel(r"$\Omega$ (rad/s)")
    return _render(fig)


def montecarlo_figure(omega, estimates: dict, analytic: dict, band=None) -> bytes:
    """Welch estimates (markers) against analytic spectra (lines)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in estimates:
        (line,) = ax.plot(omega[1:], analytic[name][1:], lw=1.3, label=f"{name} analytic")
        ax.plot(omega[1:], estimates[name][1:], ".", ms=2, color=line.get_color(), alpha=0.5,
                label=f"{name} Welch")
    if band is not None:
        ax.axvspan(*band, color="0.9", zorder=0)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\Omega$ (rad/s)")
    ax.set_ylabel(r"$S_f$ (rad/s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    return _render(fig)
