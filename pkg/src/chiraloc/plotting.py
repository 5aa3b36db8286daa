"""Optional matplotlib renderings of the emitted datasets (``--plot``)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 6.8

params = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "image.cmap": "viridis",
}


def _figure(ncols=1, height=None):
    matplotlib.rcParams.update(params)
    height = height or fig_width * golden_mean
    fig, axes = plt.subplots(1, ncols, figsize=(fig_width, height), squeeze=False)
    return fig, axes[0]


def population_heatmaps(times, panels, n_sites):
    """``panels`` is a list of (label, (T, N) population grid)."""
    fig, axes = _figure(len(panels), height=2.6)
    for ax, (label, grid) in zip(axes, panels):
        im = ax.imshow(grid.T, origin="lower", aspect="auto",
                       extent=(times[0], times[-1], 0.5, n_sites + 0.5), vmin=0.0)
        ax.set_title(label)
        ax.set_xlabel(r"$\gamma t$")
        fig.colorbar(im, ax=ax, fraction=0.05)
    axes[0].set_ylabel("site $n$")
    fig.tight_layout()
    return fig


def profile_cut(cuts, reference, t_cut):
    fig, (ax,) = _figure()
    sites = np.arange(1, len(reference) + 1)
    ax.semilogy(sites, np.maximum(reference, 1e-300), ":", color="gray", label=r"$\bar w=0$")
    for label, cut in cuts:
        ax.semilogy(sites, np.maximum(cut, 1e-300), label=label)
    ax.set_xlabel("site $n$")
    ax.set_ylabel(rf"$\langle P_n\rangle$ at $\gamma t={t_cut:g}$")
    ax.legend()
    fig.tight_layout()
    return fig


def phase_diagram(scan):
    fig, (ax,) = _figure()
    colors = {"Localized": "tab:red", "Delocalized": "tab:blue", "Excluded": "lightgray"}
    for label, color in colors.items():
        pts = [(c.directionality, c.w_bar) for c in scan.cells if c.label.value == label]
        if pts:
            d, w = zip(*pts)
            ax.scatter(d, w, c=color, s=18, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("$D$")
    ax.set_ylabel(r"$\bar w$")
    ax.set_title(rf"$\xi/\pi = {scan.xi / math.pi:.3g}$")
    ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def reentrance(curve):
    fig, (ax,) = _figure()
    ax.plot(curve.xi / math.pi, curve.ratios, "o-",
            label=rf"$D={curve.directionality:g}$, $\bar w={curve.w_bar:g}$")
    ax.axhline(curve.threshold, ls=":", color="gray")
    ax.set_xlabel(r"$\xi/\pi$")
    ax.set_ylabel(r"$\beta_{\bar w}/\beta_0$")
    ax.legend()
    fig.tight_layout()
    return fig


def zeta_curves(points):
    fig, (ax,) = _figure()
    for xi in sorted({p.xi for p in points}):
        sel = [p for p in points if p.xi == xi and p.fit.ok]
        ax.plot([p.directionality for p in sel], [p.fit.zeta_L for p in sel], "o-",
                label=rf"$\xi/\pi={xi / math.pi:.3g}$")
    ax.set_xlabel("$D$")
    ax.set_ylabel(r"$\zeta_L$")
    ax.legend()
    fig.tight_layout()
    return fig


def gap_ratios(w_values, r_bar, v_i):
    fig, (ax,) = _figure()
    ax.plot(w_values, r_bar, "o-", label=r"$\bar r$")
    ax2 = ax.twinx()
    ax2.plot(w_values, v_i, "x:", color="tab:orange", label=r"$\langle v_I\rangle$")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\bar w$")
    ax.set_ylabel(r"$\bar r$")
    ax2.set_ylabel(r"$\langle v_I\rangle$")
    fig.tight_layout()
    return fig


def close(fig):
    plt.close(fig)
