"""Paper-style figure rendering from zenogas CSVs.

Every overlay quantity shown in a legend (fit exponents, fitted curves) is
recomputed from the CSV columns at render time.  Rendering never modifies
its inputs and reruns are idempotent.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, expect_kind, load_table

KAPPA_SERIES = (
    ("kappa_re_sb_rad_s", "single-band RE", "tab:green", "--"),
    ("kappa_re_mb_rad_s", "multiband RE", "tab:blue", "-."),
    ("kappa_mf_rad_s", "mean field", "tab:red", "-"),
)


def fit_exponent(x: np.ndarray, y: np.ndarray) -> float:
    good = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    p, _ = np.polyfit(np.log(x[good]), np.log(y[good]), 1)
    return float(p)


def _new_axes(spec):
    fig, ax = plt.subplots(figsize=spec.get("size", (5.0, 3.6)))
    ax.set_xscale(spec.get("xscale", "linear"))
    ax.set_yscale(spec.get("yscale", "linear"))
    return fig, ax


def render_kappa_vs_gamma0(spec) -> "plt.Figure":
    table = expect_kind(load_table(spec["inputs"][0]["path"]), "rates_scan")
    g0 = table.column("gamma0_rad_s")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.set_xscale("log")
    ax.set_yscale("log")
    for col, label, color, ls in KAPPA_SERIES:
        y = table.column(col)
        if np.all(np.isnan(y)):
            continue
        ax.plot(g0, y, ls, color=color, marker="o", ms=4, label=label)
    ax.set_xlabel(r"$\Gamma_0$ (s$^{-1}$)")
    ax.set_ylabel(r"$\kappa$ (s$^{-1}$)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_kappa_vs_j(spec) -> "plt.Figure":
    table = expect_kind(load_table(spec["inputs"][0]["path"]), "rates_scan")
    j = np.abs(table.column("j_rad_s"))
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.set_xscale("log")
    ax.set_yscale("log")
    shown = None
    for col, label, color, ls in KAPPA_SERIES:
        y = table.column(col)
        if np.all(np.isnan(y)):
            continue
        ax.plot(j, y, ls, color=color, marker="o", ms=4, label=label)
        if shown is None:
            shown = y
    if spec.get("quadratic_fit", True) and shown is not None:
        expo = fit_exponent(j, shown)
        xs = np.linspace(j.min(), j.max(), 64)
        ref = shown[np.argmax(j)] * (xs / j.max()) ** 2
        ax.plot(xs, ref, ":", color="gray",
                label=f"$J^2$ guide (fit exponent {expo:.2f})")
    ax.set_xlabel(r"$J/\hbar$ (s$^{-1}$)")
    ax.set_ylabel(r"$\kappa$ (s$^{-1}$)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_loss_curves(spec) -> "plt.Figure":
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for item in spec["inputs"]:
        table = expect_kind(load_table(item["path"]), "loss_curve")
        t = table.column("t_s")
        n = table.column("n_down")
        label = item.get("label") or table.text_column("source")[0]
        line, = ax.plot(t, n, label=label)
        err = table.column("n_down_err")
        if np.isfinite(err).any():
            ax.fill_between(t, n - err, n + err, alpha=0.3,
                            color=line.get_color(), linewidth=0)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(r"$N_\downarrow$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_band_families(spec) -> "plt.Figure":
    table = expect_kind(load_table(spec["inputs"][0]["path"]), "band_family")
    vp = table.column("v_perp_er")
    ny = table.column("n_bands_y").astype(int)
    nt = table.column("n_bands_perp").astype(int)
    rate = table.column("gamma_eff_mb_rad_s")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for n in sorted(set(ny[nt == 1])):
        sel = (ny == n) & (nt == 1)
        order = np.argsort(vp[sel])
        ax.plot(vp[sel][order], rate[sel][order], "-o", color="tab:red",
                alpha=0.3 + 0.7 * n / ny.max(), ms=3,
                label=f"{n} axial band(s), 1 transverse")
    for n in sorted(set(nt[nt >= 2])):
        sel = nt == n
        order = np.argsort(vp[sel])
        ax.plot(vp[sel][order], rate[sel][order], "--s", color="tab:blue",
                alpha=0.3 + 0.7 * n / max(nt.max(), 1), ms=3,
                label=f"{ny.max()} axial, ${n}^2$ transverse")
    ax.set_xlabel(r"$V_\perp$ ($E_R$)")
    ax.set_ylabel(r"$\tilde\Gamma_{\rm eff}$ (s$^{-1}$)")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return fig


def render_single_well(spec) -> "plt.Figure":
    table = expect_kind(load_table(spec["inputs"][0]["path"]), "single_well")
    a = table.column("a_s_over_aho")
    nb = table.column("n_bands").astype(int)
    rate = table.column("rate_over_omega")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for n in sorted(set(nb)):
        sel = nb == n
        order = np.argsort(a[sel])
        style = "-o" if n == 1 else "--s"
        label = "single band" if n == 1 else f"${n}^3$ bands"
        ax.plot(a[sel][order], rate[sel][order], style, ms=4, label=label)
    ax.set_xlabel(r"$|a_s|/a_{\rm ho}$")
    ax.set_ylabel(r"on-site rate ($\omega$ units)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


RENDERERS = {
    "kappa_vs_gamma0": render_kappa_vs_gamma0,
    "kappa_vs_j": render_kappa_vs_j,
    "loss_curves": render_loss_curves,
    "band_families": render_band_families,
    "single_well": render_single_well,
}


def render(spec: dict) -> Path:
    """Render one figure spec to its output path and return the path."""
    kind = spec.get("kind")
    if kind not in RENDERERS:
        raise SchemaError(f"unknown figure kind {kind!r}")
    if not spec.get("inputs"):
        raise SchemaError("figure spec needs at least one input CSV")
    out = Path(spec.get("output", f"{kind}.png"))
    fig = RENDERERS[kind](spec)
    fig.savefig(out, dpi=spec.get("dpi", 150))
    plt.close(fig)
    return out
