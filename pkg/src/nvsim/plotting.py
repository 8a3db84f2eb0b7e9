"""Figure rendering for CLI reports.

Figures are drawn on standalone ``Figure`` objects with the Agg canvas so no
GUI backend or global pyplot state is touched.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
}


def _figure(width=5.0, height=3.4):
    fig = Figure(figsize=(width, height), dpi=150)
    FigureCanvasAgg(fig)
    return fig


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, metadata={"Software": None})


def _styled(draw):
    import matplotlib as mpl

    def wrapper(*args, **kwargs):
        with mpl.rc_context(RC):
            return draw(*args, **kwargs)

    wrapper.__name__ = draw.__name__
    wrapper.__doc__ = draw.__doc__
    return wrapper


@_styled
def plot_spectrum(spectrum, path, title=None):
    fig = _figure()
    ax = fig.add_subplot(111)
    ax.plot(spectrum.freqs / 1e3, spectrum.amps, lw=0.8, color="k")
    ax.axhline(0.0, lw=0.4, color="0.6")
    ax.set_xlabel("Frequency (GHz)")
    ax.set_ylabel("ODMR contrast (arb.)")
    if title:
        ax.set_title(title)
    _save(fig, path)


@_styled
def plot_field_map(fields, freqs, amps, path, label="ODMR contrast (arb.)", title=None):
    """2D map with field on the vertical axis and frequency horizontal."""
    fig = _figure(5.0, 4.2)
    ax = fig.add_subplot(111)
    lim = np.max(np.abs(amps)) if amps.size else 1.0
    lim = lim if lim > 0 else 1.0
    mesh = ax.imshow(
        amps,
        origin="lower",
        aspect="auto",
        extent=(freqs[0] / 1e3, freqs[-1] / 1e3, fields[0], fields[-1]),
        cmap="RdBu_r",
        vmin=-lim,
        vmax=lim,
        interpolation="nearest",
    )
    ax.set_xlabel("Frequency (GHz)")
    ax.set_ylabel("Field (G)")
    fig.colorbar(mesh, ax=ax, label=label)
    if title:
        ax.set_title(title)
    _save(fig, path)


@_styled
def plot_widths(curve, path):
    fig = _figure()
    ax = fig.add_subplot(111)
    ax.loglog(curve.fields, np.maximum(curve.sigma_sq, 1e-3), "k-", label="SQ")
    ax.loglog(curve.fields, np.maximum(curve.sigma_ot, 1e-3), "r-", label="OT")
    ax.set_xlabel("Field (G)")
    ax.set_ylabel(r"$\sigma$ (MHz)")
    ax.legend(frameon=False)
    _save(fig, path)


@_styled
def plot_density(density, path, title=None):
    fig = _figure()
    ax = fig.add_subplot(111)
    ax.step(density.freqs / 1e3, density.density, where="post", lw=0.7, color="k")
    ax.set_xlabel("Frequency (GHz)")
    ax.set_ylabel(r"Polarization density (MHz$^{-1}$)")
    if title:
        ax.set_title(title)
    _save(fig, path)


@_styled
def plot_sweep(sq, ot, path):
    fig = _figure()
    ax = fig.add_subplot(111)
    ax.plot(sq.widths / 1e3, sq.p_max, "k-", label="SQ")
    ax.plot(ot.widths / 1e3, ot.p_max, "r-", label="OT")
    ax.set_xlabel("Sweep width (GHz)")
    ax.set_ylabel("Max. integrated polarization")
    ax.set_title(f"B = {sq.field:g} G")
    ax.legend(frameon=False)
    _save(fig, path)
