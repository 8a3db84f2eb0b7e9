"""Powder-pattern widths, polarization density and sweep-window optimization."""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from nvsim.ensemble import map_field_blocks, stick_spectra, stick_spectrum
from nvsim.spin import D_DEFAULT, GAMMA_DEFAULT, OT, SQ

DEFAULT_BIN = 1.0  # MHz

POPULATION = "population"
KAPPA = "kappa"


class ZeroWeightWarning(RuntimeWarning):
    """A width was requested for a class with no observable intensity."""


def _second_moment_width(freq, weight):
    total = math.fsum(weight)
    if total <= 0:
        return 0.0, 0.0, False
    mean = math.fsum(weight * freq) / total
    var = math.fsum(weight * (freq - mean) ** 2) / total
    return math.sqrt(max(var, 0.0)), mean, True


def pattern_moments(sticks, cls):
    """(sigma, mean) of the |amp|-weighted frequency distribution of one class."""
    s = sticks.select(cls)
    sigma, mean, ok = _second_moment_width(s.freq, np.abs(s.amp))
    if not ok:
        warnings.warn(f"no {cls} intensity; width reported as 0", ZeroWeightWarning, stacklevel=3)
    return sigma, mean


def characteristic_width(B, orientations, cls, D=D_DEFAULT, gamma_e=GAMMA_DEFAULT):
    """Square root of the intensity-weighted second moment (MHz) of one class."""
    return pattern_moments(stick_spectrum(B, orientations, D, gamma_e), cls)[0]


def mean_frequency(B, orientations, cls, D=D_DEFAULT, gamma_e=GAMMA_DEFAULT):
    return pattern_moments(stick_spectrum(B, orientations, D, gamma_e), cls)[1]


@dataclass(frozen=True)
class WidthCurve:
    fields: np.ndarray
    sigma_sq: np.ndarray
    sigma_ot: np.ndarray


def width_curve(fields, orientations, D=D_DEFAULT, gamma_e=GAMMA_DEFAULT, workers=1):
    fields = np.asarray(fields, dtype=float)

    def widths(block):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroWeightWarning)
            return [
                (pattern_moments(s, SQ)[0], pattern_moments(s, OT)[0])
                for s in stick_spectra(block, orientations, D, gamma_e)
            ]

    pairs = map_field_blocks(widths, fields, workers)
    sq = np.array([p[0] for p in pairs])
    ot = np.array([p[1] for p in pairs])
    return WidthCurve(fields, sq, ot)


@dataclass(frozen=True)
class DensityCurve:
    """Polarization per MHz on bins starting at ``freqs`` (left edges)."""

    freqs: np.ndarray
    density: np.ndarray
    bin: float
    cls: str

    @property
    def total(self):
        return float(np.sum(self.density) * self.bin)


def _stick_weight(sticks, weighting):
    if weighting == POPULATION:
        return sticks.weight * np.abs(sticks.delta_rho)
    if weighting == KAPPA:
        return sticks.weight * np.abs(sticks.kappa)
    raise ValueError(f"unknown weighting {weighting!r}")


def bin_density(sticks, cls="all", bin=DEFAULT_BIN, span=None, weighting=POPULATION):
    """Histogram the selected sticks into ``bin``-wide bins, divided by the bin width.

    ``span`` is ``(f_min, f_max)``; by default it covers every stick so the
    integral equals the ensemble sum of weights.
    """
    if not (bin > 0):
        raise ValueError("bin must be positive")
    s = sticks.select(cls)
    w = _stick_weight(s, weighting)
    if span is None:
        f_min = 0.0
        f_max = float(s.freq.max()) if len(s) else 0.0
    else:
        f_min, f_max = span
    nbins = int(math.floor((f_max - f_min) / bin)) + 1
    idx = np.floor((s.freq - f_min) / bin).astype(np.int64)
    ok = (idx >= 0) & (idx < nbins)
    hist = np.bincount(idx[ok], weights=w[ok], minlength=nbins)
    freqs = f_min + bin * np.arange(nbins)
    label = "all" if cls is None else str(cls).upper()
    return DensityCurve(freqs, hist / bin, float(bin), label)


def polarization_density(
    B,
    orientations,
    cls="all",
    span=None,
    bin=DEFAULT_BIN,
    weighting=POPULATION,
    D=D_DEFAULT,
    gamma_e=GAMMA_DEFAULT,
):
    """Available polarization |delta_rho| per MHz at field B.

    ``weighting="kappa"`` weights by |kappa| instead, for comparison.
    """
    if not (bin > 0):
        raise ValueError("bin must be positive")
    sticks = stick_spectrum(B, orientations, D, gamma_e)
    return bin_density(sticks, cls, bin, span, weighting)


def _window_maxima(density, bin, widths):
    mass = density * bin
    prefix = np.concatenate(([0.0], np.cumsum(mass)))
    n = mass.size
    out = np.empty(len(widths))
    for j, width in enumerate(widths):
        if not (width > 0):
            raise ValueError("sweep width must be positive")
        k = max(1, int(round(width / bin)))
        if k >= n:
            out[j] = prefix[-1]
        else:
            out[j] = np.max(prefix[k:] - prefix[:-k])
    return out


def integrated_polarization(d, width):
    """Largest polarization collectable by one sweep window of ``width`` MHz.

    The window is quantized to whole bins.
    """
    return float(_window_maxima(d.density, d.bin, [width])[0])


@dataclass(frozen=True)
class SweepCurve:
    widths: np.ndarray
    p_max: np.ndarray
    cls: str
    field: float


def sweep_curve(
    B,
    orientations,
    widths,
    bin=DEFAULT_BIN,
    weighting=POPULATION,
    D=D_DEFAULT,
    gamma_e=GAMMA_DEFAULT,
):
    """Maximum integrated polarization against sweep width, for SQ and OT."""
    widths = np.atleast_1d(np.asarray(widths, dtype=float))
    sticks = stick_spectrum(B, orientations, D, gamma_e)
    curves = []
    for cls in (SQ, OT):
        d = bin_density(sticks, cls, bin, None, weighting)
        curves.append(SweepCurve(widths, _window_maxima(d.density, d.bin, widths), cls, float(B)))
    return tuple(curves)


def density_map(fields, orientations, span, bin, cls="all", weighting=POPULATION,
                D=D_DEFAULT, gamma_e=GAMMA_DEFAULT, workers=1):
    """Polarization density on a fixed frequency span, one row per field."""

    def rows(block):
        return [
            bin_density(s, cls, bin, span, weighting).density
            for s in stick_spectra(block, orientations, D, gamma_e)
        ]

    return np.vstack(map_field_blocks(rows, fields, workers))
