"""Orientation ensembles, stick spectra, Gaussian broadening and 2D field maps."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from nvsim.spin import D_DEFAULT, GAMMA_DEFAULT, OT, SQ, transition_table

DEFAULT_FWHM = 20.0  # MHz
DEFAULT_POWDER_N = 512
DEFAULT_FIELDS = (0.0, 3500.0, 10.0)  # G: start, stop, step
DEFAULT_FREQS = (0.0, 7000.0, 5.0)  # MHz: start, stop, step

# beyond this many FWHM a Gaussian contributes < 1e-30 of its peak
_KERNEL_HALF_WIDTH = 5.0


@dataclass(frozen=True)
class OrientationSet:
    """Angles between field and NV axis with normalized weights.

    Angles are folded into [0, pi/2] and samples are stored in a canonical
    sorted order, so every downstream sum is independent of input order.
    """

    thetas: np.ndarray
    weights: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.thetas, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if th.shape != w.shape or th.ndim != 1 or th.size == 0:
            raise ValueError("thetas and weights must be equal-length, nonempty 1D")
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(w))):
            raise ValueError("orientation samples must be finite")
        if np.any(w <= 0):
            raise ValueError("orientation weights must be positive")
        th = np.mod(th, 2 * np.pi)
        th = np.where(th > np.pi, 2 * np.pi - th, th)
        th = np.where(th > np.pi / 2, np.pi - th, th)
        order = np.lexsort((w, th))
        th, w = th[order], w[order]
        w = w / math.fsum(w)
        th.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.thetas.size

    def __iter__(self):
        return iter(zip(self.thetas.tolist(), self.weights.tolist()))


def powder_orientations(n=DEFAULT_POWDER_N):
    """Isotropic powder by n-point Gauss-Legendre quadrature in cos(theta) on (0, 1)."""
    if int(n) != n or n < 2:
        raise ValueError("powder quadrature needs n >= 2")
    x, w = np.polynomial.legendre.leggauss(int(n))
    u = 0.5 * (x + 1.0)
    return OrientationSet(np.arccos(u), 0.5 * w, label=f"powder:{int(n)}")


_TETRA = math.acos(1.0 / 3.0)  # 70.53 deg, the fold of 109.47 deg
_MAGIC = math.acos(1.0 / math.sqrt(3.0))  # 54.74 deg


def crystal_orientations(alignment):
    """NV families of a single crystal.

    ``alignment`` is ``"axis-111"``, ``"axis-100"`` or a sequence of
    ``(theta, weight)`` pairs in radians.
    """
    if isinstance(alignment, str):
        if alignment == "axis-111":
            return OrientationSet([0.0, _TETRA], [0.25, 0.75], label="axis-111")
        if alignment == "axis-100":
            return OrientationSet([_MAGIC], [1.0], label="axis-100")
        raise ValueError(f"unknown crystal alignment {alignment!r}")
    pairs = [tuple(s) for s in alignment]
    if not pairs:
        raise ValueError("custom orientation list is empty")
    th, w = zip(*pairs)
    return OrientationSet(th, w, label="custom")


@dataclass(frozen=True)
class Stick:
    freq: float
    amp: float
    cls: str
    theta: float


@dataclass(frozen=True)
class Sticks:
    """Columnar stick spectrum: three transitions per orientation sample.

    ``amp`` is ``-kappa * weight``, so the pumped single-quantum dips show up
    as positive contrast.
    """

    freq: np.ndarray
    amp: np.ndarray
    is_ot: np.ndarray
    theta: np.ndarray
    weight: np.ndarray
    kappa: np.ndarray
    delta_rho: np.ndarray

    def __len__(self):
        return self.freq.size

    def __iter__(self):
        for k in range(self.freq.size):
            yield Stick(
                float(self.freq[k]),
                float(self.amp[k]),
                OT if self.is_ot[k] else SQ,
                float(self.theta[k]),
            )

    def select(self, cls=None):
        """Sticks of one class ("SQ", "OT"); None or "all" keeps everything."""
        mask = class_mask(self.is_ot, cls)
        return Sticks(*(getattr(self, f)[mask] for f in _STICK_FIELDS))


_STICK_FIELDS = ("freq", "amp", "is_ot", "theta", "weight", "kappa", "delta_rho")


def as_sticks(items):
    """Accept a Sticks table or any iterable of Stick records."""
    if isinstance(items, Sticks):
        return items
    items = list(items)
    amp = np.array([s.amp for s in items], dtype=float)
    return Sticks(
        freq=np.array([s.freq for s in items], dtype=float),
        amp=amp,
        is_ot=np.array([s.cls == OT for s in items], dtype=bool),
        theta=np.array([s.theta for s in items], dtype=float),
        weight=np.ones(len(items)),
        kappa=-amp,
        delta_rho=np.full(len(items), np.nan),
    )


def class_mask(is_ot, cls):
    if cls is None:
        return np.ones_like(is_ot, dtype=bool)
    cls = str(cls).upper()
    if cls == "ALL":
        return np.ones_like(is_ot, dtype=bool)
    if cls == OT:
        return is_ot.copy()
    if cls == SQ:
        return ~is_ot
    raise ValueError(f"unknown transition class {cls!r}")


def _sticks_from_table(t, thetas, weights):
    shape = t.freq.shape
    th = np.broadcast_to(thetas[:, None], shape)
    w = np.broadcast_to(weights[:, None], shape)
    return Sticks(
        freq=t.freq.reshape(-1),
        amp=(-t.kappa * w).reshape(-1),
        is_ot=t.is_ot.reshape(-1),
        theta=th.reshape(-1).copy(),
        weight=w.reshape(-1).copy(),
        kappa=t.kappa.reshape(-1),
        delta_rho=t.delta_rho.reshape(-1),
    )


def stick_spectrum(B, orientations, D=D_DEFAULT, gamma_e=GAMMA_DEFAULT):
    """All transitions of an orientation ensemble at field B (Gauss)."""
    if not (math.isfinite(B) and B >= 0):
        raise ValueError("field B must be finite and nonnegative")
    t = transition_table(D, gamma_e, B, orientations.thetas)
    return _sticks_from_table(t, orientations.thetas, orientations.weights)


def stick_spectra(fields, orientations, D=D_DEFAULT, gamma_e=GAMMA_DEFAULT):
    """Stick spectra for several fields, evaluated as one batch."""
    fields = np.asarray(fields, dtype=float)
    if np.any(~np.isfinite(fields)) or np.any(fields < 0):
        raise ValueError("fields must be finite and nonnegative")
    th = orientations.thetas
    t = transition_table(D, gamma_e, fields[:, None], th[None, :])
    out = []
    for b in range(fields.size):
        row = type(t)(*(getattr(t, f)[b] for f in t.__dataclass_fields__))
        out.append(_sticks_from_table(row, th, orientations.weights))
    return out


def frequency_grid(f_min, f_max, step):
    if not (step > 0):
        raise ValueError("grid step must be positive")
    if not (f_max > f_min):
        raise ValueError("grid needs f_max > f_min")
    n = int(math.floor((f_max - f_min) / step + 1e-9)) + 1
    return f_min + step * np.arange(n)


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    amps: np.ndarray


def gaussian_peak(fwhm):
    """Peak height of a unit-area Gaussian of the given FWHM."""
    return 2.0 * math.sqrt(math.log(2.0) / math.pi) / fwhm


def _broaden(freq, amp, grid, fwhm):
    f0, n = grid[0], grid.size
    step = grid[1] - grid[0] if n > 1 else 1.0
    out = np.zeros(n)
    reach = _KERNEL_HALF_WIDTH * fwhm
    keep = (freq >= f0 - reach) & (freq <= grid[-1] + reach) & (amp != 0)
    if not keep.any():
        return out
    freq, amp = freq[keep], amp[keep]
    half = int(math.ceil(reach / step))
    offs = np.arange(-half, half + 1)
    centre = np.rint((freq - f0) / step).astype(np.int64)
    idx = centre[:, None] + offs[None, :]
    x = f0 + step * idx - freq[:, None]
    sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    vals = amp[:, None] * np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    ok = (idx >= 0) & (idx < n)
    return np.bincount(idx[ok], weights=vals[ok], minlength=n)


def convolve_lineshape(sticks, grid=DEFAULT_FREQS, fwhm=DEFAULT_FWHM, class_filter=None):
    """Broaden sticks with unit-area Gaussians on a uniform frequency grid.

    ``grid`` is ``(f_min, f_max, step)`` in MHz.
    """
    if not (fwhm > 0):
        raise ValueError("fwhm must be positive")
    freqs = frequency_grid(*grid)
    sticks = as_sticks(sticks)
    if len(sticks) == 0:
        return Spectrum(freqs, np.zeros_like(freqs))
    s = sticks.select(class_filter)
    return Spectrum(freqs, _broaden(s.freq, s.amp, freqs, fwhm))


@dataclass(frozen=True)
class FieldMap:
    fields: np.ndarray
    freqs: np.ndarray
    amps: np.ndarray  # shape (len(fields), len(freqs))


def field_grid(start, stop, step):
    return frequency_grid(start, stop, step)


FIELD_BLOCK = 16


def map_field_blocks(fn, fields, workers=1):
    """Apply ``fn`` to fixed-size blocks of ``fields``; results kept in field order.

    ``fn`` maps a block of fields to a list with one entry per field. Block
    size does not depend on ``workers``, so the numbers do not either.
    """
    fields = np.asarray(fields, dtype=float)
    blocks = [fields[i : i + FIELD_BLOCK] for i in range(0, fields.size, FIELD_BLOCK)]
    if workers and workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, blocks))
    else:
        parts = [fn(b) for b in blocks]
    return [r for part in parts for r in part]


def field_map(
    fields,
    freq_grid=DEFAULT_FREQS,
    fwhm=DEFAULT_FWHM,
    orientations=None,
    class_filter=None,
    D=D_DEFAULT,
    gamma_e=GAMMA_DEFAULT,
    workers=1,
):
    """2D spectrum: one broadened row per field, rows in field order."""
    if orientations is None:
        orientations = powder_orientations()
    if not (fwhm > 0):
        raise ValueError("fwhm must be positive")
    fields = np.asarray(fields, dtype=float)
    freqs = frequency_grid(*freq_grid)

    def rows(block):
        out = []
        for sticks in stick_spectra(block, orientations, D, gamma_e):
            s = sticks.select(class_filter)
            out.append(_broaden(s.freq, s.amp, freqs, fwhm))
        return out

    rows = map_field_blocks(rows, fields, workers)
    amps = np.vstack(rows) if rows else np.zeros((0, freqs.size))
    return FieldMap(fields, freqs, amps)
