"""Command-line front end.

    nvsim spectrum   --field 985 --class ot
    nvsim map2d      --fields 0:10:3500 --freqs 0:5:7000
    nvsim widths     --fields log:100:50000:40
    nvsim poldensity --field 2000
    nvsim sweep      --field 2000 --widths 10:10:5000

Every command writes ``<output>.csv``; ``map2d`` and ``poldensity`` also write
a binary PGM heatmap, and all commands render a PNG figure unless
``--no-plot`` is given. Options may also come from a ``--config`` file of
``key = value`` lines; command-line flags take precedence.
"""

import argparse
import csv
from dataclasses import dataclass
from dataclasses import field as dc_field
import math
import os
from pathlib import Path
import sys

import numpy as np

from nvsim import analysis, ensemble
from nvsim.spin import D_DEFAULT, GAMMA_DEFAULT, ConvergenceError, ModelParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_OUTPUT = 3
EXIT_NUMERIC = 4

COMMANDS = ("spectrum", "map2d", "widths", "poldensity", "sweep")

# per-command defaults for options whose meaning differs between commands
_FIELD_DEFAULT = {"spectrum": 985.0, "poldensity": 2000.0, "sweep": 2000.0}
_FIELDS_DEFAULT = {
    "map2d": "0:10:3500",
    "widths": "log:100:50000:40",
    "poldensity": "0:10:3500",
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    D: float = D_DEFAULT
    gamma: float = GAMMA_DEFAULT
    field: float = 0.0
    fields: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    freqs: tuple = ensemble.DEFAULT_FREQS
    fwhm: float = ensemble.DEFAULT_FWHM
    orientations: str = "powder:512"
    cls: str = "all"
    widths: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    bin: float = analysis.DEFAULT_BIN
    weighting: str = analysis.POPULATION
    output: str = ""
    plot: bool = True


def parse_grid(text):
    """``start:step:stop`` (inclusive) or ``log:start:stop:n``."""
    parts = text.split(":")
    try:
        if parts[0] == "log":
            if len(parts) != 4:
                raise ValueError
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
            if not (0 < lo < hi) or n < 2:
                raise ValueError
            return np.geomspace(lo, hi, n)
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        start, step, stop = (float(p) for p in parts)
        if not (step > 0 and stop > start):
            raise ValueError
        return ensemble.frequency_grid(start, stop, step)
    except ValueError:
        raise UsageError(
            f"bad grid {text!r}: expected start:step:stop or log:start:stop:n"
        ) from None


def parse_freqs(text):
    parts = text.split(":")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"bad --freqs {text!r}: expected start:step:stop") from None
    if not (step > 0 and stop > start):
        raise UsageError("--freqs needs step > 0 and stop > start")
    return (start, stop, step)


def parse_orientations(text):
    """``powder:N``, ``axis-111``, ``axis-100`` or ``custom:DEG[@W],DEG[@W]...``."""
    if text in ("axis-111", "axis-100"):
        return ensemble.crystal_orientations(text)
    kind, _, rest = text.partition(":")
    try:
        if kind == "powder":
            return ensemble.powder_orientations(int(rest))
        if kind == "custom":
            samples = []
            for item in rest.split(","):
                deg, _, w = item.partition("@")
                samples.append((math.radians(float(deg)), float(w) if w else 1.0))
            return ensemble.crystal_orientations(samples)
    except ValueError as err:
        raise UsageError(f"bad --orientations {text!r}: {err}") from None
    raise UsageError(
        f"bad --orientations {text!r}: use powder:N, axis-111, axis-100 or custom:DEG[@W],..."
    )


def _build_parser():
    p = argparse.ArgumentParser(
        prog="nvsim",
        description="ODMR spectra of NV centers in crystals and nanodiamond powders.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="file of 'key = value' lines")
    p.add_argument("--D", dest="D", type=float, help="zero-field splitting, MHz (2870)")
    p.add_argument("--gamma", type=float, help="gyromagnetic ratio, MHz/G (2.8)")
    p.add_argument("--field", type=float, help="magnetic field, G")
    p.add_argument("--fields", help="field grid, start:step:stop or log:start:stop:n")
    p.add_argument("--freqs", help="frequency grid start:step:stop, MHz (0:5:7000)")
    p.add_argument("--fwhm", type=float, help="Gaussian linewidth, MHz (20)")
    p.add_argument("--orientations", help="powder:N | axis-111 | axis-100 | custom:DEG[@W],...")
    p.add_argument("--class", dest="cls", choices=("sq", "ot", "all"), type=str.lower)
    p.add_argument("--widths", help="sweep-width grid start:step:stop, MHz (10:10:5000)")
    p.add_argument("--bin", type=float, help="density bin, MHz (1)")
    p.add_argument("--weighting", choices=(analysis.POPULATION, analysis.KAPPA))
    p.add_argument("-o", "--output", help="output path prefix (default: command name)")
    p.add_argument("--plot", dest="plot", action="store_true", default=None)
    p.add_argument("--no-plot", dest="plot", action="store_false")
    return p


_CONFIG_KEYS = {
    "d": "D", "gamma": "gamma", "field": "field", "fields": "fields", "freqs": "freqs",
    "fwhm": "fwhm", "orientations": "orientations", "class": "cls", "widths": "widths",
    "bin": "bin", "weighting": "weighting", "output": "output", "plot": "plot",
}


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err.strerror}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        if not sep or not key:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        out[_CONFIG_KEYS[key]] = value.strip()
    return out


def _convert(dest, value):
    if dest in ("D", "gamma", "field", "fwhm", "bin"):
        try:
            return float(value)
        except ValueError:
            raise UsageError(f"{dest}: not a number: {value!r}") from None
    if dest == "plot":
        v = str(value).lower()
        if v not in ("true", "false", "yes", "no", "1", "0"):
            raise UsageError(f"plot: expected true/false, got {value!r}")
        return v in ("true", "yes", "1")
    if dest == "cls":
        v = value.lower()
        if v not in ("sq", "ot", "all"):
            raise UsageError(f"class: expected sq, ot or all, got {value!r}")
        return v
    if dest == "weighting" and value not in (analysis.POPULATION, analysis.KAPPA):
        raise UsageError(f"weighting: expected population or kappa, got {value!r}")
    return value


def parse_config(argv, config_path=None):
    """Build a validated RunConfig; exits with status 2 on any usage error."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _make_config(args, config_path)
    except UsageError as err:
        parser.error(str(err))


def _make_config(args, config_path):
    raw = {}
    path = args.config or config_path
    if path:
        for dest, value in read_config(path).items():
            raw[dest] = _convert(dest, value)
    for dest in _CONFIG_KEYS.values():
        value = getattr(args, dest)
        if value is not None:
            raw[dest] = value

    cmd = args.command
    cfg = RunConfig(command=cmd)
    cfg.D = raw.get("D", D_DEFAULT)
    cfg.gamma = raw.get("gamma", GAMMA_DEFAULT)
    cfg.field = raw.get("field", _FIELD_DEFAULT.get(cmd, 0.0))
    cfg.fwhm = raw.get("fwhm", ensemble.DEFAULT_FWHM)
    cfg.bin = raw.get("bin", analysis.DEFAULT_BIN)
    cfg.cls = raw.get("cls", "all")
    cfg.weighting = raw.get("weighting", analysis.POPULATION)
    cfg.orientations = raw.get("orientations", "powder:512")
    cfg.output = raw.get("output") or cmd
    cfg.plot = raw.get("plot", True)

    if not (math.isfinite(cfg.field) and cfg.field >= 0):
        raise UsageError(f"--field must be a nonnegative number of gauss (got {cfg.field:g})")
    try:
        ModelParams(D=cfg.D, gamma_e=cfg.gamma, B=cfg.field)
    except ValueError as err:
        raise UsageError(str(err)) from None
    if not (cfg.fwhm > 0):
        raise UsageError("--fwhm must be positive")
    if not (cfg.bin > 0):
        raise UsageError("--bin must be positive")

    cfg.freqs = parse_freqs(raw["freqs"]) if "freqs" in raw else ensemble.DEFAULT_FREQS
    cfg.fields = parse_grid(raw.get("fields", _FIELDS_DEFAULT.get(cmd, "0:10:3500")))
    if np.any(cfg.fields < 0):
        raise UsageError("--fields must be nonnegative")
    cfg.widths = parse_grid(raw.get("widths", "10:10:5000"))
    if np.any(cfg.widths <= 0):
        raise UsageError("--widths must be positive")
    parse_orientations(cfg.orientations)
    return cfg


def _threads():
    try:
        n = int(os.environ.get("NVSIM_THREADS", ""))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _fmt(x):
    return f"{x:.9g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_pgm(path, matrix):
    """8-bit binary PGM; row 0 (top) is the first field, linear min-max scaling."""
    m = np.asarray(matrix, dtype=float)
    lo, hi = (float(m.min()), float(m.max())) if m.size else (0.0, 0.0)
    if hi > lo:
        img = np.rint((m - lo) / (hi - lo) * 255.0)
    else:
        img = np.zeros_like(m)
    h, w = m.shape
    header = f"P5\n# min={lo:.9g} max={hi:.9g}\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.astype(np.uint8).tobytes())


def read_pgm(path):
    """Inverse of write_pgm: returns (uint8 image, (min, max))."""
    data = Path(path).read_bytes()
    lines, pos = [], 0
    while len(lines) < 4:
        end = data.index(b"\n", pos)
        lines.append(data[pos:end].decode("ascii"))
        pos = end + 1
    if lines[0] != "P5":
        raise ValueError("not a binary PGM")
    bounds = dict(kv.split("=") for kv in lines[1].lstrip("# ").split())
    w, h = (int(v) for v in lines[2].split())
    img = np.frombuffer(data[pos:], dtype=np.uint8).reshape(h, w)
    return img, (float(bounds["min"]), float(bounds["max"]))


def _class_filter(cfg):
    return None if cfg.cls == "all" else cfg.cls.upper()


def run(cfg):
    """Execute one command and write its files. Returns the list of paths."""
    orient = parse_orientations(cfg.orientations)
    prefix = Path(cfg.output)
    csv_path = prefix.with_name(prefix.name + ".csv")
    pgm_path = prefix.with_name(prefix.name + ".pgm")
    png_path = prefix.with_name(prefix.name + ".png")
    workers = _threads()
    written = [csv_path]
    figure = None
    common = dict(D=cfg.D, gamma_e=cfg.gamma)

    if cfg.command == "spectrum":
        sticks = ensemble.stick_spectrum(cfg.field, orient, **common)
        spec = ensemble.convolve_lineshape(sticks, cfg.freqs, cfg.fwhm, _class_filter(cfg))
        write_csv(csv_path, ["freq_mhz", "amplitude"], zip(spec.freqs, spec.amps))
        figure = ("plot_spectrum", (spec,), {"title": f"B = {cfg.field:g} G, {orient.label}"})

    elif cfg.command == "map2d":
        fm = ensemble.field_map(
            cfg.fields, cfg.freqs, cfg.fwhm, orient, _class_filter(cfg), workers=workers, **common
        )
        rows = (
            (b, f, a)
            for b, row in zip(fm.fields, fm.amps)
            for f, a in zip(fm.freqs, row)
        )
        write_csv(csv_path, ["field_g", "freq_mhz", "amplitude"], rows)
        write_pgm(pgm_path, fm.amps)
        written.append(pgm_path)
        figure = ("plot_field_map", (fm.fields, fm.freqs, fm.amps), {"title": orient.label})

    elif cfg.command == "widths":
        wc = analysis.width_curve(cfg.fields, orient, workers=workers, **common)
        write_csv(
            csv_path,
            ["field_g", "sigma_sq_mhz", "sigma_ot_mhz"],
            zip(wc.fields, wc.sigma_sq, wc.sigma_ot),
        )
        figure = ("plot_widths", (wc,), {})

    elif cfg.command == "poldensity":
        d = analysis.polarization_density(
            cfg.field, orient, cfg.cls, None, cfg.bin, cfg.weighting, **common
        )
        write_csv(csv_path, ["freq_mhz", "density_per_mhz"], zip(d.freqs, d.density))
        f_min, f_max, step = cfg.freqs
        heat = analysis.density_map(
            cfg.fields, orient, (f_min, f_max), step, cfg.cls, cfg.weighting,
            workers=workers, **common,
        )
        write_pgm(pgm_path, heat)
        written.append(pgm_path)
        figure = ("plot_density", (d,), {"title": f"B = {cfg.field:g} G"})

    elif cfg.command == "sweep":
        sq, ot = analysis.sweep_curve(
            cfg.field, orient, cfg.widths, cfg.bin, cfg.weighting, **common
        )
        write_csv(csv_path, ["width_mhz", "pmax_sq", "pmax_ot"], zip(sq.widths, sq.p_max, ot.p_max))
        figure = ("plot_sweep", (sq, ot), {})

    if cfg.plot and figure is not None:
        from nvsim import plotting

        name, args, kwargs = figure
        getattr(plotting, name)(*args, png_path, **kwargs)
        written.append(png_path)
    return written


def main(argv=None):
    cfg = parse_config(sys.argv[1:] if argv is None else argv)
    parent = Path(cfg.output).parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        print(f"nvsim: cannot write output under {parent}", file=sys.stderr)
        return EXIT_OUTPUT
    try:
        paths = run(cfg)
    except ConvergenceError as err:
        print(f"nvsim: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"nvsim: cannot write output: {err}", file=sys.stderr)
        return EXIT_OUTPUT
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
