import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvsim.ensemble import (
    DEFAULT_FIELDS,
    OrientationSet,
    Stick,
    convolve_lineshape,
    crystal_orientations,
    field_grid,
    field_map,
    gaussian_peak,
    powder_orientations,
    stick_spectrum,
)
from nvsim.spin import OT, SQ

import oracles

D, G = 2870.0, 2.8


# --- orientation sets ----------------------------------------------------------

def test_powder_normalized():
    p = powder_orientations(64)
    assert len(p) == 64
    assert math.fsum(p.weights) == pytest.approx(1.0, abs=1e-12)
    assert np.all((p.thetas > 0) & (p.thetas < math.pi / 2))


@pytest.mark.parametrize("power, exact", [(0, 1.0), (1, 0.5), (2, 1 / 3), (3, 0.25), (4, 0.2), (7, 0.125)])
def test_powder_moments_exact(power, exact):
    p = powder_orientations(4)  # exact through degree 7
    assert np.sum(p.weights * np.cos(p.thetas) ** power) == pytest.approx(exact, abs=1e-12)


def test_powder_second_moment_n64():
    p = powder_orientations(64)
    assert np.sum(p.weights * np.cos(p.thetas) ** 2) == pytest.approx(1 / 3, abs=1e-10)


@pytest.mark.parametrize("n", [1, 0, 2.5])
def test_powder_rejects_small_n(n):
    with pytest.raises(ValueError):
        powder_orientations(n)


def test_axis_100():
    o = crystal_orientations("axis-100")
    assert len(o) == 1
    assert math.degrees(o.thetas[0]) == pytest.approx(54.7356103, abs=1e-6)
    assert o.thetas[0] == pytest.approx(0.955317, abs=1e-6)
    assert o.weights[0] == 1.0


def test_axis_111():
    o = crystal_orientations("axis-111")
    np.testing.assert_allclose(np.degrees(o.thetas), [0.0, 70.528779], atol=1e-5)
    np.testing.assert_allclose(o.weights, [0.25, 0.75])
    # 70.53 deg is the fold of the 109.47 deg tetrahedral angle
    assert math.pi - math.acos(-1 / 3) == pytest.approx(o.thetas[1])


def test_custom_orientations_normalized():
    o = crystal_orientations([(0.3, 2.0)])
    assert o.weights[0] == 1.0 and o.thetas[0] == pytest.approx(0.3)


def test_custom_orientations_fold_and_reject():
    o = crystal_orientations([(math.pi - 0.2, 1.0)])
    assert o.thetas[0] == pytest.approx(0.2)
    with pytest.raises(ValueError):
        crystal_orientations([(0.3, 0.0)])
    with pytest.raises(ValueError):
        crystal_orientations([])
    with pytest.raises(ValueError):
        crystal_orientations("axis-110")


# --- stick spectra --------------------------------------------------------------

def test_zero_field_sticks_axis_100():
    s = stick_spectrum(0.0, crystal_orientations("axis-100"))
    np.testing.assert_allclose(np.sort(s.freq), [0.0, D, D], atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0, math.pi), st.floats(0.01, 10)), min_size=1, max_size=6))
def test_zero_field_isotropy(samples):
    s = stick_spectrum(0.0, crystal_orientations(samples))
    f = s.freq.reshape(-1, 3)
    np.testing.assert_allclose(np.sort(f, axis=1), np.tile([0.0, D, D], (f.shape[0], 1)), atol=1e-6)
    assert np.all(s.freq[s.is_ot] < 1e-6)


def test_axis_111_at_1000_gauss():
    s = stick_spectrum(1000.0, crystal_orientations("axis-111"))
    axial = s.theta == 0
    f, a = s.freq[axial], s.amp[axial]
    for target in (70.0, 5670.0):
        k = np.argmin(abs(f - target))
        assert f[k] == pytest.approx(target, abs=1e-6)
        assert a[k] > 0
        assert a[k] == pytest.approx(7.84 * 0.25)


def test_sticks_iterate_as_records():
    s = stick_spectrum(300.0, crystal_orientations("axis-100"))
    recs = list(s)
    assert len(recs) == 3 and all(isinstance(r, Stick) for r in recs)
    assert sum(r.cls == OT for r in recs) == 1
    assert all(r.freq >= 0 for r in recs)


def test_powder_sticks_match_direct_per_orientation_sum(powder512):
    B = 985.0
    s = stick_spectrum(B, powder512)
    freq = s.freq.reshape(-1, 3)
    kappa = s.kappa.reshape(-1, 3)
    for j in range(0, len(powder512), 37):
        ref = oracles.dense_transitions(D, G, B, powder512.thetas[j])
        np.testing.assert_allclose(freq[j], [r[0] for r in ref], rtol=1e-9, atol=1e-7)
        np.testing.assert_allclose(kappa[j], [r[4] for r in ref], rtol=1e-7, atol=1e-10)
    ot = s.select(OT)
    w = np.abs(ot.amp)
    mean = np.sum(w * ot.freq) / np.sum(w)
    # overtone cluster sits just above 2*gamma*B, between the theta=0 and 90 deg limits
    assert 2 * G * B - 1 < mean < 2 * G * B + 1000
    assert np.all(ot.freq > 2 * G * B - 400)


def test_stick_amplitude_sign_convention():
    s = stick_spectrum(3000.0, crystal_orientations([(0.0, 1.0)]))
    np.testing.assert_allclose(s.amp, -s.kappa * s.weight)
    assert np.all(s.amp[~s.is_ot] > 0)


# --- lineshape ---------------------------------------------------------------

def test_gaussian_peak_height():
    sticks = [Stick(2870.0, 1.0, SQ, 0.0)]
    spec = convolve_lineshape(sticks, (2800, 2940, 1.0), fwhm=20)
    assert gaussian_peak(20) == pytest.approx(0.04697, abs=5e-6)
    assert spec.amps.max() == pytest.approx(gaussian_peak(20), rel=1e-12)
    assert spec.freqs[np.argmax(spec.amps)] == 2870.0


def test_empty_sticks():
    spec = convolve_lineshape([], (0, 100, 1), fwhm=5)
    assert spec.amps.shape == spec.freqs.shape
    assert not spec.amps.any()


def test_area_conservation():
    rng = np.random.default_rng(3)
    sticks = [Stick(f, a, SQ, 0.0) for f, a in zip(rng.uniform(500, 6500, 50), rng.normal(size=50))]
    spec = convolve_lineshape(sticks, (0, 7000, 5.0), fwhm=20)
    assert np.sum(spec.amps) * 5.0 == pytest.approx(sum(s.amp for s in sticks), rel=1e-3)


def test_class_filter():
    s = stick_spectrum(985.0, powder_orientations(32))
    grid = (0, 8000, 5)
    full = convolve_lineshape(s, grid, 20).amps
    parts = convolve_lineshape(s, grid, 20, "SQ").amps + convolve_lineshape(s, grid, 20, "OT").amps
    np.testing.assert_allclose(full, parts, atol=1e-15)


@pytest.mark.parametrize("kw", [dict(fwhm=0), dict(fwhm=-1), dict(grid=(0, 10, 0)), dict(grid=(10, 0, 1))])
def test_convolve_rejects_bad_arguments(kw):
    args = dict(grid=(0, 100, 1), fwhm=5)
    args.update(kw)
    with pytest.raises(ValueError):
        convolve_lineshape([], **args)


def test_powder_self_convergence(powder512, powder256):
    a = convolve_lineshape(stick_spectrum(500.0, powder512), fwhm=20).amps
    b = convolve_lineshape(stick_spectrum(500.0, powder256), fwhm=20).amps
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-3


def test_permutation_invariance():
    th = np.array([0.1, 0.7, 1.3, 0.4])
    w = np.array([1.0, 2.0, 3.0, 4.0])
    a = OrientationSet(th, w)
    perm = [2, 0, 3, 1]
    b = OrientationSet(th[perm], w[perm])
    sa = convolve_lineshape(stick_spectrum(750.0, a), fwhm=20).amps
    sb = convolve_lineshape(stick_spectrum(750.0, b), fwhm=20).amps
    assert sa.tobytes() == sb.tobytes()


# --- field maps ---------------------------------------------------------------

def test_field_map_shape():
    fm = field_map(field_grid(*DEFAULT_FIELDS), orientations=powder_orientations(8))
    assert fm.amps.shape == (351, 1401)
    assert fm.fields[0] == 0 and fm.fields[-1] == 3500
    assert fm.freqs[-1] == 7000


@pytest.mark.parametrize("orient", ["axis-111", "axis-100", "powder"])
def test_zero_field_row_single_peak(orient):
    o = powder_orientations(64) if orient == "powder" else crystal_orientations(orient)
    fm = field_map([0.0, 100.0], orientations=o)
    row = fm.amps[0]
    assert fm.freqs[np.argmax(row)] == 2870.0
    assert np.all(row[np.abs(fm.freqs - 2870) > 100] == 0)


def test_field_map_rows_match_spectra_and_threads(powder256):
    fields = np.arange(0, 500, 10.0)
    serial = field_map(fields, orientations=powder256)
    threaded = field_map(fields, orientations=powder256, workers=4)
    assert serial.amps.tobytes() == threaded.amps.tobytes()
    row = convolve_lineshape(stick_spectrum(250.0, powder256), fwhm=20).amps
    np.testing.assert_allclose(serial.amps[25], row, rtol=0, atol=1e-15)


def test_overtone_ridge_slope(powder512):
    fields = np.arange(2000, 3501, 100.0)
    fm = field_map(fields, (0, 20000, 5), orientations=powder512, class_filter="OT")
    w = np.abs(fm.amps)
    centre = (w @ fm.freqs) / w.sum(axis=1)
    slope = np.polyfit(fields, centre, 1)[0]
    assert slope == pytest.approx(2 * G, rel=0.05)
