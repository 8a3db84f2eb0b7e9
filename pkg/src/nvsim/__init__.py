"""Simulation of NV-center ODMR spectra for single crystals and nanodiamond powders."""

from nvsim.spin import (
    OT,
    SQ,
    ConvergenceError,
    EigenSystem,
    ModelParams,
    Transition,
    build_hamiltonian,
    classify_transition,
    eigensystem,
    enumerate_transitions,
    spin1_operators,
)
from nvsim.ensemble import (
    FieldMap,
    OrientationSet,
    Spectrum,
    Stick,
    Sticks,
    convolve_lineshape,
    crystal_orientations,
    field_map,
    powder_orientations,
    stick_spectrum,
)
from nvsim.analysis import (
    DensityCurve,
    SweepCurve,
    WidthCurve,
    characteristic_width,
    integrated_polarization,
    polarization_density,
    sweep_curve,
    width_curve,
)

__version__ = "0.1.0"
