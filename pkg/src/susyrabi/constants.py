"""Numerical tolerances and physical defaults shared across the package."""

import numpy as np

TWO_PI = 2.0 * np.pi

# tolerances
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
SPECTRUM_HERMITIAN_TOL = 1e-8
PSD_FLOOR = -1e-8
TRUNCATION_TOL = 1e-6
COHERENT_NORM_TOL = 1e-8
DEGENERACY_REL = 1e-6
CONVERGENCE_REL = 1e-6
MAX_PHASE_PER_STEP = 0.05
TRACE_GUARD = 1e-8

# reference experiment defaults, angular frequencies in rad/s and times in s
OMEGA_SPECTRUM = TWO_PI * 5.73e3
G_M_SPECTRUM = TWO_PI * 5.73e3
OMEGA_BROKEN = TWO_PI * 10e3
G_M_ENERGY = TWO_PI * 5.73e3
G_M_TOMOGRAPHY = TWO_PI * 5.43e3

EXP_QUENCH_T = 40e-6
EXP_QUENCH_TAU = 400e-6
LINEAR_QUENCH_TAU = 200e-6

PROBE_OMEGA_P = TWO_PI * 0.17e3
PROBE_TAU = 1000e-6
SDF_OMEGA_P = TWO_PI * 8.1e3
TAU_D = 1.2e-3

TOMO_BETA = 0.687
TOMO_N = 12
TOMO_NCUT_FIT = 7
TOMO_SHOTS = 400
SIDEBAND_OMEGA = TWO_PI * 10e3
GAMMA_EXPONENT = 0.7
