"""Simulated readout protocols for the ground-state energy.

Sideband spin dynamics, phonon-number fitting, spin-dependent-force
dynamics with slope extraction, and assembly of the energy expectation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import constants as C
from ._validation import check_curve
from .exceptions import FitDiverged, IllConditioned
from .hilbert import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Y,
    SIGMA_Z,
    BlockDensity,
    DensityMatrix,
    StateVector,
    embed,
    ladder_operators,
)


class Sideband(str, enum.Enum):
    BLUE = "blue"
    RED = "red"


def rabi_frequencies(Omega, n_levels, exponent=0.5):
    """``Omega_{n,n+1} = Omega (n+1)^exponent`` for n = 0 .. n_levels-1."""
    return Omega * np.arange(1, n_levels + 1, dtype=float) ** exponent


def decay_rates(gamma0, n_levels, exponent=C.GAMMA_EXPONENT):
    return gamma0 * np.arange(1, n_levels + 1, dtype=float) ** exponent


def sideband_weights(sideband, Omega, t, n_levels, gamma0=0.0, gamma_exponent=C.GAMMA_EXPONENT,
                     rabi_exponent=0.5):
    """Linear model of the spin-up probability in the Fock populations.

    Returns ``(w_up, w_down)``, each of shape ``(len(t), n_levels)``, such that
    ``p_up(t) = 1/2 + w_up @ P_up + w_down @ P_down`` once spin coherences are
    removed. Populations above ``n_levels - 1`` are taken as zero.
    """
    sideband = Sideband(sideband)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    rabi = rabi_frequencies(Omega, n_levels, rabi_exponent)
    gam = decay_rates(gamma0, n_levels, gamma_exponent)
    c = np.cos(np.outer(t, rabi)) * np.exp(-np.outer(t, gam))
    w_up = np.zeros((len(t), n_levels))
    w_dn = np.zeros((len(t), n_levels))
    if sideband is Sideband.BLUE:
        # 1/2 [1 + sum (P_up[n+1] - P_dn[n]) c_n] + P_up[0] / 2
        w_up[:, 0] = 0.5
        w_up[:, 1:] = 0.5 * c[:, :-1]
        w_dn[:, :] = -0.5 * c
    else:
        # 1/2 [1 + sum (P_up[n] - P_dn[n+1]) c_n] - P_dn[0] / 2
        w_up[:, :] = 0.5 * c
        w_dn[:, 0] = -0.5
        w_dn[:, 1:] = -0.5 * c[:, :-1]
    return w_up, w_dn


@dataclass(frozen=True)
class SidebandCurve:
    sideband: Sideband
    Omega: float
    t: np.ndarray
    p_up: np.ndarray
    gamma0: float = 0.0
    gamma_exponent: float = C.GAMMA_EXPONENT
    rabi_exponent: float = 0.5

    def __post_init__(self):
        check_curve(self.t, self.p_up)


def sideband_response(blocks: BlockDensity, sideband, Omega, t_grid, gamma0=0.0,
                      gamma_exponent=C.GAMMA_EXPONENT, rabi_exponent=0.5) -> SidebandCurve:
    """Closed-form spin-up probability under blue or red sideband driving."""
    p_up_n, p_dn_n = blocks.populations()
    w_up, w_dn = sideband_weights(sideband, Omega, t_grid, len(p_up_n), gamma0,
                                  gamma_exponent, rabi_exponent)
    p = 0.5 + w_up @ p_up_n + w_dn @ p_dn_n
    return SidebandCurve(Sideband(sideband), Omega, np.asarray(t_grid, dtype=float),
                         np.clip(p, 0.0, 1.0), gamma0, gamma_exponent, rabi_exponent)


def sideband_response_unitary(blocks: BlockDensity, sideband, Omega, t_grid, pad=2):
    """Spin-up probability from exact Jaynes-Cummings evolution (no decay).

    Blue: ``H = (Omega/2)(s+ a^dag + s- a)``; red: ``H = (Omega/2)(s+ a + s- a^dag)``.
    Used as an independent check of :func:`sideband_response`.
    """
    sideband = Sideband(sideband)
    big = blocks.padded(blocks.n_cut + pad)
    space = big.space
    a, adag, _ = ladder_operators(space.phonon())
    if sideband is Sideband.BLUE:
        h = embed(SIGMA_PLUS, adag) + embed(SIGMA_MINUS, a)
    else:
        h = embed(SIGMA_PLUS, a) + embed(SIGMA_MINUS, adag)
    e, v = np.linalg.eigh((0.5 * Omega) * h.mat)
    rho = v.conj().T @ big.joint().mat @ v
    proj_up = v.conj().T @ embed(0.5 * (np.eye(2) + SIGMA_Z), None, space).mat @ v
    out = []
    for t in np.asarray(t_grid, dtype=float):
        ph = np.exp(-1j * e * t)
        rho_t = ph[:, None] * rho * ph.conj()[None, :]
        out.append(np.trace(proj_up @ rho_t).real)
    return np.array(out)


def curve_with_shot_noise(curve: SidebandCurve, shots: int, seed) -> SidebandCurve:
    """Replace ``p_up`` by binomial frequencies with ``shots`` repetitions per point."""
    rng = np.random.default_rng(seed)
    freq = rng.binomial(shots, curve.p_up) / shots
    return SidebandCurve(curve.sideband, curve.Omega, curve.t, freq, curve.gamma0,
                         curve.gamma_exponent, curve.rabi_exponent)


@dataclass(frozen=True)
class PhononDistribution:
    p_n: np.ndarray
    residual: float

    @property
    def n_bar(self):
        return float(np.arange(len(self.p_n)) @ self.p_n)


class PhononDistributionFitter(RegressorMixin, BaseEstimator):
    """Nonnegative, normalized Fock populations from a blue-sideband flop.

    The spin is assumed reset to ``|down>`` so only ``P_down[n]`` enters:
    ``p_up(t) = 1/2 - 1/2 sum_n P_n cos(Omega sqrt(n+1) t) exp(-gamma_n t)``.

    Parameters
    ----------
    n_fit : int
        Highest Fock level fitted.
    Omega : float
        Blue-sideband Rabi frequency (rad/s).
    gamma0, gamma_exponent : float
        Decay schedule ``gamma_n = gamma0 (n+1)^gamma_exponent``.
    norm_weight : float
        Weight of the normalization row appended to the NNLS system.
    """

    def __init__(self, n_fit=8, Omega=C.SIDEBAND_OMEGA, gamma0=0.0,
                 gamma_exponent=C.GAMMA_EXPONENT, rabi_exponent=0.5, norm_weight=1e3):
        self.n_fit = n_fit
        self.Omega = Omega
        self.gamma0 = gamma0
        self.gamma_exponent = gamma_exponent
        self.rabi_exponent = rabi_exponent
        self.norm_weight = norm_weight

    def _design(self, t):
        _, w_dn = sideband_weights(Sideband.BLUE, self.Omega, t, self.n_fit + 1, self.gamma0,
                                   self.gamma_exponent, self.rabi_exponent)
        return w_dn

    def fit(self, t, p_up):
        t, p_up = check_curve(t, p_up)
        if self.Omega * t.max() < 2 * np.pi:
            raise IllConditioned("time grid shorter than one flop period of the n=0 component")
        m = self._design(t)
        rhs = p_up - 0.5
        # append sum(p) = 1 as a heavily weighted row
        a_aug = np.vstack([m, self.norm_weight * np.ones((1, m.shape[1]))])
        b_aug = np.concatenate([rhs, [self.norm_weight]])
        p, _ = nnls(a_aug, b_aug, maxiter=50 * m.shape[1])
        total = p.sum()
        if total <= 0:
            raise FitDiverged("phonon fit returned an all-zero distribution")
        p = p / total
        self.p_n_ = p
        self.residual_ = float(np.linalg.norm(m @ p - rhs))
        self.n_bar_ = float(np.arange(len(p)) @ p)
        return self

    def predict(self, t):
        check_is_fitted(self, "p_n_")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return 0.5 + self._design(t) @ self.p_n_

    def distribution(self):
        check_is_fitted(self, "p_n_")
        return PhononDistribution(self.p_n_.copy(), self.residual_)


def fit_phonon_distribution(curve: SidebandCurve, N_fit: int) -> PhononDistribution:
    if curve.sideband is not Sideband.BLUE:
        raise ValueError("phonon fitting uses the blue sideband")
    est = PhononDistributionFitter(n_fit=N_fit, Omega=curve.Omega, gamma0=curve.gamma0,
                                   gamma_exponent=curve.gamma_exponent,
                                   rabi_exponent=curve.rabi_exponent)
    return est.fit(curve.t, curve.p_up).distribution()


def spin_reset_blocks(state, n_cut=None) -> BlockDensity:
    """Reduced phonon state with the spin reset to ``|down>``."""
    if isinstance(state, StateVector):
        rho = state.to_density()
    else:
        rho = state
    k = rho.space.n_fock
    ph = rho.spin_block(0, 0) + rho.spin_block(1, 1)
    blocks = BlockDensity(np.zeros((k, k)), ph, check=False)
    return blocks if n_cut is None else blocks.cropped(n_cut)


@dataclass(frozen=True)
class SdfSettings:
    Omega_p: float = C.SDF_OMEGA_P
    t_grid: tuple = tuple(np.linspace(0, 100e-6, 51))

    def __post_init__(self):
        if not self.Omega_p > 0:
            raise ValueError("Omega_p must be positive")


def sdf_evolution(state, s: SdfSettings):
    """``<sigma_z>(t)`` under ``H = -(Omega_p/2) sigma_y (a + a^dag)``, exact diagonalization."""
    if isinstance(state, StateVector):
        rho = state.to_density()
    elif isinstance(state, DensityMatrix):
        rho = state
    else:
        raise TypeError("state must be a StateVector or DensityMatrix")
    space = rho.space
    a, adag, _ = ladder_operators(space.phonon())
    h = embed(SIGMA_Y, a + adag).mat * (-0.5 * s.Omega_p)
    e, v = np.linalg.eigh(h)
    r = v.conj().T @ rho.mat @ v
    sz = v.conj().T @ embed(SIGMA_Z, None, space).mat @ v
    out = []
    for t in np.asarray(s.t_grid, dtype=float):
        ph = np.exp(-1j * e * t)
        out.append(np.trace(sz @ (ph[:, None] * r * ph.conj()[None, :])).real)
    return np.array(out)


def sdf_analytic(t, beta, Omega_p, sign):
    """``<sigma_z>(t)`` for the ideal cat ``psi_sign`` under the spin-dependent force."""
    t = np.asarray(t, dtype=float)
    return np.exp(-(Omega_p * t) ** 2 / 2) * (sign * np.exp(-2 * beta ** 2)
                                              - np.sin(2 * beta * Omega_p * t))


class SdfSlopeFitter(RegressorMixin, BaseEstimator):
    """Fit ``P_up(t) = A + B f(t)`` with ``f`` the ideal-cat SDF response.

    After fitting, ``slope_`` is ``dP_up/dt`` at ``t = 0`` and ``coupling_`` the
    inferred ``<sigma_x (a + a^dag)>``.
    """

    def __init__(self, beta=0.573, Omega_p=C.SDF_OMEGA_P, sign=1):
        self.beta = beta
        self.Omega_p = Omega_p
        self.sign = sign

    def _basis(self, t):
        return sdf_analytic(t, self.beta, self.Omega_p, self.sign)

    def fit(self, t, p_up):
        t, p_up = check_curve(t, p_up)
        if 2 * self.beta * self.Omega_p * t.max() < np.pi:
            raise FitDiverged("curve stops before the first zero crossing of the sine factor")
        design = np.column_stack([np.ones_like(t), self._basis(t)])
        coef, *_ = np.linalg.lstsq(design, p_up, rcond=None)
        if not np.all(np.isfinite(coef)):
            raise FitDiverged("non-finite fit coefficients")
        self.A_, self.B_ = float(coef[0]), float(coef[1])
        self.slope_ = -2 * self.beta * self.Omega_p * self.B_
        self.coupling_ = 2 * self.slope_ / self.Omega_p
        return self

    def predict(self, t):
        check_is_fitted(self, "A_")
        return self.A_ + self.B_ * self._basis(np.asarray(t, dtype=float))


def fit_sdf_slope(t, p_up, beta, Omega_p, sign=1):
    """Return ``(slope_per_s, coupling)``."""
    est = SdfSlopeFitter(beta=beta, Omega_p=Omega_p, sign=sign).fit(t, p_up)
    return est.slope_, est.coupling_


def energy_expectation(n_bar, coupling, omega, g):
    """``omega (n_bar + 1/2) + g <sx (a + a^dag)> + g^2 / omega`` in rad/s."""
    return omega * (n_bar + 0.5) + g * coupling + g * g / omega


def coupling_from_slope(slope, Omega_p):
    return 2.0 * slope / Omega_p


@dataclass(frozen=True)
class EnergyMeasurement:
    n_bar: float
    p_n: np.ndarray
    slope: float
    coupling: float
    energy: float
    sideband_curve: SidebandCurve
    sdf_t: np.ndarray
    sdf_p_up: np.ndarray

    def to_record(self):
        return {
            "n_bar": self.n_bar,
            "p_n": [float(x) for x in self.p_n],
            "slope_per_s": self.slope,
            "coupling": self.coupling,
            "energy_hz": self.energy / C.TWO_PI,
        }


def measure_energy(state, omega, g, sign, Omega_b=C.SIDEBAND_OMEGA, n_fit=8,
                   sdf: SdfSettings | None = None, n_points=60, periods=3.0,
                   shots=None, seed=None) -> EnergyMeasurement:
    """Phonon fit plus SDF slope on a prepared state, assembled into an energy.

    ``shots=None`` uses exact probabilities; otherwise each time point is a
    binomial frequency over ``shots`` repetitions.
    """
    sdf = sdf or SdfSettings()
    rng = np.random.default_rng(seed)
    blocks = spin_reset_blocks(state)
    t_sb = np.linspace(0, periods * C.TWO_PI / Omega_b, n_points)
    curve = sideband_response(blocks, Sideband.BLUE, Omega_b, t_sb)
    if shots is not None:
        curve = curve_with_shot_noise(curve, shots, rng)
    dist = fit_phonon_distribution(curve, n_fit)

    t_sdf = np.asarray(sdf.t_grid, dtype=float)
    p_up = 0.5 * (1 + sdf_evolution(state, sdf))
    if shots is not None:
        p_up = rng.binomial(shots, np.clip(p_up, 0, 1)) / shots
    slope, coupling = fit_sdf_slope(t_sdf, p_up, g / omega, sdf.Omega_p, sign)
    energy = energy_expectation(dist.n_bar, coupling, omega, g)
    return EnergyMeasurement(dist.n_bar, dist.p_n, slope, coupling, energy, curve, t_sdf, p_up)
