"""Time evolution: propagators, adiabatic quenches, probe spectroscopy, dephasing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import constants as C
from .exceptions import DimensionMismatch, StepTooCoarse
from .hilbert import (
    DOWN,
    SIGMA_X,
    SIGMA_Z,
    UP,
    DensityMatrix,
    Operator,
    SpaceDescriptor,
    StateVector,
    embed,
    fock_state,
    max_abs,
)
from .qrm import PathPoint, path_hamiltonian, qrm_terms, spectrum
from .susy import ideal_ground_states

HamiltonianSource = Callable[[float], Operator]


def _spread(mat):
    """Max-abs norm of ``H`` after removing its mean diagonal (a global phase)."""
    shift = np.trace(mat).real / mat.shape[0]
    return max_abs(mat - shift * np.eye(mat.shape[0]))


def _expm_hermitian(mat, dt):
    e, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    return (v * np.exp(-1j * e * dt)) @ v.conj().T


def _auto_dt(h_of_t, t0, t1, rate_extra=0.0, samples=33):
    ts = np.linspace(t0, t1, samples)
    peak = max(_spread(h_of_t(t).mat) for t in ts) + rate_extra
    if peak == 0:
        return t1 - t0
    # leave headroom for scales between the samples
    return 0.8 * C.MAX_PHASE_PER_STEP / peak


def _substeps(t_grid, dt):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1:
        raise ValueError("t_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-decreasing")
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        m = max(1, math.ceil((t1 - t0) / dt - 1e-9)) if t1 > t0 else 0
        yield t0, t1, m


def propagate(H_of_t: HamiltonianSource, psi0: StateVector, t_grid, dt: float | None = None):
    """Evolve ``psi0`` with piecewise-constant midpoint exponentials.

    Returns the list of states at the points of ``t_grid`` (the first entry is
    ``psi0`` itself). With ``dt=None`` the step is chosen so that
    ``dt * ||H||_max <= MAX_PHASE_PER_STEP``; an explicit ``dt`` that violates
    this raises :class:`StepTooCoarse`.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if dt is None:
        dt = _auto_dt(H_of_t, t_grid[0], t_grid[-1])
    out = [psi0]
    vec = psi0.vec.copy()
    space = psi0.space
    for t0, t1, m in _substeps(t_grid, dt):
        if m == 0:
            out.append(out[-1])
            continue
        h = (t1 - t0) / m
        for i in range(m):
            H = H_of_t(t0 + (i + 0.5) * h)
            if H.space != space:
                raise DimensionMismatch(f"H on {H.space}, state on {space}")
            if h * _spread(H.mat) > C.MAX_PHASE_PER_STEP:
                raise StepTooCoarse(
                    f"dt={h:.3e} s gives phase {h * _spread(H.mat):.3f} rad per step"
                )
            vec = _expm_hermitian(H.mat, h) @ vec
        nrm = np.linalg.norm(vec)
        if abs(nrm - 1) > 1e-8:
            raise StepTooCoarse(f"norm drifted to {nrm!r}")
        vec = vec / nrm
        out.append(StateVector(space, vec))
    return out


class QuenchKind(enum.Enum):
    EXPONENTIAL_PHONON = "exponential"
    LINEAR_COUPLING = "linear"


@dataclass(frozen=True)
class QuenchSchedule:
    """Adiabatic ramp toward a Rabi-model target.

    ``EXPONENTIAL_PHONON`` holds ``omega_s = (1-r) omega`` and ``g = r g_m`` and
    ramps the phonon frequency as ``(9 exp(-t/T) + 1) omega``.
    ``LINEAR_COUPLING`` holds ``omega_s = 0`` and ramps ``g(t) = g_m t / tau``.
    """

    kind: QuenchKind
    tau: float
    omega: float
    g_m: float
    r: float = 1.0
    T: float | None = None
    dt: float | None = None
    n_cut: int = 16

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.kind is QuenchKind.EXPONENTIAL_PHONON and not (self.T and self.T > 0):
            raise ValueError("exponential schedule needs T > 0")
        if self.dt is not None and self.dt > self.tau / 200:
            raise ValueError("dt must be <= tau / 200")

    @classmethod
    def exponential(cls, point: PathPoint, T=C.EXP_QUENCH_T, tau=C.EXP_QUENCH_TAU, **kw):
        return cls(QuenchKind.EXPONENTIAL_PHONON, tau=tau, omega=point.omega,
                   g_m=point.g_m, r=point.r, T=T, **kw)

    @classmethod
    def linear(cls, g_m, omega, tau=C.LINEAR_QUENCH_TAU, **kw):
        return cls(QuenchKind.LINEAR_COUPLING, tau=tau, omega=omega, g_m=g_m, r=1.0, **kw)

    @property
    def space(self):
        return SpaceDescriptor(self.n_cut, True)

    def hamiltonian_source(self) -> HamiltonianSource:
        space = self.space
        half_sz, osc, coup = (t.mat for t in qrm_terms(space))
        w, tau = self.omega, self.tau
        if self.kind is QuenchKind.EXPONENTIAL_PHONON:
            ws, g, T = (1 - self.r) * w, self.r * self.g_m, self.T
            static = ws * half_sz + g * coup

            def H(t):
                return Operator(space, static + (9 * math.exp(-t / T) + 1) * w * osc)
        else:
            gm = self.g_m

            def H(t):
                g = gm * t / tau
                return Operator(space, w * osc + g * coup + (g * g / w) * np.eye(space.dim))
        return H

    def start_state(self, spin=DOWN):
        return fock_state(self.space, 0, spin=spin)


@dataclass(frozen=True)
class AdiabaticResult:
    state: StateVector
    target: StateVector
    fidelity: float
    target_label: str

    @property
    def infidelity(self):
        return 1.0 - self.fidelity


def adiabatic_ground_state(schedule: QuenchSchedule, psi0: StateVector | None = None) -> AdiabaticResult:
    """Run the quench and compare with the exact target state.

    Exponential: the target is the ground state of the path Hamiltonian at ``r``.
    Linear: the target is whichever ideal cat ``psi_+`` / ``psi_-`` the start
    state connects to (``|up>|0> -> psi_+``, ``|down>|0> -> psi_-``).
    """
    if psi0 is None:
        psi0 = schedule.start_state()
    if psi0.space != schedule.space:
        raise DimensionMismatch("psi0 must live on the schedule's space")
    final = propagate(schedule.hamiltonian_source(), psi0, [0.0, schedule.tau], schedule.dt)[-1]
    if schedule.kind is QuenchKind.EXPONENTIAL_PHONON:
        point = PathPoint(schedule.r, schedule.g_m, schedule.omega)
        target = spectrum(path_hamiltonian(point, schedule.space), 1).states[0]
        label = f"ground(r={schedule.r:g})"
    else:
        plus, minus = ideal_ground_states(schedule.space, schedule.g_m, schedule.omega)
        fp, fm = final.fidelity(plus), final.fidelity(minus)
        target, label = (plus, "psi_plus") if fp >= fm else (minus, "psi_minus")
    return AdiabaticResult(final, target, final.fidelity(target), label)


@dataclass(frozen=True)
class ProbeSettings:
    Omega_p: float = C.PROBE_OMEGA_P
    tau: float = C.PROBE_TAU
    omega_p_grid: tuple = ()

    def __post_init__(self):
        if not self.Omega_p > 0 or not self.tau > 0:
            raise ValueError("Omega_p and tau must be positive")


@dataclass(frozen=True)
class ProbeResult:
    omega_eff: np.ndarray
    depletion: np.ndarray
    sigma_z: np.ndarray

    def peak(self):
        """Peak location refined by a parabola through the three top grid points."""
        i = int(np.argmax(self.depletion))
        x, y = self.omega_eff, self.depletion
        if 0 < i < len(x) - 1:
            x0, x1, x2 = x[i - 1:i + 2]
            y0, y1, y2 = y[i - 1:i + 2]
            den = (x0 - x1) * (x0 - x2) * (x1 - x2)
            a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
            b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / den
            if a < 0:
                return float(-b / (2 * a))
        return float(x[i])

    def peaks(self, min_height=None):
        """Indices of local maxima above ``min_height`` (default 10% of the max)."""
        y = self.depletion
        if min_height is None:
            min_height = 0.1 * y.max()
        inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] >= min_height)
        return np.flatnonzero(inner) + 1


def probe_spectrum(psi_ground: StateVector, H_system: Operator, settings: ProbeSettings,
                   dt: float | None = None) -> ProbeResult:
    """Response to ``H_system + Omega_p sx cos(omega_p t)`` for each probe frequency.

    All frequencies are propagated together in the eigenbasis of ``H_system``
    with a symmetric split step: half a step of the (diagonal) system
    evolution, a full step of the drive, half a step of the system.
    """
    space = H_system.space
    if psi_ground.space != space:
        raise DimensionMismatch("state and Hamiltonian spaces differ")
    wgrid = np.asarray(settings.omega_p_grid, dtype=float)
    if wgrid.size == 0:
        raise ValueError("omega_p_grid is empty")
    e, v = np.linalg.eigh(0.5 * (H_system.mat + H_system.mat.conj().T))
    e = e - e[0]
    sx = embed(SIGMA_X, None, space).mat
    sz = embed(SIGMA_Z, None, space).mat
    xe, xv = np.linalg.eigh(v.conj().T @ sx @ v)

    peak = 0.5 * (e[-1] - e[0]) + settings.Omega_p
    if dt is None:
        dt = min(C.MAX_PHASE_PER_STEP / peak, 0.1 / max(wgrid.max(), 1.0))
    elif dt * peak > C.MAX_PHASE_PER_STEP:
        raise StepTooCoarse(f"dt={dt:.3e} s too coarse for probe propagation")
    m = max(1, math.ceil(settings.tau / dt))
    h = settings.tau / m

    half = np.exp(-0.5j * e * h)
    psi0 = v.conj().T @ psi_ground.vec
    psi = np.tile(psi0, (len(wgrid), 1))
    for i in range(m):
        c = settings.Omega_p * np.cos(wgrid * (i + 0.5) * h)
        psi = psi * half
        # rows are states: row @ conj(xv) is xv^dag psi
        psi = psi @ xv.conj()
        psi = psi * np.exp(-1j * np.outer(c * h, xe))
        psi = psi @ xv.T
        psi = psi * half
    # back to the Fock basis
    final = psi @ v.T
    depletion = 1.0 - np.abs(final @ psi_ground.vec.conj()) ** 2
    szv = np.einsum("ki,ij,kj->k", final.conj(), sz, final).real
    return ProbeResult(wgrid, depletion, szv)


@dataclass(frozen=True)
class NoiseModel:
    tau_d: float = math.inf

    def __post_init__(self):
        if not self.tau_d > 0:
            raise ValueError("tau_d must be positive")


def lindblad_propagate(H_of_t: HamiltonianSource, rho0: DensityMatrix, noise: NoiseModel,
                       t_grid, dt: float | None = None):
    """Fourth-order Runge-Kutta integration of the motional-dephasing master equation.

    ``drho/dt = -i[H, rho] + (2 N rho N - N^2 rho - rho N^2) / tau_d`` with
    ``N = a^dag a``. Returns the density matrices at ``t_grid``.
    """
    space = rho0.space
    k = space.n_fock
    ndiag = np.arange(k, dtype=float)
    if space.with_spin:
        ndiag = np.concatenate([ndiag, ndiag])
    rate = 0.0 if math.isinf(noise.tau_d) else 1.0 / noise.tau_d
    # the dissipator is diagonal in the Fock basis: coherence (i, j) decays at (n_i - n_j)^2 rate
    damp = -rate * (ndiag[:, None] - ndiag[None, :]) ** 2

    t_grid = np.asarray(t_grid, dtype=float)
    if dt is None:
        dt = _auto_dt(H_of_t, t_grid[0], t_grid[-1], rate_extra=float(-damp.min()))

    def rhs(t, rho):
        H = H_of_t(t).mat
        return -1j * (H @ rho - rho @ H) + damp * rho

    out = [rho0]
    rho = rho0.mat.copy()
    for t0, t1, m in _substeps(t_grid, dt):
        if m == 0:
            out.append(out[-1])
            continue
        h = (t1 - t0) / m
        for i in range(m):
            t = t0 + i * h
            Hm = H_of_t(t + 0.5 * h)
            if Hm.space != space:
                raise DimensionMismatch(f"H on {Hm.space}, state on {space}")
            if h * (_spread(Hm.mat) - damp.min()) > C.MAX_PHASE_PER_STEP:
                raise StepTooCoarse(f"dt={h:.3e} s too coarse for the master equation")
            k1 = rhs(t, rho)
            k2 = rhs(t + 0.5 * h, rho + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, rho + 0.5 * h * k2)
            k4 = rhs(t + h, rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr - 1) > C.TRACE_GUARD:
            raise StepTooCoarse(f"trace drifted to {tr!r}")
        rho = rho / tr
        out.append(DensityMatrix(space, rho, check=False))
    return out


def dephased_linear_quench(g_m, omega, tau=C.LINEAR_QUENCH_TAU, tau_d=C.TAU_D,
                           spin=UP, n_cut=16, dt=None) -> DensityMatrix:
    """Final state of the linear coupling quench under motional dephasing."""
    sched = QuenchSchedule.linear(g_m, omega, tau, n_cut=n_cut)
    rho0 = sched.start_state(spin).to_density()
    return lindblad_propagate(sched.hamiltonian_source(), rho0, NoiseModel(tau_d),
                              [0.0, tau], dt)[-1]
