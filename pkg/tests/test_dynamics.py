import math

import numpy as np
import pytest

from susyrabi import constants as C
from susyrabi.dynamics import (
    NoiseModel,
    ProbeSettings,
    QuenchSchedule,
    adiabatic_ground_state,
    dephased_linear_quench,
    lindblad_propagate,
    probe_spectrum,
    propagate,
)
from susyrabi.exceptions import StepTooCoarse
from susyrabi.hilbert import DOWN, UP, SpaceDescriptor, StateVector, ladder_operators
from susyrabi.qrm import PathPoint, parity_op, path_hamiltonian, spectrum
from susyrabi.susy import ideal_ground_states

W = C.OMEGA_SPECTRUM
WB = C.OMEGA_BROKEN


def constant(H):
    return lambda t: H


def test_energy_conserved_under_constant_h():
    space = SpaceDescriptor(12, True)
    H = path_hamiltonian(PathPoint(0.6, W, W), space)
    rng = np.random.default_rng(4)
    psi = StateVector(space, rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim),
                      normalize=True)
    e0 = np.vdot(psi.vec, H @ psi).real
    states = propagate(constant(H), psi, np.linspace(0, 1e-3, 5))
    for s in states:
        assert abs(np.vdot(s.vec, H @ s).real - e0) <= 1e-8 * abs(e0)


def test_matches_exact_exponential_for_constant_h():
    space = SpaceDescriptor(8, True)
    H = path_hamiltonian(PathPoint(0.3, W, W), space)
    psi = StateVector(space, np.eye(space.dim)[0])
    t = 2e-4
    out = propagate(constant(H), psi, [0.0, t])[-1]
    e, v = np.linalg.eigh(H.mat)
    exact = v @ (np.exp(-1j * e * t) * (v.conj().T @ psi.vec))
    assert abs(abs(np.vdot(exact, out.vec)) - 1) < 1e-10


def test_step_halving_changes_fidelity_little():
    sched = QuenchSchedule.exponential(PathPoint(0.5, W, W), n_cut=10)
    H = sched.hamiltonian_source()
    peak = max(np.max(np.abs(H(t).mat - np.mean(np.diag(H(t).mat)) * np.eye(22)))
               for t in np.linspace(0, sched.tau, 9))
    dt = 0.5 * C.MAX_PHASE_PER_STEP / peak
    f1 = adiabatic_ground_state(QuenchSchedule.exponential(PathPoint(0.5, W, W), n_cut=10, dt=dt))
    f2 = adiabatic_ground_state(QuenchSchedule.exponential(PathPoint(0.5, W, W), n_cut=10,
                                                           dt=dt / 2))
    assert abs(f1.fidelity - f2.fidelity) < 1e-7


def test_parity_conserved_along_quench():
    sched = QuenchSchedule.exponential(PathPoint(0.7, W, W), n_cut=10)
    P = parity_op(sched.space)
    states = propagate(sched.hamiltonian_source(), sched.start_state(),
                       np.linspace(0, sched.tau, 6))
    p0 = np.vdot(states[0].vec, P @ states[0]).real
    for s in states[1:]:
        assert abs(np.vdot(s.vec, P @ s).real - p0) <= 1e-6


@pytest.mark.parametrize("r", [0.0, 0.5, 0.9])
def test_exponential_quench_is_adiabatic(r):
    res = adiabatic_ground_state(QuenchSchedule.exponential(PathPoint(r, W, W), n_cut=12))
    assert res.infidelity < 0.01


@pytest.mark.parametrize("spin,label", [(UP, "psi_plus"), (DOWN, "psi_minus")])
def test_linear_quench_reaches_cats(spin, label):
    sched = QuenchSchedule.linear(0.573 * WB, WB, n_cut=16)
    res = adiabatic_ground_state(sched, sched.start_state(spin))
    assert res.target_label == label
    assert res.infidelity < 1e-3


def test_coarse_step_rejected():
    space = SpaceDescriptor(6, True)
    H = path_hamiltonian(PathPoint(0.5, W, W), space)
    psi = StateVector(space, np.eye(space.dim)[0])
    with pytest.raises(StepTooCoarse):
        propagate(constant(H), psi, [0.0, 1e-3], dt=1e-4)


def test_schedule_validation():
    with pytest.raises(ValueError):
        QuenchSchedule.linear(WB, WB, tau=-1.0)
    with pytest.raises(ValueError):
        QuenchSchedule.linear(WB, WB, tau=1e-4, dt=1e-5)


@pytest.fixture(scope="module")
def uncoupled_probe():
    space = SpaceDescriptor(12, True)
    H = path_hamiltonian(PathPoint(0.0, W, W), space)
    es = spectrum(H, 3)
    grid = tuple(C.TWO_PI * np.linspace(4000, 7500, 71))
    return probe_spectrum(es.states[0], H, ProbeSettings(C.PROBE_OMEGA_P, C.PROBE_TAU, grid))


def test_probe_peak_at_gap(uncoupled_probe):
    assert abs(uncoupled_probe.peak() - W) <= C.TWO_PI * 200


def test_probe_sigma_z_tracks_depletion(uncoupled_probe):
    # starting in |down, 0>, excitation raises <sigma_z>
    i = int(np.argmax(uncoupled_probe.depletion))
    assert uncoupled_probe.sigma_z[i] > uncoupled_probe.sigma_z[0]


def test_probe_linear_response():
    space = SpaceDescriptor(12, True)
    H = path_hamiltonian(PathPoint(0.0, W, W), space)
    ground = spectrum(H, 1).states[0]
    heights = [probe_spectrum(ground, H, ProbeSettings(C.TWO_PI * f, C.PROBE_TAU, (W,))).depletion[0]
               for f in (5.0, 50.0)]
    assert heights[1] / heights[0] == pytest.approx(100.0, rel=0.02)


def test_probe_finds_both_gaps_at_finite_r():
    space = SpaceDescriptor(14, True)
    H = path_hamiltonian(PathPoint(0.3, W, W), space)
    es = spectrum(H, 3)
    gaps = es.gaps()[1:3]
    grid = tuple(C.TWO_PI * np.linspace(2000, 8000, 121))
    res = probe_spectrum(es.states[0], H, ProbeSettings(C.PROBE_OMEGA_P, C.PROBE_TAU, grid))
    found = res.omega_eff[res.peaks()]
    for gap in gaps:
        assert np.min(np.abs(found - gap)) <= C.TWO_PI * 200


def test_lindblad_without_noise_matches_unitary():
    space = SpaceDescriptor(6, True)
    H = path_hamiltonian(PathPoint(0.4, W, W), space)
    psi = StateVector(space, np.eye(space.dim)[1])
    t = 1e-4
    rho = lindblad_propagate(constant(H), psi.to_density(), NoiseModel(), [0.0, t])[-1]
    ref = propagate(constant(H), psi, [0.0, t])[-1]
    assert np.max(np.abs(rho.mat - ref.projector())) < 1e-7


def test_dephasing_rate_of_fock_coherence():
    space = SpaceDescriptor(3)
    _, _, n = ladder_operators(space)
    H = n * W
    vec = np.zeros(4, dtype=complex)
    vec[[0, 2]] = 1 / math.sqrt(2)
    tau_d = 1e-3
    t = 5e-4
    rho = lindblad_propagate(constant(H), StateVector(space, vec).to_density(),
                             NoiseModel(tau_d), [0.0, t])[-1]
    # coherence between n=0 and n=2 decays at (2-0)^2 / tau_d
    assert abs(rho.mat[0, 2]) == pytest.approx(0.5 * math.exp(-4 * t / tau_d), rel=1e-6)
    assert abs(np.trace(rho.mat) - 1) < 1e-12


def test_dephased_quench_is_a_state_with_reduced_coherence():
    g = 0.543 * WB
    rho = dephased_linear_quench(g, WB, tau_d=C.TAU_D, spin=DOWN, n_cut=12)
    evals = np.linalg.eigvalsh(rho.mat)
    assert evals.min() > -1e-10
    assert abs(np.trace(rho.mat) - 1) < 1e-10
    _, minus = ideal_ground_states(rho.space, g, WB)
    f = np.vdot(minus.vec, rho.mat @ minus.vec).real
    assert 0.5 < f < 0.99


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(0.0)
