import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyrabi import constants as C
from susyrabi.exceptions import DimensionMismatch, NotCommuting
from susyrabi.hilbert import SIGMA_X, SIGMA_Z, SpaceDescriptor, anticommutator, embed
from susyrabi.qrm import QrmParams, qrm_hamiltonian, spectrum
from susyrabi.susy import (
    SusyKind,
    SusyPoint,
    ideal_ground_states,
    supercharge,
    transformed_frame_supercharge,
    uncoupled_supercharge,
    witten_data,
    witten_index,
    witten_parity,
)

W = C.OMEGA_BROKEN
SPACE = SpaceDescriptor(40, True)


def broken_h(space, g, omega=W):
    return qrm_hamiltonian(QrmParams(0.0, omega, g), space)


@given(st.floats(0.1, 1.0))
def test_anticommutator_closure(ratio):
    g = ratio * W
    Q = supercharge(SPACE, g, W).Q
    gap = anticommutator(Q, Q) - broken_h(SPACE, g) * (2 / W)
    assert np.max(np.abs(gap.restricted())) <= 1e-5


@given(st.floats(0.1, 1.0))
def test_frame_consistency(ratio):
    g = ratio * W
    direct = supercharge(SPACE, g, W).Q
    framed = transformed_frame_supercharge(SPACE, g, W)
    assert np.max(np.abs((direct - framed).restricted())) <= 1e-6


def test_supercharge_hermitian_and_anticommutes_with_k():
    sc = supercharge(SPACE, 0.573 * W, W, internal_cut=80)
    assert sc.Q.hermiticity_error() < 1e-12
    K = embed(SIGMA_X, None, SPACE)
    assert np.max(np.abs(anticommutator(sc.Q, K).mat)) < 1e-12


def test_spectral_pairing_lowest_levels():
    g = 0.573 * W
    H = broken_h(SPACE, g)
    Q = supercharge(SPACE, g, W, internal_cut=120).Q
    es = spectrum(H, 6)
    for e, phi in zip(es.energies, es.states):
        q_phi = Q.mat @ phi.vec
        assert np.linalg.norm(q_phi) > 0.5
        resid = H.mat @ q_phi - e * q_phi
        assert np.linalg.norm(resid) <= 1e-6 * W


def test_cat_eigenvalues():
    g = 0.573 * W
    plus, minus = ideal_ground_states(SPACE, g, W)
    Q = supercharge(SPACE, g, W, internal_cut=80).Q
    for psi, expected in ((minus, 1 / np.sqrt(2)), (plus, -1 / np.sqrt(2))):
        q_psi = Q @ psi
        assert np.vdot(psi.vec, q_psi).real == pytest.approx(expected, abs=1e-4)
        assert np.linalg.norm(q_psi - expected * psi.vec) < 1e-4


def test_cats_are_degenerate_ground_states():
    g = 0.573 * W
    H = broken_h(SPACE, g)
    for psi in ideal_ground_states(SPACE, g, W):
        e = np.vdot(psi.vec, H @ psi).real
        assert e == pytest.approx(W / 2, rel=1e-9)


def test_k_swaps_cats():
    plus, minus = ideal_ground_states(SPACE, 0.573 * W, W)
    K = embed(SIGMA_X, None, SPACE)
    assert abs(abs(np.vdot(minus.vec, K @ plus)) - 1) < 1e-12
    assert abs(np.vdot(plus.vec, K @ plus)) < 1e-12


def test_witten_indices():
    space = SpaceDescriptor(30, True)
    assert witten_data(SusyPoint(SusyKind.UNCOUPLED, W), space).index == 1
    assert witten_data(SusyPoint(SusyKind.BROKEN, W, 0.573 * W), space).index == 0


def test_uncoupled_algebra():
    space = SpaceDescriptor(20, True)
    point = SusyPoint(SusyKind.UNCOUPLED, W)
    Q = uncoupled_supercharge(space)
    H = point.hamiltonian(space)
    # H = omega Q^2 away from the truncation edge
    assert np.max(np.abs((Q @ Q * W - H).restricted())) < 1e-9 * W
    K = witten_parity(point, space)
    assert np.max(np.abs(anticommutator(Q, K).mat)) < 1e-12


def test_witten_index_rejects_noncommuting_parity():
    space = SpaceDescriptor(10, True)
    H = broken_h(space, 0.5 * W)
    with pytest.raises(NotCommuting):
        witten_index(H, embed(SIGMA_Z, None, space), 1e-6 * W)


def test_supercharge_needs_spin():
    with pytest.raises(DimensionMismatch):
        supercharge(SpaceDescriptor(10), 0.5 * W, W)


def test_point_validation():
    with pytest.raises(ValueError):
        SusyPoint(SusyKind.BROKEN, W, 0.0)
    with pytest.raises(ValueError):
        SusyPoint(SusyKind.UNCOUPLED, W, 1.0)
