import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyrabi import constants as C
from susyrabi.exceptions import DimensionMismatch
from susyrabi.hilbert import BlockDensity, SpaceDescriptor, StateVector, coherent_state, product_state, UP
from susyrabi.io import blocks_from_json_obj, blocks_to_json_obj, dumps_json, read_shot_table, shot_table_csv
from susyrabi.susy import ideal_ground_states
from susyrabi.tomography import (
    BlockTomography,
    SpinAxis,
    TomographySettings,
    block_fidelity,
    calibrate_rotation,
    dephase_spin,
    displacement_grid,
    monte_carlo_errors,
    population_outside,
    reconstruct,
    rotate_blocks,
    simulate_shots,
    supercharge_expectation,
)

W = C.OMEGA_BROKEN
G = 0.543 * W
SIM = SpaceDescriptor(20, True)
SZ = TomographySettings()
SY = TomographySettings(spin_axis=SpinAxis.Y)


@pytest.fixture(scope="module")
def cats():
    return ideal_ground_states(SIM, G, W)


def thermal_blocks(n_bar, p_up, n_cut=20):
    q = n_bar / (1 + n_bar)
    p = (1 - q) * q ** np.arange(n_cut + 1)
    return BlockDensity.product(p_up, np.diag(p / p.sum()))


def _round_trip(state_or_blocks):
    blocks = state_or_blocks if isinstance(state_or_blocks, BlockDensity) else dephase_spin(state_or_blocks)
    table = simulate_shots(blocks, SZ, exact=True)
    est = BlockTomography().fit(table)
    return block_fidelity(est.blocks_, blocks.cropped(SZ.n_cut_fit)), est


@pytest.mark.parametrize("name", ["cat", "vacuum", "coherent", "thermal"])
def test_round_trip_exact_tables(name, cats):
    ph = SIM.phonon()
    states = {
        "cat": cats[1],
        "vacuum": product_state(np.array([0.6, 0.8]), coherent_state(ph, 0.0)),
        "coherent": product_state(UP, coherent_state(ph, 0.5 + 0.3j)),
        "thermal": thermal_blocks(0.3, 0.35),
    }
    fid, est = _round_trip(states[name])
    assert fid >= 0.999
    assert est.converged_


def test_likelihood_monotone_on_noisy_data(cats):
    table = simulate_shots(cats[0], SZ, seed=5)
    est = BlockTomography().fit(table)
    h = est.history_
    assert np.all(np.diff(h) >= -1e-9 * np.abs(h[:-1]))
    assert est.log_likelihood_ == pytest.approx(est.score(table), rel=1e-9)


def test_estimator_params_roundtrip():
    est = BlockTomography(n_cut_fit=5, tol=1e-8)
    assert est.get_params() == {"n_cut_fit": 5, "max_iter": 5000, "tol": 1e-8}


@given(st.floats(-np.pi, np.pi))
def test_rotation_inverse(theta):
    b = thermal_blocks(0.5, 0.4, 8)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    b = BlockDensity(b.rho_uu + 1e-3 * (x + x.conj().T), b.rho_dd, check=False)
    back = rotate_blocks(rotate_blocks(b, theta), -theta)
    assert np.max(np.abs(back.rho_uu - b.rho_uu)) <= 1e-10
    assert np.max(np.abs(back.rho_dd - b.rho_dd)) <= 1e-10


def test_supercharge_zero_on_balanced_blocks():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = x @ x.conj().T
    rho /= 2 * np.trace(rho).real
    b = BlockDensity(rho, rho)
    assert supercharge_expectation(b, b, G, W) == pytest.approx((0, 0, 0), abs=1e-14)


def test_supercharge_linear_in_blocks(cats):
    z = [dephase_spin(c, SpinAxis.Z).cropped(7) for c in cats]
    y = [dephase_spin(c, SpinAxis.Y).cropped(7) for c in cats]
    mix = lambda a, b, w: BlockDensity(w * a.rho_uu + (1 - w) * b.rho_uu,
                                       w * a.rho_dd + (1 - w) * b.rho_dd, check=False)
    w = 0.3
    q_mix = supercharge_expectation(mix(z[0], z[1], w), mix(y[0], y[1], w), G, W)[2]
    q0 = supercharge_expectation(z[0], y[0], G, W)[2]
    q1 = supercharge_expectation(z[1], y[1], G, W)[2]
    assert q_mix == pytest.approx(w * q0 + (1 - w) * q1, abs=1e-12)


def test_ideal_q_values_and_symmetries(cats):
    plus, minus = cats
    q = {}
    for label, psi in (("plus", plus), ("minus", minus)):
        q[label] = supercharge_expectation(dephase_spin(psi, SpinAxis.Z).cropped(7),
                                           dephase_spin(psi, SpinAxis.Y).cropped(7), G, W)[2]
    assert q["minus"] == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    assert q["plus"] == pytest.approx(-q["minus"], abs=1e-12)
    phased = StateVector(SIM, np.exp(0.7j) * minus.vec)
    q_phased = supercharge_expectation(dephase_spin(phased, SpinAxis.Z).cropped(7),
                                       dephase_spin(phased, SpinAxis.Y).cropped(7), G, W)[2]
    assert q_phased == pytest.approx(q["minus"], abs=1e-12)


def test_reference_settings_truncation_is_safe(cats):
    for c in cats:
        assert population_outside(dephase_spin(c), 7) < 1e-8


def test_displacement_grid():
    b = displacement_grid(0.687, 12)
    assert b[0] == pytest.approx(0.687j)
    assert np.allclose(np.abs(b), 0.687)


def test_calibration_undoes_known_rotation(cats):
    theta = C.TWO_PI * 500 * 200e-6
    iz = dephase_spin(cats[1], SpinAxis.Z).cropped(7)
    iy = dephase_spin(cats[1], SpinAxis.Y).cropped(7)
    cal = calibrate_rotation(rotate_blocks(iz, theta), rotate_blocks(iy, theta), iz, iy, g=G, omega=W)
    grid_step = C.TWO_PI / 720
    assert abs((cal.theta_star + theta) % C.TWO_PI) <= grid_step or \
        abs((cal.theta_star + theta) % C.TWO_PI - C.TWO_PI) <= grid_step
    assert np.isfinite(cal.theta_q)


def test_reconstruct_exact_and_noisy(cats):
    minus = cats[1]
    exact = reconstruct(simulate_shots(minus, SZ, exact=True), simulate_shots(minus, SY, exact=True),
                        G, W, ideal=minus)
    assert exact.Q_value == pytest.approx(1 / np.sqrt(2), abs=0.002)
    assert min(exact.fidelity_z, exact.fidelity_y) >= 0.999
    noisy = reconstruct(simulate_shots(minus, SZ, seed=1), simulate_shots(minus, SY, seed=2),
                        G, W, ideal=minus)
    assert noisy.Q_value == pytest.approx(1 / np.sqrt(2), abs=0.1)
    assert noisy.fidelity_z > 0.9


def test_monte_carlo_is_order_independent(cats):
    tz = simulate_shots(cats[0], SZ, seed=3)
    ty = simulate_shots(cats[0], SY, seed=4)
    a = monte_carlo_errors(tz, ty, 3, 9, G, W)
    b = monte_carlo_errors(tz, ty, 3, np.random.SeedSequence(9), G, W)
    assert a == b
    assert a["Q_value"] > 0
    with pytest.raises(ValueError):
        monte_carlo_errors(tz, ty, 1, 9, G, W)


def test_shot_table_csv_round_trip(tmp_path, cats):
    table = simulate_shots(cats[0], SZ, seed=8)
    path = tmp_path / "shots.csv"
    path.write_text(shot_table_csv(table))
    back = read_shot_table(path, SZ)
    for col in ("j", "t_index", "sz_gate", "shots", "up"):
        np.testing.assert_array_equal(getattr(back, col), getattr(table, col))
    np.testing.assert_array_equal(back.sideband, table.sideband)
    assert shot_table_csv(back) == shot_table_csv(table)


def test_simulation_is_seed_deterministic(cats):
    a = simulate_shots(cats[0], SZ, seed=42)
    b = simulate_shots(cats[0], SZ, seed=42)
    assert shot_table_csv(a) == shot_table_csv(b)
    assert len(a) == SZ.N * 2 * len(SZ.t_grid) * 2
    assert np.all(a.shots == SZ.shots_per_point // 2)


def test_block_json_round_trip(cats):
    b = dephase_spin(cats[0]).cropped(7)
    obj = blocks_to_json_obj(b)
    assert obj["dim"] == 8
    back = blocks_from_json_obj(obj)
    np.testing.assert_array_equal(back.rho_uu, b.rho_uu)
    assert dumps_json(obj) == dumps_json(blocks_to_json_obj(back))


def test_fidelity_shape_check():
    with pytest.raises(DimensionMismatch):
        block_fidelity(BlockDensity.maximally_mixed(3), BlockDensity.maximally_mixed(4))


def test_settings_validation():
    with pytest.raises(ValueError):
        TomographySettings(shots_per_point=401)
    with pytest.raises(ValueError):
        TomographySettings(n_cut_fit=25)
