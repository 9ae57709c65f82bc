import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyrabi.exceptions import DimensionMismatch, TruncationError
from susyrabi.hilbert import (
    DOWN,
    SIGMA_X,
    SIGMA_Z,
    UP,
    BlockDensity,
    DensityMatrix,
    Operator,
    SpaceDescriptor,
    StateVector,
    cat_state,
    coherent_state,
    commutator,
    displacement_op,
    embed,
    expectation,
    fock_state,
    ladder_operators,
    rotation_op,
)

cutoffs = st.integers(min_value=8, max_value=30)


@st.composite
def beta_and_cut(draw):
    n_cut = draw(cutoffs)
    r = draw(st.floats(0.0, 1.0)) * np.sqrt(n_cut / 4)
    phi = draw(st.floats(0.0, 2 * np.pi))
    return r * np.exp(1j * phi), n_cut


@given(beta_and_cut())
def test_displacement_unitary_on_safe_half(bc):
    beta, n_cut = bc
    D = displacement_op(SpaceDescriptor(n_cut), beta)
    err = D.dag() @ D - Operator.identity(D.space)
    assert np.max(np.abs(err.restricted())) <= 1e-6


@given(cutoffs)
def test_canonical_commutator_below_boundary(n_cut):
    a, adag, _ = ladder_operators(SpaceDescriptor(n_cut))
    c = (adag @ a - a @ adag).mat
    assert np.allclose(c[:n_cut, :n_cut], -np.eye(n_cut), atol=1e-12)
    # the truncation boundary breaks the identity in the last row
    assert abs(c[n_cut, n_cut] - n_cut) < 1e-12


@given(st.integers(30, 60), st.floats(0.0, 1.0), st.floats(0.0, 2 * np.pi))
def test_coherent_state_matches_displaced_vacuum(n_cut, frac, phi):
    # both vectors are cut at n_cut, so agreement to 1e-8 needs the tail well inside
    beta = frac * np.sqrt(n_cut / 8) * np.exp(1j * phi)
    space = SpaceDescriptor(n_cut)
    via_d = displacement_op(space, beta) @ fock_state(space, 0)
    np.testing.assert_allclose(coherent_state(space, beta).vec, via_d, atol=1e-8)


@given(st.integers(0, 2 ** 32 - 1))
def test_expectation_linear_and_conjugate_symmetric(seed):
    rng = np.random.default_rng(seed)
    space = SpaceDescriptor(5, True)
    psi = StateVector(space, rng.normal(size=12) + 1j * rng.normal(size=12), normalize=True)
    o1 = Operator(space, rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    o2 = Operator(space, rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    c = 0.3 - 1.2j
    lhs = expectation(psi, o1 + o2 * c)
    assert abs(lhs - (expectation(psi, o1) + c * expectation(psi, o2))) < 1e-10
    assert abs(expectation(psi, o1.dag()) - np.conj(expectation(psi, o1))) < 1e-10
    rho = psi.to_density()
    assert abs(expectation(rho, o1) - expectation(psi, o1)) < 1e-10


def test_coherent_state_too_large_for_cutoff():
    with pytest.raises(TruncationError):
        coherent_state(SpaceDescriptor(6), 3.0)
    with pytest.raises(TruncationError):
        displacement_op(SpaceDescriptor(6), 3.0)


def test_mixed_spaces_rejected():
    a = Operator.identity(SpaceDescriptor(4))
    b = Operator.identity(SpaceDescriptor(5))
    with pytest.raises(DimensionMismatch):
        a @ b
    with pytest.raises(DimensionMismatch):
        a + Operator.identity(SpaceDescriptor(4, True))
    with pytest.raises(DimensionMismatch):
        StateVector(SpaceDescriptor(4), np.ones(3), normalize=True)


def test_values_are_immutable():
    op = Operator.identity(SpaceDescriptor(3))
    with pytest.raises(AttributeError):
        op.mat = np.zeros((4, 4))
    with pytest.raises(ValueError):
        op.mat[0, 0] = 2.0


def test_unnormalized_state_rejected():
    with pytest.raises(ValueError):
        StateVector(SpaceDescriptor(2), [1.0, 1.0, 0.0])


def test_embedding_is_spin_left_kronecker():
    space = SpaceDescriptor(3, True)
    a, _, n = ladder_operators(space.phonon())
    op = embed(SIGMA_Z, n)
    np.testing.assert_allclose(np.diag(op.mat).real, [0, 1, 2, 3, 0, -1, -2, -3])
    psi = fock_state(space, 2, spin=DOWN)
    assert psi.vec[space.n_fock + 2] == 1
    assert expectation(psi, embed(SIGMA_Z, None, space)).real == -1


def test_cat_state_is_normalized_and_spin_balanced():
    space = SpaceDescriptor(20, True)
    psi = cat_state(space, 0.57, +1)
    assert abs(np.linalg.norm(psi.vec) - 1) < 1e-12
    # sigma_x expectation vanishes for the symmetric superposition
    assert abs(expectation(psi, embed(SIGMA_X, None, space))) < 1e-12


def test_rotation_and_commutator_helpers():
    space = SpaceDescriptor(6)
    r = rotation_op(space, 0.4)
    assert r.unitarity_error() < 1e-14
    _, _, n = ladder_operators(space)
    assert np.max(np.abs(commutator(r, n).mat)) < 1e-14


def test_density_validation_and_blocks():
    space = SpaceDescriptor(2, True)
    with pytest.raises(ValueError):
        DensityMatrix(space, 2 * np.eye(6) / 6)
    rho = fock_state(space, 1, spin=UP).to_density()
    assert rho.spin_block(0, 0)[1, 1] == 1
    b = BlockDensity.maximally_mixed(3)
    pu, pd = b.populations()
    assert abs(pu.sum() + pd.sum() - 1) < 1e-14
    assert b.padded(6).cropped(3).rho_uu.shape == (4, 4)
    with pytest.raises(ValueError):
        BlockDensity(np.eye(2), np.eye(2))
