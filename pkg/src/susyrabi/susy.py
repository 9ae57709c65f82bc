"""Supersymmetric structure of the Rabi model at its two SUSY points."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import constants as C
from .exceptions import DimensionMismatch, NotCommuting
from .hilbert import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    Operator,
    SpaceDescriptor,
    StateVector,
    cat_state,
    commutator,
    displacement_op,
    embed,
    ladder_operators,
    max_abs,
    phonon_function,
)
from .qrm import QrmParams, qrm_hamiltonian


class SusyKind(enum.Enum):
    UNCOUPLED = "uncoupled"
    BROKEN = "broken"


@dataclass(frozen=True)
class SusyPoint:
    """``UNCOUPLED``: g = 0, omega_s = omega. ``BROKEN``: omega_s = 0, g > 0."""

    kind: SusyKind
    omega: float
    g: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.kind is SusyKind.UNCOUPLED and self.g != 0:
            raise ValueError("the uncoupled point has g = 0")
        if self.kind is SusyKind.BROKEN and not self.g > 0:
            raise ValueError("the broken point needs g > 0")

    @property
    def params(self) -> QrmParams:
        if self.kind is SusyKind.UNCOUPLED:
            return QrmParams(omega_s=self.omega, omega=self.omega, g=0.0)
        return QrmParams(omega_s=0.0, omega=self.omega, g=self.g)

    @property
    def bosonic_parity(self) -> int:
        """Eigenvalue of ``K`` labelling bosonic states.

        At the uncoupled point ``K = sigma_z`` and ``|down>|n>`` are taken as
        bosonic, so bosons carry ``K = -1``.
        """
        return -1 if self.kind is SusyKind.UNCOUPLED else 1

    def hamiltonian(self, space) -> Operator:
        return qrm_hamiltonian(self.params, space)


class Supercharge(NamedTuple):
    Q: Operator
    A: Operator
    B: Operator


def _require_joint(space):
    if not space.with_spin:
        raise DimensionMismatch("SUSY operators live on the spin x phonon space")


def gauge_transform(space: SpaceDescriptor, g, omega) -> Operator:
    """``U_g = [[V_-, -V_+], [V_-, V_+]] / sqrt(2)`` in the (up, down) block layout."""
    _require_joint(space)
    ph = space.phonon()
    vp = displacement_op(ph, g / omega).mat
    vm = displacement_op(ph, -g / omega).mat
    return Operator(space, np.block([[vm, -vp], [vm, vp]]) / np.sqrt(2))


def supercharge(space: SpaceDescriptor, g, omega, internal_cut: int | None = None) -> Supercharge:
    """Dimensionless supercharge ``Q = sz (x) A + sy (x) B`` at the broken point.

    ``A = -(X + X^dag)/2`` and ``B = -i (X - X^dag)/2`` with
    ``X = V_+ sqrt(n + 1/2) V_+``. With ``internal_cut`` the operators are built
    on a larger Fock space and cropped, which keeps every retained matrix
    element free of truncation error.
    """
    _require_joint(space)
    build = space.phonon()
    if internal_cut is not None:
        if internal_cut < space.n_cut:
            raise ValueError("internal_cut must be >= n_cut")
        build = SpaceDescriptor(internal_cut)
    vp = displacement_op(build, g / omega).mat
    root = phonon_function(build, lambda n: np.sqrt(n + 0.5)).mat
    x = vp @ root @ vp
    k = space.n_fock
    a_mat = (-0.5 * (x + x.conj().T))[:k, :k]
    b_mat = (-0.5j * (x - x.conj().T))[:k, :k]
    ph = space.phonon()
    A = Operator(ph, a_mat)
    B = Operator(ph, b_mat)
    return Supercharge(embed(SIGMA_Z, A) + embed(SIGMA_Y, B), A, B)


def transformed_frame_supercharge(space: SpaceDescriptor, g, omega) -> Operator:
    """``U_g (sx (x) sqrt(n + 1/2)) U_g^dag``: the same supercharge built through the gauge frame."""
    u = gauge_transform(space, g, omega)
    core = embed(SIGMA_X, phonon_function(space.phonon(), lambda n: np.sqrt(n + 0.5)))
    return u @ core @ u.dag()


def uncoupled_supercharge(space: SpaceDescriptor) -> Operator:
    """``a sigma_+ + a^dag sigma_-``, the dimensionless supercharge at g = 0."""
    _require_joint(space)
    a, adag, _ = ladder_operators(space.phonon())
    return embed(SIGMA_PLUS, a) + embed(SIGMA_MINUS, adag)


def witten_parity(point: SusyPoint, space: SpaceDescriptor) -> Operator:
    _require_joint(space)
    spin = SIGMA_Z if point.kind is SusyKind.UNCOUPLED else SIGMA_X
    return embed(spin, None, space)


def ideal_ground_states(space: SpaceDescriptor, g, omega) -> tuple[StateVector, StateVector]:
    """Cat states ``psi_+-`` = ``(|+>|-b> +- |->|b>)/sqrt(2)`` with ``b = g/omega``."""
    beta = g / omega
    joint = space.joint()
    return cat_state(joint, beta, +1), cat_state(joint, beta, -1)


def witten_index(H: Operator, K: Operator, zero_tol: float, bosonic_parity: int = 1) -> int:
    """Number of zero-energy bosonic states minus zero-energy fermionic states."""
    scale = max(1.0, max_abs(H.mat))
    if max_abs(commutator(H, K).mat) > 1e-9 * scale:
        raise NotCommuting("[H, K] != 0")
    e, v = np.linalg.eigh(0.5 * (H.mat + H.mat.conj().T))
    zero = np.abs(e) <= zero_tol
    if not zero.any():
        return 0
    vz = v[:, zero]
    # diagonalize K inside the zero-energy eigenspace
    k_sub = vz.conj().T @ K.mat @ vz
    kev = np.linalg.eigvalsh(0.5 * (k_sub + k_sub.conj().T))
    signs = np.sign(np.round(kev))
    return int(bosonic_parity * signs.sum())


@dataclass(frozen=True)
class WittenData:
    K: Operator
    Q: Operator
    index: int


def witten_data(point: SusyPoint, space: SpaceDescriptor) -> WittenData:
    K = witten_parity(point, space)
    if point.kind is SusyKind.UNCOUPLED:
        Q = uncoupled_supercharge(space)
    else:
        Q = supercharge(space, point.g, point.omega).Q
    H = point.hamiltonian(space)
    idx = witten_index(H, K, C.DEGENERACY_REL * point.omega, point.bosonic_parity)
    return WittenData(K=K, Q=Q, index=idx)
