"""Quantum Rabi model Hamiltonians, parity and parity-resolved spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .exceptions import DimensionMismatch, NotHermitian, TruncationError
from .hilbert import (
    SIGMA_X,
    SIGMA_Z,
    Operator,
    SpaceDescriptor,
    StateVector,
    embed,
    ladder_operators,
    max_abs,
    phonon_function,
)


@dataclass(frozen=True)
class QrmParams:
    """``H = (omega_s/2) sz + omega (n + 1/2) + g sx (a + a^dag) [+ g^2/omega]``."""

    omega_s: float
    omega: float
    g: float
    include_renorm: bool = True

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if self.omega_s < 0:
            raise ValueError(f"omega_s must be non-negative, got {self.omega_s}")


@dataclass(frozen=True)
class PathPoint:
    """Point ``r`` on the path joining the two supersymmetric points."""

    r: float
    g_m: float
    omega: float

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [0, 1], got {self.r}")

    def to_params(self) -> QrmParams:
        return QrmParams(omega_s=(1 - self.r) * self.omega, omega=self.omega,
                         g=self.r * self.g_m, include_renorm=True)


@dataclass(frozen=True)
class Eigensystem:
    energies: np.ndarray
    states: list = field(repr=False)
    parities: np.ndarray

    def gaps(self):
        return self.energies - self.energies[0]


def _require_joint(space):
    if not space.with_spin:
        raise DimensionMismatch("QRM operators live on the spin x phonon space")


def qrm_terms(space: SpaceDescriptor):
    """The building blocks ``(sz/2, n + 1/2, sx (a + a^dag))`` on the joint space."""
    _require_joint(space)
    ph = space.phonon()
    a, adag, _ = ladder_operators(ph)
    half_sz = embed(SIGMA_Z / 2, None, space)
    osc = embed(None, phonon_function(ph, lambda n: n + 0.5))
    coupling = embed(SIGMA_X, a + adag)
    return half_sz, osc, coupling


def qrm_hamiltonian(params: QrmParams, space: SpaceDescriptor) -> Operator:
    half_sz, osc, coupling = qrm_terms(space)
    h = params.omega_s * half_sz + params.omega * osc + params.g * coupling
    if params.include_renorm:
        h = h + (params.g ** 2 / params.omega) * Operator.identity(space)
    return h


def path_hamiltonian(p: PathPoint, space: SpaceDescriptor) -> Operator:
    return qrm_hamiltonian(p.to_params(), space)


def parity_diag(space: SpaceDescriptor):
    _require_joint(space)
    ph = (-1.0) ** np.arange(space.n_fock)
    return np.concatenate([ph, -ph])


def parity_op(space: SpaceDescriptor) -> Operator:
    """``sigma_z exp(i pi a^dag a)``, diagonal in the product Fock basis."""
    return Operator(space, np.diag(parity_diag(space)).astype(complex))


def _fix_phase(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)


def _sector_eigh(mat, indices, dim):
    e, v = np.linalg.eigh(mat[np.ix_(indices, indices)])
    full = np.zeros((dim, len(indices)), dtype=complex)
    full[indices, :] = v
    return e, full


def spectrum(H: Operator, k: int | None = None, parity: int | None = None) -> Eigensystem:
    """Lowest ``k`` eigenpairs of ``H``, optionally restricted to one parity sector.

    When ``H`` commutes with parity the diagonalization is done sector by sector
    so every returned state is a parity eigenstate even inside degenerate levels.
    """
    herm = H.hermiticity_error()
    if herm > C.SPECTRUM_HERMITIAN_TOL:
        raise NotHermitian(f"||H - H^dag||_max = {herm:.2e}")
    dim = H.space.dim
    k = dim if k is None else int(k)
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")
    mat = 0.5 * (H.mat + H.mat.conj().T)

    pdiag = parity_diag(H.space) if H.space.with_spin else None
    commutes = pdiag is not None and max_abs(mat * (pdiag[:, None] - pdiag[None, :])) <= C.SPECTRUM_HERMITIAN_TOL * max(1.0, max_abs(mat))

    if parity is not None:
        if parity not in (1, -1):
            raise ValueError("parity must be +1 or -1")
        if not commutes:
            raise ValueError("H does not commute with parity; sector restriction undefined")
        sectors = [parity]
    elif commutes:
        sectors = [1, -1]
    else:
        sectors = []

    if sectors:
        es, vs, ps = [], [], []
        for s in sectors:
            idx = np.flatnonzero(pdiag == s)
            e, v = _sector_eigh(mat, idx, dim)
            es.append(e)
            vs.append(v)
            ps.append(np.full(len(e), s))
        e = np.concatenate(es)
        v = np.concatenate(vs, axis=1)
        p = np.concatenate(ps)
        order = np.argsort(e, kind="stable")
        e, v, p = e[order], v[:, order], p[order]
    else:
        e, v = np.linalg.eigh(mat)
        p = np.zeros(len(e), dtype=int)

    k = min(k, len(e))
    e, v, p = e[:k], _fix_phase(v[:, :k]), p[:k]
    states = [StateVector(H.space, v[:, i], normalize=True) for i in range(k)]
    return Eigensystem(energies=e, states=states, parities=p.astype(int))


def converged_spectrum(params: QrmParams, k: int, n_cut: int = 40) -> Eigensystem:
    """Spectrum at ``n_cut``, verified against ``2 n_cut`` to ``CONVERGENCE_REL * omega``."""
    lo = spectrum(qrm_hamiltonian(params, SpaceDescriptor(n_cut, True)), k)
    hi = spectrum(qrm_hamiltonian(params, SpaceDescriptor(2 * n_cut, True)), k)
    dev = float(np.max(np.abs(lo.energies - hi.energies)))
    if dev > C.CONVERGENCE_REL * params.omega:
        raise TruncationError(
            f"spectrum not converged at n_cut={n_cut}: shift {dev / params.omega:.2e} omega"
        )
    return lo


def degenerate(e1, e2, omega, rel=C.DEGENERACY_REL):
    return abs(e1 - e2) <= rel * omega


@dataclass(frozen=True)
class GapRow:
    r: float
    gap1: float
    gap2: float


def gap_table(omega: float, g_m: float, r_grid, n_cut: int = 40) -> list[GapRow]:
    """Gaps ``E1 - E0`` and ``E2 - E0`` (rad/s) along the path, one row per ``r``."""
    rows = []
    for r in r_grid:
        es = converged_spectrum(PathPoint(float(r), g_m, omega).to_params(), 3, n_cut)
        g = es.gaps()
        rows.append(GapRow(float(r), float(g[1]), float(g[2])))
    return rows
