"""Truncated Fock-space and spin operator algebra.

Spin convention: ``|up> = (1, 0)``, ``|down> = (0, 1)``, so that
``sigma_z = diag(1, -1)`` and ``sigma_x |+-> = +-|+->`` with
``|+-> = (|up> +- |down>) / sqrt(2)``. On the joint space the spin factor
is the left Kronecker factor: index ``s * (n_cut + 1) + n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import constants as C
from .exceptions import DimensionMismatch, TruncationError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SPIN_I = np.eye(2, dtype=complex)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
PLUS = (UP + DOWN) / np.sqrt(2)
MINUS = (UP - DOWN) / np.sqrt(2)

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS, SPIN_I,
           UP, DOWN, PLUS, MINUS):
    _m.flags.writeable = False


def _frozen(arr, dtype=complex):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def max_abs(m):
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


@dataclass(frozen=True)
class SpaceDescriptor:
    """Phonon-only or spin x phonon space truncated at Fock level ``n_cut``."""

    n_cut: int
    with_spin: bool = False

    def __post_init__(self):
        if int(self.n_cut) != self.n_cut or self.n_cut < 1:
            raise ValueError(f"n_cut must be an integer >= 1, got {self.n_cut}")

    @property
    def n_fock(self):
        return self.n_cut + 1

    @property
    def dim(self):
        return 2 * self.n_fock if self.with_spin else self.n_fock

    def phonon(self):
        return SpaceDescriptor(self.n_cut, False)

    def joint(self):
        return SpaceDescriptor(self.n_cut, True)

    def safe_indices(self):
        """Basis indices with Fock level <= n_cut // 2 (the truncation-safe subspace)."""
        levels = np.arange(self.n_cut // 2 + 1)
        if not self.with_spin:
            return levels
        return np.concatenate([levels, levels + self.n_fock])


def _check_same(sa, sb):
    if sa != sb:
        raise DimensionMismatch(f"space mismatch: {sa} vs {sb}")


class Operator:
    """Dense square matrix tagged with the space it acts on. Immutable."""

    __slots__ = ("space", "mat")
    __array_priority__ = 100

    def __init__(self, space: SpaceDescriptor, mat):
        mat = _frozen(mat)
        if mat.shape != (space.dim, space.dim):
            raise DimensionMismatch(
                f"matrix shape {mat.shape} does not match dimension {space.dim}"
            )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "mat", mat)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    def __repr__(self):
        return f"Operator({self.space}, dim={self.space.dim})"

    @classmethod
    def identity(cls, space):
        return cls(space, np.eye(space.dim))

    def dag(self):
        return Operator(self.space, self.mat.conj().T)

    def hermiticity_error(self):
        return max_abs(self.mat - self.mat.conj().T)

    def unitarity_error(self):
        return max_abs(self.mat.conj().T @ self.mat - np.eye(self.space.dim))

    def is_hermitian(self, tol=C.HERMITIAN_TOL):
        return self.hermiticity_error() <= tol

    def restricted(self, indices=None):
        """Submatrix on ``indices`` (default: the truncation-safe subspace)."""
        if indices is None:
            indices = self.space.safe_indices()
        return self.mat[np.ix_(indices, indices)]

    def trace(self):
        return complex(np.trace(self.mat))

    def _coerce(self, other):
        if isinstance(other, Operator):
            _check_same(self.space, other.space)
            return other.mat
        return None

    def __add__(self, other):
        m = self._coerce(other)
        if m is None:
            return NotImplemented
        return Operator(self.space, self.mat + m)

    def __sub__(self, other):
        m = self._coerce(other)
        if m is None:
            return NotImplemented
        return Operator(self.space, self.mat - m)

    def __neg__(self):
        return Operator(self.space, -self.mat)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.space, self.mat * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.space, self.mat / scalar)
        return NotImplemented

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_same(self.space, other.space)
            return Operator(self.space, self.mat @ other.mat)
        if isinstance(other, StateVector):
            _check_same(self.space, other.space)
            return self.mat @ other.vec
        return NotImplemented


def commutator(x: Operator, y: Operator) -> Operator:
    return x @ y - y @ x


def anticommutator(x: Operator, y: Operator) -> Operator:
    return x @ y + y @ x


class StateVector:
    """Normalized pure state. Construction validates the norm."""

    __slots__ = ("space", "vec")

    def __init__(self, space: SpaceDescriptor, amplitudes, normalize=False):
        vec = np.array(amplitudes, dtype=complex, copy=True).reshape(-1)
        if vec.shape != (space.dim,):
            raise DimensionMismatch(
                f"state length {vec.shape[0]} does not match dimension {space.dim}"
            )
        nrm = np.linalg.norm(vec)
        if normalize:
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            vec = vec / nrm
        elif abs(nrm - 1.0) > C.NORM_TOL:
            raise ValueError(f"state is not normalized (norm={nrm!r})")
        vec.flags.writeable = False
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "vec", vec)

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable")

    def __repr__(self):
        return f"StateVector({self.space})"

    def overlap(self, other: StateVector) -> complex:
        _check_same(self.space, other.space)
        return complex(np.vdot(self.vec, other.vec))

    def fidelity(self, other: StateVector) -> float:
        return abs(self.overlap(other)) ** 2

    def projector(self):
        return np.outer(self.vec, self.vec.conj())

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(self.space, self.projector())


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on a space."""

    __slots__ = ("space", "mat")

    def __init__(self, space: SpaceDescriptor, mat, check=True):
        mat = _frozen(mat)
        if mat.shape != (space.dim, space.dim):
            raise DimensionMismatch(
                f"matrix shape {mat.shape} does not match dimension {space.dim}"
            )
        if check:
            herm = max_abs(mat - mat.conj().T)
            if herm > C.HERMITIAN_TOL:
                raise ValueError(f"density matrix not Hermitian ({herm:.2e})")
            tr = np.trace(mat).real
            if abs(tr - 1.0) > C.HERMITIAN_TOL:
                raise ValueError(f"density matrix trace is {tr!r}")
            lo = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min()
            if lo < C.PSD_FLOOR:
                raise ValueError(f"density matrix has eigenvalue {lo:.3e}")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "mat", mat)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    def __repr__(self):
        return f"DensityMatrix({self.space})"

    def spin_block(self, s, t):
        """Phonon operator rho_st with s, t in {0: up, 1: down}."""
        if not self.space.with_spin:
            raise DimensionMismatch("spin blocks need a spin x phonon space")
        k = self.space.n_fock
        return self.mat[s * k:(s + 1) * k, t * k:(t + 1) * k]


@lru_cache(maxsize=64)
def _ladder(n_cut):
    a = np.diag(np.sqrt(np.arange(1, n_cut + 1, dtype=float)), 1).astype(complex)
    a.flags.writeable = False
    return a


def ladder_operators(space: SpaceDescriptor):
    """Return ``(a, a_dag, n)`` on a phonon-only space."""
    if space.with_spin:
        raise DimensionMismatch("ladder operators live on the phonon-only space")
    a = _ladder(space.n_cut)
    return (Operator(space, a), Operator(space, a.conj().T),
            Operator(space, np.diag(np.arange(space.n_fock)).astype(complex)))


def number_diag(space: SpaceDescriptor):
    return np.arange(space.n_fock, dtype=float)


def phonon_function(space: SpaceDescriptor, f) -> Operator:
    """Diagonal functional calculus ``f(a^dag a)`` in the Fock basis."""
    if space.with_spin:
        raise DimensionMismatch("phonon_function acts on the phonon-only space")
    return Operator(space, np.diag(f(number_diag(space))).astype(complex))


def rotation_op(space: SpaceDescriptor, theta) -> Operator:
    """Phonon rotation ``exp(i theta a^dag a)``."""
    return phonon_function(space, lambda n: np.exp(1j * theta * n))


def displacement_op(space: SpaceDescriptor, beta, check=True) -> Operator:
    """Displacement ``D(beta) = exp(beta a^dag - beta* a)`` via dense expm.

    Raises :class:`TruncationError` when ``<0|D(beta)|0>`` departs from
    ``exp(-|beta|^2 / 2)`` by more than ``TRUNCATION_TOL``.
    """
    if space.with_spin:
        raise DimensionMismatch("displacement_op acts on the phonon-only space")
    beta = complex(beta)
    a = _ladder(space.n_cut)
    gen = beta * a.conj().T - np.conj(beta) * a
    d = scipy.linalg.expm(gen)
    if check:
        dev = abs(d[0, 0] - np.exp(-abs(beta) ** 2 / 2))
        if dev > C.TRUNCATION_TOL:
            raise TruncationError(
                f"n_cut={space.n_cut} too small for |beta|={abs(beta):.3f} "
                f"(vacuum overlap off by {dev:.2e})"
            )
    return Operator(space, d)


def coherent_amplitudes(n_cut, beta):
    """Unnormalized-by-truncation Fock amplitudes of ``|beta>``."""
    beta = complex(beta)
    c = np.empty(n_cut + 1, dtype=complex)
    c[0] = np.exp(-abs(beta) ** 2 / 2)
    for n in range(1, n_cut + 1):
        c[n] = c[n - 1] * beta / np.sqrt(n)
    return c


def coherent_state(space: SpaceDescriptor, beta) -> StateVector:
    if space.with_spin:
        raise DimensionMismatch("coherent_state lives on the phonon-only space")
    c = coherent_amplitudes(space.n_cut, beta)
    nrm2 = float(np.sum(np.abs(c) ** 2))
    if nrm2 < 1 - C.COHERENT_NORM_TOL:
        raise TruncationError(
            f"coherent state |{beta}> loses {1 - nrm2:.2e} of its norm at n_cut={space.n_cut}"
        )
    return StateVector(space, c, normalize=True)


def fock_state(space: SpaceDescriptor, n, spin=None) -> StateVector:
    """``|n>`` on a phonon space, or ``|spin>|n>`` with ``spin`` a 2-vector."""
    ph = np.zeros(space.n_fock, dtype=complex)
    ph[n] = 1.0
    if space.with_spin:
        if spin is None:
            raise ValueError("spin component required on a joint space")
        return StateVector(space, np.kron(spin, ph), normalize=True)
    return StateVector(space, ph)


def product_state(spin, phonon: StateVector) -> StateVector:
    space = phonon.space.joint()
    return StateVector(space, np.kron(np.asarray(spin, dtype=complex), phonon.vec), normalize=True)


def cat_state(space: SpaceDescriptor, beta, sign) -> StateVector:
    """``(|+>|-beta> + sign |->|beta>) / sqrt(2)`` on the joint space."""
    ph = space.phonon()
    minus_b = coherent_state(ph, -beta).vec
    plus_b = coherent_state(ph, beta).vec
    vec = (np.kron(PLUS, minus_b) + sign * np.kron(MINUS, plus_b)) / np.sqrt(2)
    return StateVector(space.joint(), vec, normalize=True)


def embed(spin_op=None, phonon_op=None, space: SpaceDescriptor | None = None) -> Operator:
    """Kronecker embedding ``spin_op (x) phonon_op`` onto the joint space.

    Either factor may be None, meaning identity; ``space`` is then required
    when ``phonon_op`` is None.
    """
    if phonon_op is None:
        if space is None:
            raise ValueError("space is required when phonon_op is the identity")
        ph_space = space.phonon()
        ph = np.eye(ph_space.dim, dtype=complex)
    else:
        if not isinstance(phonon_op, Operator) or phonon_op.space.with_spin:
            raise DimensionMismatch("phonon factor must be a phonon-only Operator")
        ph_space = phonon_op.space
        if space is not None:
            _check_same(space.phonon(), ph_space)
        ph = phonon_op.mat
    sp = SPIN_I if spin_op is None else np.asarray(spin_op, dtype=complex)
    if sp.shape != (2, 2):
        raise DimensionMismatch(f"spin factor must be 2x2, got {sp.shape}")
    return Operator(ph_space.joint(), np.kron(sp, ph))


def expectation(state, obs: Operator) -> complex:
    """``<psi|O|psi>`` or ``tr(rho O)``."""
    if isinstance(state, StateVector):
        _check_same(state.space, obs.space)
        return complex(np.vdot(state.vec, obs.mat @ state.vec))
    if isinstance(state, DensityMatrix):
        _check_same(state.space, obs.space)
        return complex(np.trace(state.mat @ obs.mat))
    raise TypeError(f"unsupported state type {type(state).__name__}")


class BlockDensity:
    """Spin-diagonal joint state ``|up><up| (x) rho_uu + |down><down| (x) rho_dd``."""

    __slots__ = ("rho_uu", "rho_dd")

    def __init__(self, rho_uu, rho_dd, check=True):
        uu = _frozen(rho_uu)
        dd = _frozen(rho_dd)
        if uu.shape != dd.shape or uu.ndim != 2 or uu.shape[0] != uu.shape[1]:
            raise DimensionMismatch(f"block shapes {uu.shape} and {dd.shape} differ")
        if check:
            for blk in (uu, dd):
                if max_abs(blk - blk.conj().T) > C.HERMITIAN_TOL:
                    raise ValueError("block is not Hermitian")
                if np.linalg.eigvalsh(blk).min() < C.PSD_FLOOR:
                    raise ValueError("block is not positive semidefinite")
            tr = np.trace(uu).real + np.trace(dd).real
            if abs(tr - 1) > C.TRACE_GUARD:
                raise ValueError(f"blocks have total trace {tr!r}")
        object.__setattr__(self, "rho_uu", uu)
        object.__setattr__(self, "rho_dd", dd)

    def __setattr__(self, name, value):
        raise AttributeError("BlockDensity is immutable")

    def __repr__(self):
        return f"BlockDensity(n_cut={self.n_cut})"

    @property
    def n_cut(self):
        return self.rho_uu.shape[0] - 1

    @property
    def space(self):
        return SpaceDescriptor(self.n_cut, True)

    def populations(self):
        """Diagonals ``(P_up[n], P_down[n])``."""
        return np.diag(self.rho_uu).real.copy(), np.diag(self.rho_dd).real.copy()

    def difference(self):
        return self.rho_uu - self.rho_dd

    def joint(self) -> DensityMatrix:
        z = np.zeros_like(self.rho_uu)
        return DensityMatrix(self.space, np.block([[self.rho_uu, z], [z, self.rho_dd]]), check=False)

    def conjugate(self, u):
        """Apply the phonon unitary ``u`` to both blocks."""
        return BlockDensity(u @ self.rho_uu @ u.conj().T, u @ self.rho_dd @ u.conj().T, check=False)

    def padded(self, n_cut):
        """Embed into a larger Fock space by zero padding."""
        k = self.n_cut + 1
        if n_cut + 1 < k:
            raise ValueError("cannot pad to a smaller cutoff")
        uu = np.zeros((n_cut + 1, n_cut + 1), dtype=complex)
        dd = np.zeros_like(uu)
        uu[:k, :k] = self.rho_uu
        dd[:k, :k] = self.rho_dd
        return BlockDensity(uu, dd, check=False)

    def cropped(self, n_cut):
        k = n_cut + 1
        return BlockDensity(self.rho_uu[:k, :k], self.rho_dd[:k, :k], check=False)

    @classmethod
    def maximally_mixed(cls, n_cut):
        k = n_cut + 1
        eye = np.eye(k, dtype=complex) / (2 * k)
        return cls(eye, eye)

    @classmethod
    def product(cls, spin_up_prob, rho_ph):
        rho_ph = np.asarray(rho_ph, dtype=complex)
        return cls(spin_up_prob * rho_ph, (1 - spin_up_prob) * rho_ph)
