"""Partial spin-phonon state tomography.

Measurement records are blue/red sideband flops after a phonon displacement
``D(beta_j)``, with spin coherences removed by a sigma_z gate on half the
shots. The spin-diagonal blocks ``(rho_uu, rho_dd)`` are reconstructed by
maximum likelihood over a Cholesky parameterization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import constants as C
from ._validation import check_counts
from .exceptions import DimensionMismatch, NonConvergence
from .hilbert import (
    SIGMA_Z,
    BlockDensity,
    SpaceDescriptor,
    StateVector,
    displacement_op,
    rotation_op,
)
from .measurement import Sideband, sideband_weights
from .susy import supercharge

P_CLIP = 1e-9


class SpinAxis(str, enum.Enum):
    Z = "Z"
    Y = "Y"


# maps |+y> -> |up>, |-y> -> |down>
_Y_TO_Z = np.array([[1, -1j], [1, 1j]], dtype=complex) / np.sqrt(2)


def displacement_grid(beta, N):
    """``beta_j = i beta exp(2 pi i j / N)`` for j = 0 .. N-1."""
    if N < 1:
        raise ValueError("N must be >= 1")
    j = np.arange(N)
    return 1j * beta * np.exp(2j * np.pi * j / N)


def dephase_spin(rho, spin_axis=SpinAxis.Z) -> BlockDensity:
    """Spin-diagonal blocks of ``rho`` in the Z basis or, after rotating, the Y basis."""
    if isinstance(rho, StateVector):
        rho = rho.to_density()
    if not rho.space.with_spin:
        raise DimensionMismatch("dephase_spin needs a spin x phonon state")
    mat = rho.mat
    if SpinAxis(spin_axis) is SpinAxis.Y:
        u = np.kron(_Y_TO_Z, np.eye(rho.space.n_fock))
        mat = u @ mat @ u.conj().T
    z = np.kron(SIGMA_Z, np.eye(rho.space.n_fock))
    mat = 0.5 * (mat + z @ mat @ z)
    k = rho.space.n_fock
    return BlockDensity(mat[:k, :k], mat[k:, k:], check=False)


def rotate_blocks(blocks: BlockDensity, theta) -> BlockDensity:
    """Conjugate both blocks by ``R(theta) = exp(i theta a^dag a)``."""
    r = rotation_op(SpaceDescriptor(blocks.n_cut), theta).mat
    return blocks.conjugate(r)


def population_outside(blocks: BlockDensity, n_cut) -> float:
    pu, pd = blocks.populations()
    return float(pu[n_cut + 1:].sum() + pd[n_cut + 1:].sum())


def _default_t_grid(Omega, n_points=20, periods=2.0):
    return tuple(np.linspace(0.0, periods * C.TWO_PI / Omega, n_points))


@dataclass(frozen=True)
class TomographySettings:
    beta: float = C.TOMO_BETA
    N: int = C.TOMO_N
    n_cut_fit: int = C.TOMO_NCUT_FIT
    n_cut_sim: int = 20
    spin_axis: SpinAxis = SpinAxis.Z
    Omega: float = C.SIDEBAND_OMEGA
    t_grid: tuple = field(default=None)
    shots_per_point: int = C.TOMO_SHOTS
    gamma0: float = 0.0
    gamma_exponent: float = C.GAMMA_EXPONENT

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("N must be >= 3")
        if self.n_cut_fit < 1 or self.n_cut_sim < self.n_cut_fit:
            raise ValueError("need 1 <= n_cut_fit <= n_cut_sim")
        if self.shots_per_point % 2:
            raise ValueError("shots_per_point must be even (half with a sigma_z gate)")
        object.__setattr__(self, "spin_axis", SpinAxis(self.spin_axis))
        if self.t_grid is None:
            object.__setattr__(self, "t_grid", _default_t_grid(self.Omega))
        else:
            object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))

    def displacements(self):
        return displacement_grid(self.beta, self.N)


@dataclass(frozen=True)
class ShotTable:
    """Columnar measurement records.

    One row per (displacement j, sideband, time index, sigma_z gate). ``up``
    holds integer spin-up counts, or expected counts ``shots * p`` for an
    exact-probability table.
    """

    j: np.ndarray
    sideband: np.ndarray
    t_index: np.ndarray
    sz_gate: np.ndarray
    shots: np.ndarray
    up: np.ndarray
    settings: TomographySettings
    seed: int | None = None
    exact: bool = False

    def __post_init__(self):
        check_counts(self.shots, self.up)

    def __len__(self):
        return len(self.j)

    @property
    def t(self):
        return np.asarray(self.settings.t_grid)[self.t_index]

    def frequencies(self):
        return self.up / self.shots

    def with_counts(self, up, exact=False) -> ShotTable:
        return replace(self, up=np.asarray(up), exact=exact)

    def aggregated(self):
        """Sum counts over the sigma_z-gate halves: ``(keys, shots, up)``."""
        sb = (self.sideband == Sideband.RED.value).astype(int)
        key = (self.j * 2 + sb) * len(self.settings.t_grid) + self.t_index
        uniq, inv = np.unique(key, return_inverse=True)
        shots = np.bincount(inv, weights=self.shots)
        up = np.bincount(inv, weights=self.up)
        nt = len(self.settings.t_grid)
        t_idx = uniq % nt
        rest = uniq // nt
        return (rest // 2, np.where(rest % 2 == 1, "red", "blue"), t_idx), shots, up


def _record_layout(settings):
    nt = len(settings.t_grid)
    j, sb, ti, gate = np.meshgrid(np.arange(settings.N), np.arange(2), np.arange(nt),
                                  np.array([False, True]), indexing="ij")
    names = np.where(sb.ravel() == 1, Sideband.RED.value, Sideband.BLUE.value)
    return j.ravel(), names, ti.ravel(), gate.ravel()


def _sim_blocks(state, settings):
    if isinstance(state, BlockDensity):
        blocks = state
    else:
        blocks = dephase_spin(state, settings.spin_axis)
    if blocks.n_cut < settings.n_cut_sim:
        blocks = blocks.padded(settings.n_cut_sim)
    return blocks


def model_probabilities(blocks: BlockDensity, settings: TomographySettings, thetas=None):
    """Exact ``p_up`` for every (j, sideband, t) as an array of shape (N, 2, n_t)."""
    ph = SpaceDescriptor(blocks.n_cut)
    nt = len(settings.t_grid)
    out = np.empty((settings.N, 2, nt))
    for j, bj in enumerate(settings.displacements()):
        b = blocks
        if thetas is not None:
            b = b.conjugate(rotation_op(ph, thetas[j]).mat)
        b = b.conjugate(displacement_op(ph, bj).mat)
        pu, pd = b.populations()
        for s, sb in enumerate((Sideband.BLUE, Sideband.RED)):
            w_up, w_dn = sideband_weights(sb, settings.Omega, settings.t_grid, len(pu),
                                          settings.gamma0, settings.gamma_exponent)
            out[j, s] = 0.5 + w_up @ pu + w_dn @ pd
    return np.clip(out, 0.0, 1.0)


def simulate_shots(state, settings: TomographySettings, thetas=None, seed=None,
                   exact=False) -> ShotTable:
    """Synthetic sideband records for ``state`` (StateVector, DensityMatrix or BlockDensity).

    ``thetas[j]`` applies a phonon rotation before displacement ``j``, modelling
    trap-frequency drift. With ``exact=True`` the table stores expected counts.
    """
    blocks = _sim_blocks(state, settings)
    p = model_probabilities(blocks, settings, thetas)
    j, names, ti, gate = _record_layout(settings)
    sb = (names == Sideband.RED.value).astype(int)
    p_rec = p[j, sb, ti]
    half = settings.shots_per_point // 2
    shots = np.full(len(j), half, dtype=np.int64)
    if exact:
        up = shots * p_rec
    else:
        rng = np.random.default_rng(seed)
        up = rng.binomial(shots, p_rec)
    return ShotTable(j, names, ti, gate, shots, up, settings, seed, exact)


def _chol_to_blocks(x, k):
    """Unpack real parameters into lower-triangular ``T_u``, ``T_d`` (real diagonals)."""
    il = np.tril_indices(k, -1)
    n_off = len(il[0])
    ts = []
    pos = 0
    for _ in range(2):
        t = np.zeros((k, k), dtype=complex)
        t[np.diag_indices(k)] = x[pos:pos + k]
        pos += k
        t[il] = x[pos:pos + n_off] + 1j * x[pos + n_off:pos + 2 * n_off]
        pos += 2 * n_off
        ts.append(t)
    return ts


def _blocks_to_params(ts):
    k = ts[0].shape[0]
    il = np.tril_indices(k, -1)
    parts = []
    for t in ts:
        parts += [t[np.diag_indices(k)].real, t[il].real, t[il].imag]
    return np.concatenate(parts)


def _grad_to_params(gs):
    k = gs[0].shape[0]
    il = np.tril_indices(k, -1)
    parts = []
    for g in gs:
        parts += [g[np.diag_indices(k)].real, g[il].real, g[il].imag]
    return np.concatenate(parts)


def _psd_factor(rho, floor=1e-6):
    """Lower-triangular ``T`` with ``T T^dag`` close to ``rho`` (regularized)."""
    k = rho.shape[0]
    rho = 0.5 * (rho + rho.conj().T) + floor * np.eye(k)
    return np.linalg.cholesky(rho)


class BlockTomography(BaseEstimator):
    """Maximum-likelihood reconstruction of spin-diagonal blocks from a ShotTable.

    Each block is ``T T^dag / Z`` with ``T`` lower triangular and ``Z`` the
    joint trace; the binomial log-likelihood is maximized by L-BFGS on its
    analytic gradient, starting from maximally mixed blocks.

    Parameters
    ----------
    n_cut_fit : int or None
        Reconstruction cutoff; defaults to the table's settings.
    max_iter : int
        Iteration cap.
    tol : float
        Relative log-likelihood improvement regarded as converged.
    """

    def __init__(self, n_cut_fit=None, max_iter=5000, tol=1e-9):
        self.n_cut_fit = n_cut_fit
        self.max_iter = max_iter
        self.tol = tol

    def _design(self, table: ShotTable):
        s = table.settings
        k_fit = (self.n_cut_fit or s.n_cut_fit) + 1
        (jj, sbs, ti), shots, up = table.aggregated()
        ph = SpaceDescriptor(s.n_cut_sim)
        disp = [displacement_op(ph, b).mat[:, :k_fit] for b in s.displacements()]
        weights = {}
        for sb in (Sideband.BLUE, Sideband.RED):
            weights[sb.value] = sideband_weights(sb, s.Omega, s.t_grid, ph.n_fock,
                                                 s.gamma0, s.gamma_exponent)
        m_up = np.empty((len(jj), k_fit, k_fit), dtype=complex)
        m_dn = np.empty_like(m_up)
        for r, (j, sb, t) in enumerate(zip(jj, sbs, ti)):
            d = disp[j]
            w_up, w_dn = weights[sb]
            # tr(M rho) with M = D^dag W D cropped to the fit space
            m_up[r] = (d.conj().T * w_up[t]) @ d
            m_dn[r] = (d.conj().T * w_dn[t]) @ d
        return k_fit, m_up, m_dn, shots, up

    def _objective(self, k, m_up, m_dn, shots, up):
        # tr(M rho) = sum_ij M_ij rho_ji
        mu = m_up.reshape(len(shots), -1)
        md = m_dn.reshape(len(shots), -1)
        # offset by the saturated log-likelihood so the objective is a deviance near 0
        fr = np.clip(up / shots, P_CLIP, 1 - P_CLIP)
        ll_sat = float(np.sum(up * np.log(fr) + (shots - up) * np.log1p(-fr)))

        def f(x):
            tu, td = _chol_to_blocks(x, k)
            ru, rd = tu @ tu.conj().T, td @ td.conj().T
            z = np.trace(ru).real + np.trace(rd).real
            ru, rd = ru / z, rd / z
            p = 0.5 + (mu @ ru.T.ravel()).real + (md @ rd.T.ravel()).real
            pc = np.clip(p, P_CLIP, 1 - P_CLIP)
            ll = float(np.sum(up * np.log(pc) + (shots - up) * np.log1p(-pc)))
            s = up / pc - (shots - up) / (1 - pc)
            gu = (s @ mu).reshape(k, k)
            gd = (s @ md).reshape(k, k)
            gu = 0.5 * (gu + gu.conj().T)
            gd = 0.5 * (gd + gd.conj().T)
            lam = np.trace(gu @ ru).real + np.trace(gd @ rd).real
            eye = np.eye(k)
            grads = [np.tril(2 * (gu - lam * eye) @ tu / z), np.tril(2 * (gd - lam * eye) @ td / z)]
            return ll_sat - ll, -_grad_to_params(grads)

        f.ll_sat = ll_sat
        return f

    def fit(self, table: ShotTable, init: BlockDensity | None = None):
        k, m_up, m_dn, shots, up = self._design(table)
        f = self._objective(k, m_up, m_dn, shots, up)
        if init is None:
            t0 = np.eye(k, dtype=complex) / math.sqrt(2 * k)
            x0 = _blocks_to_params([t0, t0])
        else:
            x0 = _blocks_to_params([_psd_factor(init.rho_uu), _psd_factor(init.rho_dd)])
        history = [f.ll_sat - f(x0)[0]]

        def record(xk):
            history.append(f.ll_sat - f(xk)[0])

        res = minimize(f, x0, jac=True, method="L-BFGS-B", callback=record,
                       options={"maxiter": self.max_iter, "ftol": self.tol, "gtol": 1e-12,
                                "maxcor": 30, "maxls": 50})
        if res.nit >= self.max_iter and not res.success:
            raise NonConvergence(f"MLE did not converge in {self.max_iter} iterations: {res.message}")
        tu, td = _chol_to_blocks(res.x, k)
        ru, rd = tu @ tu.conj().T, td @ td.conj().T
        z = np.trace(ru).real + np.trace(rd).real
        self.blocks_ = BlockDensity(ru / z, rd / z, check=False)
        self.log_likelihood_ = f.ll_sat - float(res.fun)
        self.history_ = np.array(history)
        self.n_iter_ = int(res.nit)
        self.converged_ = bool(res.success)
        self.message_ = str(res.message)
        return self

    def predict(self, table: ShotTable):
        """Model spin-up probability for every (aggregated) record of ``table``."""
        check_is_fitted(self, "blocks_")
        k, m_up, m_dn, _, _ = self._design(table)
        ru, rd = self.blocks_.rho_uu, self.blocks_.rho_dd
        p = 0.5 + np.einsum("rij,ji->r", m_up, ru).real + np.einsum("rij,ji->r", m_dn, rd).real
        return np.clip(p, 0, 1)

    def score(self, table: ShotTable):
        """Binomial log-likelihood of ``table`` under the fitted blocks."""
        p = np.clip(self.predict(table), P_CLIP, 1 - P_CLIP)
        _, shots, up = table.aggregated()
        return float(np.sum(up * np.log(p) + (shots - up) * np.log1p(-p)))


def mle_reconstruct(table: ShotTable, settings: TomographySettings | None = None) -> BlockDensity:
    est = BlockTomography(n_cut_fit=settings.n_cut_fit if settings else None)
    return est.fit(table).blocks_


def _phonon_supercharge_blocks(n_cut, g, omega, internal_cut=None):
    internal = internal_cut or max(40, 4 * n_cut)
    sc = supercharge(SpaceDescriptor(n_cut, True), g, omega, internal_cut=internal)
    return sc.A.mat, sc.B.mat


def supercharge_expectation(blocks_z: BlockDensity, blocks_y: BlockDensity, g, omega):
    """``(<sz (x) A>, <sy (x) B>, <Q>)`` from Z- and Y-basis blocks."""
    if blocks_z.n_cut != blocks_y.n_cut:
        raise DimensionMismatch("Z and Y blocks must share a cutoff")
    A, B = _phonon_supercharge_blocks(blocks_z.n_cut, g, omega)
    sz_a = float(np.trace(blocks_z.difference() @ A).real)
    sy_b = float(np.trace(blocks_y.difference() @ B).real)
    return sz_a, sy_b, sz_a + sy_b


def _psd_sqrt(m):
    e, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(e, 0, None))) @ v.conj().T


def block_fidelity(a: BlockDensity, b: BlockDensity) -> float:
    """Uhlmann fidelity of the two block-diagonal joint states."""
    if a.rho_uu.shape != b.rho_uu.shape:
        raise DimensionMismatch("blocks have different cutoffs")
    root = 0.0
    for x, y in ((a.rho_uu, b.rho_uu), (a.rho_dd, b.rho_dd)):
        root += np.linalg.svd(_psd_sqrt(x) @ _psd_sqrt(y), compute_uv=False).sum()
    return float(min(1.0, root ** 2))


@dataclass(frozen=True)
class Calibration:
    theta_star: float
    theta_q: float
    theta_grid: np.ndarray
    fidelity_z: np.ndarray
    fidelity_y: np.ndarray
    q_values: np.ndarray | None


def calibrate_rotation(blocks_z, blocks_y, ideal_z, ideal_y, theta_grid=None, g=None,
                       omega=None) -> Calibration:
    """Phonon rotation maximizing the average Z/Y fidelity against the ideal blocks.

    When ``g`` and ``omega`` are given the maximizer of ``|Q|`` is reported as
    well; the fidelity maximizer is the one to use downstream.
    """
    if theta_grid is None:
        theta_grid = np.linspace(0, C.TWO_PI, 720, endpoint=False)
    theta_grid = np.asarray(theta_grid, dtype=float)
    fz = np.array([block_fidelity(rotate_blocks(blocks_z, th), ideal_z) for th in theta_grid])
    fy = np.array([block_fidelity(rotate_blocks(blocks_y, th), ideal_y) for th in theta_grid])
    theta_star = float(theta_grid[np.argmax(0.5 * (fz + fy))])
    qs, theta_q = None, float("nan")
    if g is not None and omega is not None:
        qs = np.array([supercharge_expectation(rotate_blocks(blocks_z, th),
                                               rotate_blocks(blocks_y, th), g, omega)[2]
                       for th in theta_grid])
        theta_q = float(theta_grid[np.argmax(np.abs(qs))])
    return Calibration(theta_star, theta_q, theta_grid, fz, fy, qs)


@dataclass
class ReconstructionResult:
    blocks_z: BlockDensity
    blocks_y: BlockDensity
    Q_value: float
    sz_A: float
    sy_B: float
    fidelity_z: float
    fidelity_y: float
    theta_star: float
    errors: dict = field(default_factory=dict)

    def to_record(self):
        from .io import blocks_to_json_obj

        return {
            "Q_value": self.Q_value,
            "sz_A": self.sz_A,
            "sy_B": self.sy_B,
            "fidelity_z": self.fidelity_z,
            "fidelity_y": self.fidelity_y,
            "theta_star": self.theta_star,
            "errors": dict(self.errors),
            "blocks_z": blocks_to_json_obj(self.blocks_z),
            "blocks_y": blocks_to_json_obj(self.blocks_y),
        }


def _evaluate(blocks_z, blocks_y, theta, g, omega, ideal_z=None, ideal_y=None):
    bz, by = rotate_blocks(blocks_z, theta), rotate_blocks(blocks_y, theta)
    sz_a, sy_b, q = supercharge_expectation(bz, by, g, omega)
    fz = block_fidelity(bz, ideal_z) if ideal_z is not None else float("nan")
    fy = block_fidelity(by, ideal_y) if ideal_y is not None else float("nan")
    return bz, by, {"Q_value": q, "sz_A": sz_a, "sy_B": sy_b, "fidelity_z": fz, "fidelity_y": fy}


def reconstruct(table_z: ShotTable, table_y: ShotTable, g, omega, ideal=None,
                theta_star: float | None = None, calibrate=False) -> ReconstructionResult:
    """MLE in both bases, optional rotation calibration, supercharge and fidelities.

    ``ideal`` is the reference state (StateVector or DensityMatrix); its blocks
    are cropped to the reconstruction cutoff.
    """
    n_fit = table_z.settings.n_cut_fit
    bz = BlockTomography().fit(table_z).blocks_
    by = BlockTomography().fit(table_y).blocks_
    iz = iy = None
    if ideal is not None:
        iz = dephase_spin(ideal, SpinAxis.Z).cropped(n_fit)
        iy = dephase_spin(ideal, SpinAxis.Y).cropped(n_fit)
    if theta_star is None:
        theta_star = calibrate_rotation(bz, by, iz, iy).theta_star if (calibrate and ideal is not None) else 0.0
    rz, ry, vals = _evaluate(bz, by, theta_star, g, omega, iz, iy)
    return ReconstructionResult(rz, ry, theta_star=theta_star, **vals)


def _resample(table: ShotTable, rng) -> ShotTable:
    p = np.clip(table.frequencies(), 0.0, 1.0)
    n = np.asarray(np.rint(table.shots), dtype=np.int64)
    return table.with_counts(rng.binomial(n, p))


def monte_carlo_errors(table_z: ShotTable, table_y: ShotTable, reps: int, seed, g, omega,
                       theta_star=0.0, ideal=None) -> dict:
    """Standard deviations of every result field over binomially resampled tables.

    Replicate ``i`` draws from its own stream spawned off ``seed`` (an int or a
    SeedSequence), so results do not depend on evaluation order. ``theta_star`` stays fixed across replicates.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    n_fit = table_z.settings.n_cut_fit
    iz = iy = None
    if ideal is not None:
        iz = dephase_spin(ideal, SpinAxis.Z).cropped(n_fit)
        iy = dephase_spin(ideal, SpinAxis.Y).cropped(n_fit)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(reps)
    rows = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        tz, ty = _resample(table_z, rng), _resample(table_y, rng)
        bz = BlockTomography().fit(tz).blocks_
        by = BlockTomography().fit(ty).blocks_
        rows.append(_evaluate(bz, by, theta_star, g, omega, iz, iy)[2])
    # fidelities are undefined without an ideal state; leave them out
    keys = [k for k in rows[0] if not all(math.isnan(r[k]) for r in rows)]
    return {k: float(np.std([r[k] for r in rows], ddof=1)) for k in keys}
