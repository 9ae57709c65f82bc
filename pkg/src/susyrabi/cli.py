"""Command-line front end.

    susyrabi run <experiment> [--config path.toml] [--seed N] [--out dir]
                              [--set key=value ...] [--shots exact|N]

Each experiment reads one flat table of the TOML config (``[spectrum]``,
``[tomography]``, ...). Every parameter has a baked-in default, so a bare
``run <experiment>`` reproduces the reference parameter set. Frequencies are
given in Hz (keys ending in ``_hz``) and converted to rad/s in ``_resolve``
only. Outputs are CSV/JSON files plus ``manifest.json``.

Exit codes: 0 ok, 1 compute failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import platform
import sys
from pathlib import Path

import numpy as np
import scipy
import sklearn

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from . import constants as C
from . import io as sio
from .dynamics import ProbeSettings, QuenchSchedule, adiabatic_ground_state, dephased_linear_quench, probe_spectrum
from .exceptions import ConfigInvalid
from .hilbert import DOWN, UP, SpaceDescriptor
from .measurement import SdfSettings, energy_expectation, coupling_from_slope, measure_energy
from .qrm import PathPoint, gap_table, path_hamiltonian, spectrum
from .susy import ideal_ground_states
from .tomography import (
    SpinAxis,
    TomographySettings,
    dephase_spin,
    monte_carlo_errors,
    reconstruct,
    rotate_blocks,
    simulate_shots,
    supercharge_expectation,
)

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2

R_GRID_SPECTRUM = [round(0.1 * i, 10) for i in range(9)]
R_GRID_ADIABAT = [round(0.1 * i, 10) for i in range(10)]

DEFAULTS = {
    "spectrum": {
        "omega_hz": 5730.0, "g_m_hz": 5730.0, "r_grid": R_GRID_SPECTRUM, "n_cut": 40,
    },
    "probe": {
        "omega_hz": 5730.0, "g_m_hz": 5730.0, "r": 0.0, "Omega_p_hz": 170.0, "tau_s": 1e-3,
        "f_min_hz": 2000.0, "f_max_hz": 8000.0, "n_freq": 121, "n_cut": 20,
    },
    "adiabat": {
        "omega_hz": 5730.0, "g_m_hz": 5730.0, "r_grid": R_GRID_ADIABAT, "T_s": 40e-6,
        "tau_s": 400e-6, "linear_omega_hz": 10000.0, "linear_g_m_hz": 5730.0,
        "linear_tau_s": 200e-6, "n_cut": 12,
    },
    "energy": {
        "omega_hz": 10000.0, "g_m_hz": 5730.0, "Omega_b_hz": 10000.0, "Omega_p_hz": 8100.0,
        "n_fit": 8, "n_cut": 20, "shots": "exact", "seed": 0,
        "published_n_bar": [0.47, 0.42], "published_slopes": [-25.5e3, -32.3e3],
    },
    "tomography": {
        "omega_hz": 10000.0, "g_m_hz": 5430.0, "beta": C.TOMO_BETA, "N": C.TOMO_N,
        "n_cut_fit": C.TOMO_NCUT_FIT, "n_cut_sim": 20, "Omega_hz": 10000.0, "n_t": 20,
        "periods": 2.0, "shots": C.TOMO_SHOTS, "seed": 0, "mc_reps": 30, "calibrate": False,
    },
    "drift-study": {
        "omega_hz": 10000.0, "g_m_hz": 5430.0, "drift_hz": 500.0, "drift_time_s": 200e-6,
        "n_cut": 20,
    },
    "dephasing-study": {
        "omega_hz": 10000.0, "g_m_hz": 5430.0, "tau_d_s": C.TAU_D, "tau_s": 200e-6, "n_cut": 16,
    },
}

FIGURES = {
    "spectrum": "Fig. 2a",
    "probe": "Fig. 2c/d",
    "adiabat": "no figure: adiabatic state preparation error",
    "energy": "Fig. 3",
    "tomography": "Fig. 4",
    "drift-study": "error budget: trap-frequency drift, supercharges about +-0.52",
    "dephasing-study": "error budget: motional dephasing, supercharges about +-0.66",
}


def _is_stochastic(experiment, cfg):
    return experiment in ("energy", "tomography") and cfg.get("shots") != "exact"


def _coerce(key, value, default):
    if key == "shots":
        if value == "exact":
            return value
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            raise ConfigInvalid("shots must be 'exact' or a positive integer")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigInvalid(f"{key} must be true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigInvalid(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigInvalid(f"{key} must be a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigInvalid(f"{key} must be a list of numbers")
        return [float(v) for v in value]
    return value


def _parse_set(item):
    if "=" not in item:
        raise ConfigInvalid(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value


def build_config(experiment, config_path=None, sets=(), seed=None, shots=None) -> dict:
    """Merge defaults, the experiment's config table and overrides; validate."""
    if experiment not in DEFAULTS:
        raise ConfigInvalid(f"unknown experiment {experiment!r}; choose from {sorted(DEFAULTS)}")
    defaults = DEFAULTS[experiment]
    cfg = dict(defaults)
    overrides = {}
    if config_path is not None:
        try:
            with open(config_path, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {config_path}: {exc}") from exc
        table = doc.get(experiment, {})
        if not isinstance(table, dict):
            raise ConfigInvalid(f"[{experiment}] must be a table")
        overrides.update(table)
        if "seed" in doc and "seed" in defaults and not isinstance(doc["seed"], dict):
            overrides.setdefault("seed", doc["seed"])
    for item in sets:
        k, v = _parse_set(item)
        overrides[k] = v
    if shots is not None:
        overrides["shots"] = "exact" if shots == "exact" else _parse_set(f"shots={shots}")[1]
    if seed is not None:
        overrides["seed"] = seed
    for k, v in overrides.items():
        if k not in defaults:
            raise ConfigInvalid(f"unknown key {k!r} for experiment {experiment}")
        cfg[k] = _coerce(k, v, defaults[k])
    _validate(experiment, cfg)
    return cfg


def _validate(experiment, cfg):
    for k, v in cfg.items():
        if k.endswith("_hz") and not v > 0:
            raise ConfigInvalid(f"{k} must be positive")
        if k.endswith("_s") and not v > 0:
            raise ConfigInvalid(f"{k} must be positive")
        if k in ("n_cut", "n_cut_fit", "n_cut_sim", "n_fit", "N", "n_t", "n_freq") and v < 1:
            raise ConfigInvalid(f"{k} must be >= 1")
    for k in ("r", "r_grid"):
        rs = cfg.get(k)
        if rs is None:
            continue
        rs = rs if isinstance(rs, list) else [rs]
        if not rs or any(not 0.0 <= r <= 1.0 for r in rs):
            raise ConfigInvalid(f"{k} entries must lie in [0, 1]")
    if "seed" in cfg and (isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int)
                          or cfg["seed"] < 0):
        raise ConfigInvalid("seed must be a non-negative integer")
    if _is_stochastic(experiment, cfg) and "seed" not in cfg:
        raise ConfigInvalid("stochastic experiment needs a seed")
    if experiment == "tomography":
        if cfg["shots"] != "exact" and cfg["shots"] % 2:
            raise ConfigInvalid("tomography shots must be even")
        if cfg["n_cut_fit"] > cfg["n_cut_sim"]:
            raise ConfigInvalid("n_cut_fit must not exceed n_cut_sim")
        if cfg["mc_reps"] == 1 or cfg["mc_reps"] < 0:
            raise ConfigInvalid("mc_reps must be 0 or >= 2")
    if experiment == "probe" and not cfg["f_max_hz"] > cfg["f_min_hz"]:
        raise ConfigInvalid("f_max_hz must exceed f_min_hz")
    if experiment == "energy" and len(cfg["published_n_bar"]) != len(cfg["published_slopes"]):
        raise ConfigInvalid("published_n_bar and published_slopes differ in length")


def _resolve(cfg):
    # the single Hz -> rad/s boundary
    out = {}
    for k, v in cfg.items():
        if k.endswith("_hz"):
            out[k[:-3]] = C.TWO_PI * v
        else:
            out[k] = v
    return out


# --- experiments: each returns ({filename: text}, result dict) ---

def _run_spectrum(p):
    rows = gap_table(p["omega"], p["g_m"], p["r_grid"], n_cut=p["n_cut"])
    result = {"rows": [{"r": r.r, "gap1_hz": r.gap1 / C.TWO_PI, "gap2_hz": r.gap2 / C.TWO_PI}
                       for r in rows]}
    return {"gaps.csv": sio.gap_rows_csv(rows)}, result


def _run_probe(p):
    space = SpaceDescriptor(p["n_cut"], True)
    point = PathPoint(p["r"], p["g_m"], p["omega"])
    H = path_hamiltonian(point, space)
    es = spectrum(H, 3)
    grid = tuple(np.linspace(p["f_min"], p["f_max"], p["n_freq"]))
    res = probe_spectrum(es.states[0], H, ProbeSettings(p["Omega_p"], p["tau_s"], grid))
    gaps = es.gaps()
    result = {
        "r": p["r"],
        "peak_hz": res.peak() / C.TWO_PI,
        "local_maxima_hz": [float(res.omega_eff[i] / C.TWO_PI) for i in res.peaks()],
        "gap1_hz": float(gaps[1] / C.TWO_PI),
        "gap2_hz": float(gaps[2] / C.TWO_PI),
    }
    return {"probe.csv": sio.probe_csv(res)}, result


def _run_adiabat(p):
    rows = []
    for r in p["r_grid"]:
        sched = QuenchSchedule.exponential(PathPoint(r, p["g_m"], p["omega"]), T=p["T_s"],
                                           tau=p["tau_s"], n_cut=p["n_cut"])
        rows.append((r, adiabatic_ground_state(sched).infidelity))
    linear = {}
    for name, spin in (("up", UP), ("down", DOWN)):
        sched = QuenchSchedule.linear(p["linear_g_m"], p["linear_omega"], p["linear_tau_s"],
                                      n_cut=max(p["n_cut"], 16))
        ar = adiabatic_ground_state(sched, sched.start_state(spin))
        linear[name] = {"target": ar.target_label, "infidelity": ar.infidelity}
    result = {
        "exponential": [{"r": r, "excitation": x} for r, x in rows],
        "max_excitation": max(x for _, x in rows),
        "linear": linear,
    }
    files = {"adiabat.csv": sio.csv_text(["r", "excitation"], rows)}
    return files, result


def _run_energy(p):
    omega, g = p["omega"], p["g_m"]
    shots = None if p["shots"] == "exact" else p["shots"]
    space = SpaceDescriptor(p["n_cut"], True)
    plus, minus = ideal_ground_states(space, g, omega)
    seeds = np.random.SeedSequence(p["seed"]).spawn(2)
    files, records = {}, {}
    for (label, state, sign), ss in zip((("plus", plus, 1), ("minus", minus, -1)), seeds):
        m = measure_energy(state, omega, g, sign, Omega_b=p["Omega_b"], n_fit=p["n_fit"],
                           sdf=SdfSettings(p["Omega_p"]), shots=shots,
                           seed=np.random.default_rng(ss))
        records[label] = m.to_record()
        files[f"sideband_{label}.csv"] = sio.curve_csv(m.sideband_curve.t, m.sideband_curve.p_up)
        files[f"sdf_{label}.csv"] = sio.curve_csv(m.sdf_t, m.sdf_p_up)
    published = []
    for n_bar, slope in zip(p["published_n_bar"], p["published_slopes"]):
        e = energy_expectation(n_bar, coupling_from_slope(slope, p["Omega_p"]), omega, g)
        published.append({"n_bar": n_bar, "slope_per_s": slope, "energy_hz": e / C.TWO_PI})
    result = {
        "simulated": records,
        "splitting_hz": abs(records["plus"]["energy_hz"] - records["minus"]["energy_hz"]),
        "ideal_hz": omega / 2 / C.TWO_PI,
        "published_inputs": published,
    }
    return files, result


def _run_tomography(p):
    omega, g = p["omega"], p["g_m"]
    exact = p["shots"] == "exact"
    t_grid = tuple(np.linspace(0.0, p["periods"] * C.TWO_PI / p["Omega"], p["n_t"]))
    common = dict(beta=p["beta"], N=p["N"], n_cut_fit=p["n_cut_fit"], n_cut_sim=p["n_cut_sim"],
                  Omega=p["Omega"], t_grid=t_grid,
                  shots_per_point=C.TOMO_SHOTS if exact else p["shots"])
    sz = TomographySettings(spin_axis=SpinAxis.Z, **common)
    sy = TomographySettings(spin_axis=SpinAxis.Y, **common)
    space = SpaceDescriptor(p["n_cut_sim"], True)
    plus, minus = ideal_ground_states(space, g, omega)
    # per state: Z table, Y table, Monte Carlo replicates
    seeds = [s.spawn(3) for s in np.random.SeedSequence(p["seed"]).spawn(2)]
    files, result = {}, {}
    for (label, state), (s_z, s_y, s_mc) in zip((("plus", plus), ("minus", minus)), seeds):
        tz = simulate_shots(state, sz, seed=np.random.default_rng(s_z), exact=exact)
        ty = simulate_shots(state, sy, seed=np.random.default_rng(s_y), exact=exact)
        rec = reconstruct(tz, ty, g, omega, ideal=state, calibrate=p["calibrate"])
        if not exact and p["mc_reps"]:
            rec.errors = monte_carlo_errors(tz, ty, p["mc_reps"], s_mc, g, omega,
                                            theta_star=rec.theta_star, ideal=state)
        files[f"shots_{label}_z.csv"] = sio.shot_table_csv(tz)
        files[f"shots_{label}_y.csv"] = sio.shot_table_csv(ty)
        files[f"blocks_{label}.json"] = sio.dumps_json(rec.to_record())
        result[label] = {k: v for k, v in rec.to_record().items() if not k.startswith("blocks")}
    return files, result


def _run_drift(p):
    omega, g = p["omega"], p["g_m"]
    # drift is already in rad/s here
    theta = p["drift"] * p["drift_time_s"]
    space = SpaceDescriptor(p["n_cut"], True)
    result = {"theta": theta}
    for label, state in zip(("plus", "minus"), ideal_ground_states(space, g, omega)):
        bz = rotate_blocks(dephase_spin(state, SpinAxis.Z), theta)
        by = rotate_blocks(dephase_spin(state, SpinAxis.Y), theta)
        sz_a, sy_b, q = supercharge_expectation(bz, by, g, omega)
        result[label] = {"sz_A": sz_a, "sy_B": sy_b, "Q_value": q}
    return {}, result


def _run_dephasing(p):
    omega, g = p["omega"], p["g_m"]
    result = {}
    for label, spin in (("plus", UP), ("minus", DOWN)):
        rho = dephased_linear_quench(g, omega, p["tau_s"], p["tau_d_s"], spin=spin, n_cut=p["n_cut"])
        sz_a, sy_b, q = supercharge_expectation(dephase_spin(rho, SpinAxis.Z),
                                                dephase_spin(rho, SpinAxis.Y), g, omega)
        result[label] = {"sz_A": sz_a, "sy_B": sy_b, "Q_value": q}
    return {}, result


RUNNERS = {
    "spectrum": _run_spectrum,
    "probe": _run_probe,
    "adiabat": _run_adiabat,
    "energy": _run_energy,
    "tomography": _run_tomography,
    "drift-study": _run_drift,
    "dephasing-study": _run_dephasing,
}


def _versions():
    return {
        "susyrabi": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "python": platform.python_version(),
    }


def _sha256(text):
    return hashlib.sha256(text.encode()).hexdigest()


def run(experiment, cfg, out_dir) -> int:
    """Execute one experiment and write its artifacts; returns the exit status."""
    out_dir = Path(out_dir)
    manifest = {
        "experiment": experiment,
        "figure": FIGURES[experiment],
        "config": cfg,
        "versions": _versions(),
        "outputs": {},
        "status": "ok",
        "error": None,
    }
    status = EXIT_OK
    try:
        files, result = RUNNERS[experiment](_resolve(cfg))
        files["result.json"] = sio.dumps_json(result)
        for name in sorted(files):
            sio.atomic_write_text(out_dir / name, files[name])
            manifest["outputs"][name] = _sha256(files[name])
    except Exception as exc:  # any compute error is reported through the manifest
        manifest["status"] = "compute_failed"
        manifest["error"] = {"type": type(exc).__name__, "message": str(exc)}
        status = EXIT_COMPUTE
    sio.write_json(out_dir / "manifest.json", manifest)
    return status


def make_parser():
    ap = argparse.ArgumentParser(prog="susyrabi", description="Supersymmetric Rabi model simulations")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", help=", ".join(DEFAULTS))
    r.add_argument("--config", type=Path, default=None, help="TOML file with per-experiment tables")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", type=Path, default=None, help="output directory (default runs/<experiment>)")
    r.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--shots", default=None, help="'exact' or an integer shot count")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args.experiment, args.config, args.sets, args.seed, args.shots)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path("runs") / args.experiment
    status = run(args.experiment, cfg, out)
    if status == EXIT_COMPUTE:
        print(f"compute failed; see {out / 'manifest.json'}", file=sys.stderr)
    else:
        print(f"wrote {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
