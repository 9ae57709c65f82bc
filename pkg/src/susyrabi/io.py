"""CSV / JSON serialization with atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .constants import TWO_PI
from .hilbert import BlockDensity


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else _fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    return atomic_write_text(path, csv_text(header, rows))


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, obj):
    return atomic_write_text(path, dumps_json(obj))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


# gap tables: r,gap1_hz,gap2_hz
def gap_rows_csv(rows):
    return csv_text(["r", "gap1_hz", "gap2_hz"],
                    [(r.r, r.gap1 / TWO_PI, r.gap2 / TWO_PI) for r in rows])


# probe spectra: omega_eff_hz,response
def probe_csv(result):
    return csv_text(["omega_eff_hz", "response"],
                    zip(result.omega_eff / TWO_PI, result.depletion))


# curves: t_s,p_up
def curve_csv(t, p_up):
    return csv_text(["t_s", "p_up"], zip(np.asarray(t, float), np.asarray(p_up, float)))


SHOT_HEADER = ["j", "sideband", "t_s", "sz_gate", "shots", "up"]


def shot_table_csv(table):
    t = table.t
    rows = []
    for i in range(len(table)):
        up = table.up[i]
        up_s = _fmt(int(up)) if not table.exact else _fmt(float(up))
        rows.append([_fmt(table.j[i]), str(table.sideband[i]), _fmt(t[i]),
                     _fmt(bool(table.sz_gate[i])), _fmt(int(table.shots[i])), up_s])
    return csv_text(SHOT_HEADER, rows)


def read_shot_table(path, settings):
    """Load a shot CSV; ``settings`` supplies the time grid and displacement grid."""
    from .tomography import ShotTable

    header, rows = read_csv(path)
    if header != SHOT_HEADER:
        raise ValueError(f"unexpected shot table header {header}")
    tg = np.asarray(settings.t_grid)
    t = np.array([float(r[2]) for r in rows])
    t_index = np.array([int(np.argmin(np.abs(tg - x))) for x in t])
    if np.any(np.abs(tg[t_index] - t) > 1e-12 * max(1.0, tg.max())):
        raise ValueError("time points do not match the settings grid")
    up = np.array([float(r[5]) for r in rows])
    exact = bool(np.any(up != np.rint(up)))
    return ShotTable(
        j=np.array([int(r[0]) for r in rows]),
        sideband=np.array([r[1] for r in rows]),
        t_index=t_index,
        sz_gate=np.array([bool(int(r[3])) for r in rows]),
        shots=np.array([int(r[4]) for r in rows]),
        up=up if exact else up.astype(np.int64),
        settings=settings,
        exact=exact,
    )


def blocks_to_json_obj(blocks: BlockDensity):
    """Density blocks as explicit real/imaginary arrays with a dimension header."""
    out = {"dim": int(blocks.n_cut + 1), "n_cut": int(blocks.n_cut)}
    for name, m in (("rho_uu", blocks.rho_uu), ("rho_dd", blocks.rho_dd)):
        out[name] = {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}
    return out


def blocks_from_json_obj(obj) -> BlockDensity:
    mats = []
    for name in ("rho_uu", "rho_dd"):
        m = np.asarray(obj[name]["real"]) + 1j * np.asarray(obj[name]["imag"])
        if m.shape != (obj["dim"], obj["dim"]):
            raise ValueError(f"{name} has shape {m.shape}, header says {obj['dim']}")
        mats.append(m)
    return BlockDensity(*mats, check=False)
