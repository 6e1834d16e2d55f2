"""Result persistence: CSV writers, run records, directory locks, plot scripts.

CSV files use '.' decimals, '\\n' line endings, a header row, and floats at
17 significant digits so outputs round-trip bit-identically.
"""

from __future__ import annotations

import json
import os
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError

__all__ = ["format_float", "write_csv", "write_json", "write_run_record",
           "output_lock", "emit_plots"]


def format_float(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return f"{v:.17g}"


def write_csv(path: str | Path, header: list[str], rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, (int, float, np.floating, np.integer))
                              else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n",
                    newline="\n")
    return path


def write_run_record(out_dir: str | Path, command: str, config: dict,
                     stats: dict | None = None) -> Path:
    """run.json with the resolved config; re-running from it reproduces outputs."""
    record = {
        "artifact_version": __version__,
        "command": command,
        "config": config,
        "stats": stats or {},
    }
    return write_json(Path(out_dir) / "run.json", record)


@contextmanager
def output_lock(out_dir: str | Path):
    """Exclusive per-directory lock; parallel runs must use distinct directories."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


_DECAY_GP = """\
# semilog decay of the distance to the reference profile
set datafile separator ','
set logscale y
set xlabel 't'
set ylabel 'L1 distance'
set key left bottom
plot 'series.csv' using 1:5 every ::1 with lines title 'distance'
"""

_SPECTRUM_GP = """\
# eigenvalues of the discretized generator
set datafile separator ','
set xlabel 'Re'
set ylabel 'Im'
set key off
set zeroaxis
plot 'spectrum.csv' using 1:2 every ::1 with points pt 7 ps 0.5
"""

_SNAPSHOTS_GP = """\
# density snapshots over age
set datafile separator ','
set xlabel 'x'
set ylabel 'f'
set key off
plot 'snapshots.csv' using 2:3 every ::1 with dots
"""


def emit_plots(result_dir: str | Path) -> list[Path]:
    """Write gnuplot scripts next to the CSVs they reference.

    Missing CSVs are skipped with a warning; an empty directory emits
    nothing and succeeds.
    """
    result_dir = Path(result_dir)
    written = []
    for csv_name, gp_name, content in [
        ("series.csv", "decay.gp", _DECAY_GP),
        ("spectrum.csv", "spectrum.gp", _SPECTRUM_GP),
        ("snapshots.csv", "snapshots.gp", _SNAPSHOTS_GP),
    ]:
        if (result_dir / csv_name).exists():
            path = result_dir / gp_name
            path.write_text(content, newline="\n")
            written.append(path)
        else:
            warnings.warn(f"{csv_name} not found in {result_dir}; skipping {gp_name}")
    return written
