"""Deterministic CSV and run-manifest output.

Byte-identity across re-runs and worker counts is a stated contract, so
every float is rendered with ``repr`` (shortest round-trip form), the
line terminator is pinned to "\\n", and the manifest carries no
timestamps — only the seed, the configuration digest, and the versions
that could change the numbers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .renewal import OvershootTrace

__all__ = [
    "TRACE_FIELDS",
    "TRAJECTORY_FIELDS",
    "format_cell",
    "write_csv",
    "trace_rows",
    "config_digest",
    "write_manifest",
]

TRACE_FIELDS = ("replicate", "n", "M_n", "tau_flag", "R_n", "T_flag")
TRAJECTORY_FIELDS = ("replicate", "event", "vertex", "time")


def format_cell(value) -> str:
    """Canonical text form of one cell; None renders empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(
    path: str | Path,
    fieldnames: Sequence[str],
    rows: Iterable,
) -> Path:
    """Write rows (mappings or sequences) under a named header.

    Sequence rows must match the header length exactly; mapping rows may
    omit keys, which render empty.  Returns the path written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            if isinstance(row, Mapping):
                cells = [format_cell(row.get(f)) for f in fieldnames]
            else:
                if len(row) != len(fieldnames):
                    raise ValueError(
                        f"row of length {len(row)} under a "
                        f"{len(fieldnames)}-column header"
                    )
                cells = [format_cell(v) for v in row]
            writer.writerow(cells)
    return path


def trace_rows(replicate: int, trace: OvershootTrace) -> list[dict]:
    """Flatten one overshoot trace to the shared-index row schema.

    The index column ``n`` serves both sequences: M_n is the level-mass
    path (defined for n >= 1), R_n the revealed-cut martingale (defined
    from n = 0).  Cells outside a sequence's range stay empty; the flag
    columns mark the crossing time of t by M and of 2B by R.
    """
    n_m = len(trace.martingale_path)
    n_r = len(trace.r_sequence)
    rows = []
    for n in range(max(n_m + 1, n_r)):
        rows.append({
            "replicate": replicate,
            "n": n,
            "M_n": trace.martingale_path[n - 1] if 1 <= n <= n_m else None,
            "tau_flag": int(trace.tau == n),
            "R_n": trace.r_sequence[n] if n < n_r else None,
            "T_flag": int(trace.T == n),
        })
    return rows


def config_digest(text: str) -> str:
    """sha256 of the configuration text, as it appears in the manifest."""
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(
    out_dir: str | Path,
    *,
    seed: int,
    config_text: str = "",
    extra: Mapping[str, object] | None = None,
) -> Path:
    """Emit manifest.json next to the experiment CSVs.

    Contents: master seed, sha256 of the configuration text, and the
    versions that determine the numeric stream.  Deliberately no clock
    fields: two runs of the same configuration must produce identical
    bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "seed": int(seed),
        "config_sha256": config_digest(config_text),
        "versions": {
            "vrjplab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest["extra"] = dict(extra)
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
