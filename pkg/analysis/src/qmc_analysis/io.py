"""Readers for the simulator's run-directory file formats.

Everything here is read-only.  The formats are the CLI's external contract:

- observables.csv: time_ns, observable, mean, ci_low, ci_high
- walkers.csv: time_ns, sample, replica, n_tot, re_ndiag, im_ndiag, theta,
  dim_occupied
- snapshots/s{sample}_r{replica}_t{index}.txt: one header line
  ``# n=<n> n_diag=<n_diag> t=<t>`` followed by ``i j a b`` rows giving the
  net walker count a + i b at density-matrix location (i, j)
- meta.json: run configuration and provenance
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


class SchemaError(ValueError):
    """A run file is missing a required column or malformed."""


OBSERVABLE_COLUMNS = ("time_ns", "observable", "mean", "ci_low", "ci_high")
WALKER_COLUMNS = ("time_ns", "sample", "replica", "n_tot", "re_ndiag",
                  "im_ndiag", "theta", "dim_occupied")


def _read_csv(path: Path, required: tuple[str, ...]) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def read_observables(run_dir) -> list[dict]:
    """Rows with time_ns/mean/ci_low/ci_high parsed to float."""
    rows = _read_csv(Path(run_dir) / "observables.csv", OBSERVABLE_COLUMNS)
    for r in rows:
        for k in ("time_ns", "mean", "ci_low", "ci_high"):
            r[k] = float(r[k])
    return rows


def read_walkers(run_dir) -> list[dict]:
    """Rows with numeric columns parsed (counts to int, theta/time to float)."""
    rows = _read_csv(Path(run_dir) / "walkers.csv", WALKER_COLUMNS)
    for r in rows:
        r["time_ns"] = float(r["time_ns"])
        r["theta"] = float(r["theta"])
        for k in ("sample", "replica", "n_tot", "re_ndiag", "im_ndiag",
                  "dim_occupied"):
            r[k] = int(r[k])
    return rows


def read_meta(run_dir) -> dict:
    with open(Path(run_dir) / "meta.json") as f:
        return json.load(f)


def observable_series(rows: list[dict], name: str):
    """(times, means, ci_lows, ci_highs) for one observable, time-ordered."""
    sel = sorted((r["time_ns"], r["mean"], r["ci_low"], r["ci_high"])
                 for r in rows if r["observable"] == name)
    if not sel:
        raise SchemaError(f"no rows for observable {name!r}")
    t, m, lo, hi = zip(*sel)
    return list(t), list(m), list(lo), list(hi)


class Snapshot:
    """Parsed population snapshot: header fields plus sparse counts."""

    def __init__(self, n: int, n_diag: int, t: float,
                 counts: dict[tuple[int, int], complex]):
        self.n = n
        self.n_diag = n_diag
        self.t = t
        self.counts = counts


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    with open(path) as f:
        header = f.readline()
        if not header.startswith("#"):
            raise SchemaError(f"{path}: missing snapshot header line")
        try:
            fields = dict(kv.split("=") for kv in header.lstrip("# ").split())
            n = int(fields["n"])
            n_diag = int(fields["n_diag"])
            t = float(fields["t"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"{path}: bad snapshot header: {header!r}") from exc
        counts: dict[tuple[int, int], complex] = {}
        for line in f:
            i, j, a, b = line.split()
            counts[(int(i), int(j))] = complex(int(a), int(b))
    return Snapshot(n, n_diag, t, counts)


def final_snapshots(run_dir) -> list[Snapshot]:
    """The last-time snapshot of every (sample, replica) in a run."""
    snap_dir = Path(run_dir) / "snapshots"
    if not snap_dir.is_dir():
        raise SchemaError(f"{run_dir} has no snapshots/ (run with snapshots on)")
    by_job: dict[tuple[int, int], tuple[int, Path]] = {}
    for path in snap_dir.glob("s*_r*_t*.txt"):
        s, r, ti = (int(part[1:]) for part in path.stem.split("_"))
        if (s, r) not in by_job or ti > by_job[(s, r)][0]:
            by_job[(s, r)] = (ti, path)
    if not by_job:
        raise SchemaError(f"{snap_dir}: no snapshot files")
    return [read_snapshot(p) for _, (_, p) in sorted(by_job.items())]
