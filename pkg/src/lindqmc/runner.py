"""Run orchestration: configs, sample/replica execution, CSV/JSON emission.

Per (sample, replica) job the master seed is mixed into an independent
stream, so results are independent of execution order and worker count;
outputs are written by a single writer after sorting, which makes the CSV
files byte-identical across worker counts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, circuits, estimators, redfield, stepper, walkers
from .circuits import Schedule, ScheduleValidationError
from .estimators import ObservableSpec
from .liouvillian import ColumnOracle
from .operators import OperatorModel
from .rng import BOOTSTRAP_STREAM, keyed_generator, sample_seed
from .stepper import DtPolicy

SCHEMA_VERSION = 1
WORKERS_ENV = "LINDQMC_WORKERS"

# fields that identify the physics of a run; seed/replica/output knobs excluded
_HASH_EXCLUDE = {"seed", "out_dir", "snapshots", "n_samples", "n_replicas"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "free"  # dd_plus | dd_w | free | ghz | redfield
    n: int = 2
    total_duration: float = 1000.0
    tau: float = 100.0
    t1: float | None = 100_000.0  # ns; None disables the channel
    t2: float | None = 50_000.0
    j_khz: float = 100.0
    n_diag: int = 10_000
    n_samples: int = 4
    n_replicas: int = 1
    xi: float = 0.001
    base_dt: float = 1.0
    p_max: float = 0.1
    method: str = "ab2"
    seed: int = 1
    obs_stride: float = 10.0
    trace_renormalize: bool = False
    snapshots: bool = False
    out_dir: str = "runs/out"
    initial: str = "plus"  # free experiment only
    # redfield parameters (dimensionless units)
    redfield_omega1: float = 0.25
    redfield_omega2: float = 0.5
    redfield_gamma1: float = 1.0
    redfield_gamma2: float = 4.0
    redfield_alpha: float = 3.0
    redfield_kappa: float = 1.0
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> None:
        if self.experiment not in ("dd_plus", "dd_w", "free", "ghz", "redfield"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.n_diag < 1 or self.n_samples < 1 or self.n_replicas < 1:
            raise ConfigError("n_diag, n_samples, n_replicas must be >= 1")
        if self.xi < 0:
            raise ConfigError("xi must be >= 0")
        if self.method not in ("euler", "ab2"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.obs_stride <= 0:
            raise ConfigError("obs_stride must be > 0")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def content_hash(self) -> str:
        data = {k: v for k, v in asdict(self).items() if k not in _HASH_EXCLUDE}
        canon = json.dumps(data, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_schedule(config: RunConfig) -> Schedule:
    j = circuits.khz_to_rad_per_ns(config.j_khz)
    if config.experiment == "dd_plus":
        return circuits.build_dd_schedule(config.n, config.total_duration,
                                          config.tau, config.t1, config.t2, j, "plus")
    if config.experiment == "dd_w":
        return circuits.build_dd_schedule(config.n, config.total_duration,
                                          config.tau, config.t1, config.t2, j, "w")
    if config.experiment == "free":
        return circuits.build_free_schedule(config.n, config.total_duration,
                                            config.t1, config.t2, j, config.initial)
    if config.experiment == "ghz":
        return circuits.build_ghz_schedule(config.n, config.t1, config.t2, j)
    model = redfield.build_model(redfield_params(config))
    return redfield.build_schedule(model, config.total_duration)


def redfield_params(config: RunConfig) -> redfield.RedfieldParams:
    return redfield.RedfieldParams(
        config.redfield_omega1, config.redfield_omega2,
        config.redfield_gamma1, config.redfield_gamma2,
        config.redfield_alpha, config.redfield_kappa,
    )


def observable_specs(config: RunConfig, schedule: Schedule) -> list[ObservableSpec]:
    specs = []
    if config.experiment == "redfield":
        model = redfield.build_model(redfield_params(config))
        specs.extend(redfield.rotated_element_specs(model))
    elif config.experiment == "ghz":
        specs.append(ObservableSpec(kind="fidelity_to_state", name="fidelity",
                                    target_state=circuits.ghz_state(config.n)))
    else:
        specs.append(ObservableSpec(kind="fidelity_to_state", name="fidelity",
                                    target_state=dict(schedule.initial_state)))
    specs.append(ObservableSpec(kind="trace", name="trace"))
    return specs


def observation_times(config: RunConfig, schedule: Schedule) -> list[float]:
    total = schedule.total_duration
    times = [float(t) for t in np.arange(0.0, total, config.obs_stride)]
    if not times or abs(times[-1] - total) > 1e-9:
        times.append(total)
    return times


def dt_policy(config: RunConfig) -> DtPolicy:
    return DtPolicy(base_dt=config.base_dt, p_max=config.p_max,
                    weight_max=1.5 if config.method == "ab2" else 1.0)


# ---------------------------------------------------------------------------
# per-(sample, replica) worker

def _run_job(args) -> tuple[int, int, list]:
    config, sample, replica, collect_bound = args
    schedule = build_schedule(config)
    specs = observable_specs(config, schedule)
    times = observation_times(config, schedule)
    policy = dt_policy(config)
    seed = sample_seed(config.seed, sample, replica)
    series = stepper.qmc_evolve(schedule, config.n_diag, config.xi, seed,
                                times, policy, config.method)
    oracles, dts, seg_of_time = _segment_tables(schedule, policy)
    records = []
    for t, pop in series:
        st = walkers.stats(pop, t)
        raw = {spec.name: estimators.population_value(pop, spec, config.n_diag)
               for spec in specs}
        bound = None
        if collect_bound:
            k = seg_of_time(t)
            bound = estimators.error_bound(pop, oracles[k], dts[k])
        snapshot = sorted(
            (loc.row, loc.col, int(c.real), int(c.imag))
            for loc, c in pop.counts.items()
        ) if config.snapshots else None
        records.append((t, st, raw, bound, snapshot))
    return sample, replica, records


def _segment_tables(schedule: Schedule, policy: DtPolicy):
    oracles = [ColumnOracle(schedule.n, OperatorModel(schedule.n, seg.active_terms),
                            list(schedule.channels))
               for seg in schedule.segments]
    dts = [policy.dt_for(o) for o in oracles]
    bounds = np.cumsum([0.0] + [seg.duration for seg in schedule.segments])

    def seg_of_time(t: float) -> int:
        k = int(np.searchsorted(bounds[1:], t + 1e-12))
        return min(k, len(oracles) - 1)

    return oracles, dts, seg_of_time


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _execute_jobs(jobs: list, workers: int) -> dict:
    if workers <= 1 or len(jobs) <= 1:
        results = map(_run_job, jobs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    return {(s, r): rec for s, r, rec in results}


# ---------------------------------------------------------------------------
# emission

def _fmt(x: float) -> str:
    return repr(float(x))


def _write_observables(path: Path, times: list[float], specs: list[ObservableSpec],
                       rows: dict) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ns", "observable", "mean", "ci_low", "ci_high"])
        for ti, t in enumerate(times):
            for spec in specs:
                mean, lo, hi = rows[(ti, spec.name)]
                w.writerow([_fmt(t), spec.name, _fmt(mean), _fmt(lo), _fmt(hi)])


def _bootstrap_rng(master_seed: int, obs_index: int, spec_index: int):
    return keyed_generator(BOOTSTRAP_STREAM, master_seed, obs_index, spec_index)


def run_qmc(config: RunConfig, collect_bound: bool = False,
            n_resamples: int = 2000) -> Path:
    """Execute a full QMC run and write observables/walkers/meta files."""
    config.validate()
    schedule = build_schedule(config)
    specs = observable_specs(config, schedule)
    times = observation_times(config, schedule)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    jobs = [(config, s, r, collect_bound)
            for s in range(config.n_samples) for r in range(config.n_replicas)]
    results = _execute_jobs(jobs, _worker_count())

    # per-sample values aggregate replicas: v_s = sum_r raw / (r * n_diag-norm)
    obs_rows = {}
    for ti in range(len(times)):
        for si, spec in enumerate(specs):
            per_sample = []
            for s in range(config.n_samples):
                v = 0j
                for r in range(config.n_replicas):
                    v += results[(s, r)][ti][2][spec.name]
                per_sample.append(v / config.n_replicas)
            if config.trace_renormalize and spec.kind != "trace":
                traces = []
                for s in range(config.n_samples):
                    tv = sum(results[(s, r)][ti][2]["trace"]
                             for r in range(config.n_replicas)) / config.n_replicas
                    traces.append(tv.real)
                per_sample = [v / tr if tr else v for v, tr in zip(per_sample, traces)]
            mean = estimators.scalarize(spec, np.mean(per_sample))
            if len(per_sample) >= 2:
                lo, hi = estimators.bootstrap_ci_complex(
                    per_sample, n_resamples, _bootstrap_rng(config.seed, ti, si), spec)
            else:
                lo = hi = mean
            obs_rows[(ti, spec.name)] = (mean, lo, hi)
    _write_observables(out / "observables.csv", times, specs, obs_rows)

    with open(out / "walkers.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ns", "sample", "replica", "n_tot", "re_ndiag",
                    "im_ndiag", "theta", "dim_occupied"])
        for ti, t in enumerate(times):
            for s in range(config.n_samples):
                for r in range(config.n_replicas):
                    st = results[(s, r)][ti][1]
                    w.writerow([_fmt(t), s, r, st.n_tot, st.re_ndiag,
                                st.im_ndiag, _fmt(st.theta), st.dim_occupied])

    if collect_bound:
        with open(out / "bound.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["time_ns", "sample", "replica", "bound"])
            for ti, t in enumerate(times):
                for s in range(config.n_samples):
                    for r in range(config.n_replicas):
                        w.writerow([_fmt(t), s, r,
                                    _fmt(results[(s, r)][ti][3])])

    if config.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for (s, r), recs in results.items():
            for ti, (t, _, _, _, snapshot) in enumerate(recs):
                path = snap_dir / f"s{s}_r{r}_t{ti}.txt"
                with open(path, "w") as f:
                    f.write(f"# n={config.n} n_diag={config.n_diag} t={t!r}\n")
                    for i, j, a, b in snapshot:
                        f.write(f"{i} {j} {a} {b}\n")

    _write_meta(out, config, time.time() - t0, mode="qmc")
    return out


def run_exact(config: RunConfig, dt_override: float | None = None) -> Path:
    """Deterministic reference run with the same output schema."""
    config.validate()
    schedule = build_schedule(config)
    if schedule.n > 10:
        raise ConfigError("exact mode limited to n <= 10")
    specs = observable_specs(config, schedule)
    times = observation_times(config, schedule)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    series = stepper.exact_evolve(schedule, times, dt_policy(config), dt_override)
    dim = 1 << schedule.n
    obs_rows = {}
    for ti, (t, vec) in enumerate(series):
        trace = estimators.vec_value(vec, ObservableSpec(kind="trace", name="trace"), dim)
        for spec in specs:
            v = estimators.vec_value(vec, spec, dim)
            if config.trace_renormalize and spec.kind != "trace" and trace.real:
                v = v / trace.real
            mean = estimators.scalarize(spec, v)
            obs_rows[(ti, spec.name)] = (mean, mean, mean)
    _write_observables(out / "observables.csv", times, specs, obs_rows)
    _write_meta(out, config, time.time() - t0, mode="exact")
    return out


def _write_meta(out: Path, config: RunConfig, wall: float, mode: str) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "config": json.loads(config.to_json()),
        "config_hash": config.content_hash(),
        "version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": wall,
    }
    with open(out / "meta.json", "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# replica aggregation from snapshot dumps

def aggregate(snapshot_dirs: list[str], out_dir: str,
              n_resamples: int = 2000) -> Path:
    """Combine replica runs (one per directory) into an aggregate estimate.

    All runs must share the physics config hash; each directory contributes
    one replica per sample.  Emits aggregated observables.csv plus
    traces.csv with per-replica and aggregate trace estimates at the final
    time.
    """
    metas = []
    for d in snapshot_dirs:
        with open(Path(d) / "meta.json") as f:
            metas.append(json.load(f))
    hashes = {m["config_hash"] for m in metas}
    if len(hashes) != 1:
        raise ConfigError(f"config hashes differ across inputs: {sorted(hashes)}")
    config = RunConfig.from_json(json.dumps(metas[0]["config"]))
    schedule = build_schedule(config)
    specs = observable_specs(config, schedule)
    times = observation_times(config, schedule)
    r = len(snapshot_dirs)
    n_samples = config.n_samples

    pops = {}  # (dir index, sample, time index) -> Population
    for di, d in enumerate(snapshot_dirs):
        snap_dir = Path(d) / "snapshots"
        if not snap_dir.is_dir():
            raise ConfigError(f"{d} has no snapshots/ directory (run with snapshots on)")
        for s in range(n_samples):
            for ti in range(len(times)):
                pop, _ = walkers.load_snapshot(snap_dir / f"s{s}_r0_t{ti}.txt")
                pops[(di, s, ti)] = pop

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obs_rows = {}
    for ti in range(len(times)):
        for si, spec in enumerate(specs):
            per_sample = []
            for s in range(n_samples):
                v = sum(
                    estimators.population_value(pops[(di, s, ti)], spec, config.n_diag)
                    for di in range(r)
                ) / r
                per_sample.append(v)
            mean = estimators.scalarize(spec, np.mean(per_sample))
            if len(per_sample) >= 2:
                lo, hi = estimators.bootstrap_ci_complex(
                    per_sample, n_resamples,
                    _bootstrap_rng(config.seed, ti, si), spec)
            else:
                lo = hi = mean
            obs_rows[(ti, spec.name)] = (mean, lo, hi)
    _write_observables(out / "observables.csv", times, specs, obs_rows)

    trace_spec = ObservableSpec(kind="trace", name="trace")
    ti = len(times) - 1
    with open(out / "traces.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["replica", "trace"])
        for di in range(r):
            tr = np.mean([
                estimators.population_value(pops[(di, s, ti)], trace_spec,
                                            config.n_diag).real
                for s in range(n_samples)
            ])
            w.writerow([di, _fmt(tr)])
        agg = np.mean([
            sum(estimators.population_value(pops[(di, s, ti)], trace_spec,
                                            config.n_diag).real
                for di in range(r)) / r
            for s in range(n_samples)
        ])
        w.writerow(["aggregate", _fmt(agg)])

    meta = {
        "schema_version": SCHEMA_VERSION,
        "mode": "aggregate",
        "inputs": [str(d) for d in snapshot_dirs],
        "config_hash": metas[0]["config_hash"],
        "n_replicas_aggregated": r,
        "n_diag_eff": r * config.n_diag,
        "config": metas[0]["config"],
    }
    with open(out / "meta.json", "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
    return out
