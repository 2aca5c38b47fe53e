"""The three standard figure styles, rendered from run-directory CSVs.

- fidelity_figure: fidelity vs time with a confidence band, optional exact
  overlay (convergence-benchmark style);
- density_figure: one panel per diagonal density-matrix element with exact
  overlay (non-Markovian benchmark style);
- walker_figure: total walkers, net real diagonal walkers, and the phase
  angle theta vs time (walker-dynamics style).

No physics is recomputed here; every curve is a column from the CSVs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .io import observable_series, read_observables, read_walkers  # noqa: E402


def fidelity_figure(qmc_dir, out_path, exact_dir=None,
                    observable: str = "fidelity") -> Path:
    t, m, lo, hi = observable_series(read_observables(qmc_dir), observable)
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.fill_between(t, lo, hi, alpha=0.3, label="95% CI")
    ax.plot(t, m, marker="o", ms=3, lw=1, label="QMC")
    if exact_dir is not None:
        te, me, _, _ = observable_series(read_observables(exact_dir), observable)
        ax.plot(te, me, "k--", lw=1, label="exact")
    ax.set_xlabel("time (ns)")
    ax.set_ylabel(observable)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def density_figure(qmc_dir, out_path, exact_dir=None,
                   observables: tuple[str, ...] = ("rho00", "rho11", "rho22")) -> Path:
    qmc_rows = read_observables(qmc_dir)
    exact_rows = read_observables(exact_dir) if exact_dir is not None else None
    fig, axes = plt.subplots(1, len(observables),
                             figsize=(2.6 * len(observables), 2.8),
                             sharex=True, sharey=True)
    for ax, name in zip(axes, observables):
        t, m, lo, hi = observable_series(qmc_rows, name)
        ax.fill_between(t, lo, hi, alpha=0.3)
        ax.plot(t, m, marker="o", ms=2.5, lw=1, label="QMC")
        if exact_rows is not None:
            te, me, _, _ = observable_series(exact_rows, name)
            ax.plot(te, me, "k--", lw=1, label="exact")
        ax.set_title(name)
        ax.set_xlabel("time")
    axes[0].set_ylabel("population")
    axes[0].legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def walker_figure(qmc_dir, out_path) -> Path:
    rows = read_walkers(qmc_dir)
    jobs: dict[tuple[int, int], list[dict]] = {}
    for r in rows:
        jobs.setdefault((r["sample"], r["replica"]), []).append(r)
    fig, axes = plt.subplots(3, 1, figsize=(5.0, 6.0), sharex=True)
    for (s, rep), series in sorted(jobs.items()):
        series.sort(key=lambda r: r["time_ns"])
        t = [r["time_ns"] for r in series]
        label = f"s{s}r{rep}"
        axes[0].plot(t, [r["n_tot"] for r in series], lw=1, label=label)
        axes[1].plot(t, [r["re_ndiag"] for r in series], lw=1)
        axes[2].plot(t, [r["theta"] for r in series], lw=1)
    axes[0].set_ylabel(r"$N_\mathrm{tot}$")
    axes[1].set_ylabel(r"$\mathrm{Re}\,N^\mathrm{diag}$")
    axes[2].set_ylabel(r"$\theta$")
    axes[2].set_xlabel("time (ns)")
    if len(jobs) <= 8:
        axes[0].legend(frameon=False, fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)
