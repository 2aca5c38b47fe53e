"""Empirical scaling fits over collections of run directories.

Two models:

- occupied-dimension scaling  dim = C * exp(beta * n) * n_diag^gamma,
  linear least squares in log space;
- hermiticity-error scaling   eps = A * exp(alpha * n) / sqrt(n_diag) + eps_inf,
  nonlinear least squares with the -1/2 walker exponent held fixed.

Both operate purely on the CSV/snapshot outputs of the simulator CLI.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .io import final_snapshots, read_meta, read_walkers


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    model: str
    parameters: dict[str, float]
    residual: float
    inputs_digest: str
    n_points: int = 0

    def to_dict(self) -> dict:
        return {"model": self.model, "parameters": self.parameters,
                "residual": self.residual, "inputs_digest": self.inputs_digest,
                "n_points": self.n_points}


def _digest(records) -> str:
    blob = json.dumps(sorted(records), sort_keys=True).encode()
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def _check(records, name):
    records = [(int(n), int(n_diag), float(y)) for n, n_diag, y in records]
    if len({(n, nd) for n, nd, _ in records}) < 4:
        raise FitError(f"{name}: need >= 4 distinct (n, n_diag) points")
    if any(y <= 0 for _, _, y in records):
        raise FitError(f"{name}: values must be positive")
    return records


def fit_dim_scaling(records) -> FitResult:
    """Fit dim = C exp(beta n) n_diag^gamma to (n, n_diag, dim) rows."""
    records = _check(records, "dim-scaling")
    n = np.array([r[0] for r in records], dtype=float)
    log_nd = np.log([r[1] for r in records])
    log_dim = np.log([r[2] for r in records])
    design = np.column_stack([np.ones_like(n), n, log_nd])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("dim-scaling: design is rank-deficient "
                       "(vary both n and n_diag)")
    coef, *_ = np.linalg.lstsq(design, log_dim, rcond=None)
    resid = float(np.linalg.norm(design @ coef - log_dim))
    params = {"C": float(np.exp(coef[0])), "beta": float(coef[1]),
              "gamma": float(coef[2])}
    return FitResult("dim_scaling", params, resid, _digest(records),
                     len(records))


def fit_hermiticity(records) -> FitResult:
    """Fit eps = A exp(alpha n) / sqrt(n_diag) + eps_inf to (n, n_diag, eps).

    The model is linear in (A, eps_inf) once alpha is fixed, so alpha is
    optimized with the (A, eps_inf) sub-problem solved exactly at each
    evaluation; a full joint polish follows.
    """
    records = _check(records, "hermiticity")
    n = np.array([r[0] for r in records], dtype=float)
    inv_sqrt = 1.0 / np.sqrt([r[1] for r in records])
    eps = np.array([r[2] for r in records], dtype=float)

    def linear_solve(alpha):
        design = np.column_stack([np.exp(alpha * n) * inv_sqrt,
                                  np.ones_like(n)])
        coef, *_ = np.linalg.lstsq(design, eps, rcond=None)
        return coef, design @ coef - eps

    def alpha_residual(alpha):
        return linear_solve(float(alpha[0]))[1]

    coarse = min((float(np.linalg.norm(linear_solve(a)[1])), a)
                 for a in np.linspace(-2.0, 2.0, 81))[1]
    alpha = float(least_squares(alpha_residual, x0=[coarse]).x[0])
    (a_coef, eps_inf), _ = linear_solve(alpha)

    def joint_residual(p):
        a, al, e0 = p
        return a * np.exp(al * n) * inv_sqrt + e0 - eps

    sol = least_squares(joint_residual, x0=[a_coef, alpha, eps_inf],
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a_coef, alpha, eps_inf = (float(v) for v in sol.x)
    resid = float(np.linalg.norm(sol.fun))
    if not all(math.isfinite(v) for v in (a_coef, alpha, eps_inf)):
        raise FitError("hermiticity: fit diverged")
    params = {"A": a_coef, "alpha": alpha, "eps_inf": eps_inf}
    return FitResult("hermiticity", params, resid, _digest(records),
                     len(records))


def walker_threshold(fit: FitResult, n: int, tol: float = 0.02) -> float:
    """Walkers needed so the fitted hermiticity error drops below tol.

    Inverts eps(n, N) = tol for the hermiticity model; infinite when the
    fitted floor eps_inf already exceeds tol.
    """
    if fit.model != "hermiticity":
        raise FitError("walker_threshold needs a hermiticity fit")
    p = fit.parameters
    gap = tol - p["eps_inf"]
    if gap <= 0:
        return math.inf
    return (p["A"] * math.exp(p["alpha"] * n) / gap) ** 2


# ---------------------------------------------------------------------------
# record collection from run directories

def dim_records(run_dirs) -> list[tuple[int, int, float]]:
    """(n, n_diag, final occupied dimension) per run, averaged over jobs."""
    out = []
    for d in run_dirs:
        meta = read_meta(d)
        rows = read_walkers(d)
        t_final = max(r["time_ns"] for r in rows)
        dims = [r["dim_occupied"] for r in rows if r["time_ns"] == t_final]
        out.append((int(meta["config"]["n"]), int(meta["config"]["n_diag"]),
                    float(np.mean(dims))))
    return out


def anti_hermiticity_error(run_dir) -> float:
    """Frobenius norm of the anti-Hermitian part of the averaged estimate,
    computed from the final population snapshots of a run."""
    snaps = final_snapshots(run_dir)
    acc: dict[tuple[int, int], complex] = {}
    for snap in snaps:
        for loc, c in snap.counts.items():
            acc[loc] = acc.get(loc, 0) + c
    norm = len(snaps) * snaps[0].n_diag
    support = set(acc) | {(j, i) for i, j in acc}
    sq = 0.0
    for i, j in support:
        d = (acc.get((i, j), 0) - acc.get((j, i), 0).conjugate()) / norm
        sq += abs(d) ** 2
    return math.sqrt(sq)


def hermiticity_records(run_dirs) -> list[tuple[int, int, float]]:
    """(n, n_diag, eps) per run from final snapshots."""
    out = []
    for d in run_dirs:
        meta = read_meta(d)
        out.append((int(meta["config"]["n"]), int(meta["config"]["n_diag"]),
                    anti_hermiticity_error(d)))
    return out
