"""Seeded alpha sweeps and the two generalization-curve recipes."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Activation, Method, PoleError
from .sgd_lab import TeacherStudentConfig, run_experiment, with_
from .statmech import GenCurvePoint, eps_id_ord, eps_id_wn, eps_relu_ord

DEFAULT_ALPHAS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
# neighbourhoods of the poles left out of simulated grids
LINEAR_EXCLUDE = (0.95, 1.05)
RELU_EXCLUDE = (1.9, 2.0)

# training recipes (step size, per-epoch decay, initial scale) tuned at N = 1024
LINEAR_BN = dict(M=32, eta=1.0, lr_decay=0.998, init_scale=1e-2, epochs=3000, tol=1e-9)
RELU_NORMALIZED = dict(M=16, eta=1.0, lr_decay=0.998, init_scale=0.1, gamma_init=0.01, epochs=1500, tol=1e-9)
VANILLA_LINEAR = dict(M=32, eta=16.0, lr_decay=0.995, init_scale=1e-3, epochs=2000, tol=1e-6)
VANILLA_RELU = dict(M=32, eta=16.0, lr_decay=0.995, init_scale=1e-3, epochs=3000, tol=1e-6)


@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    gen_error_sim: float
    gen_error_theory: float
    method: Method
    M: int
    zeta: float
    seed: int
    diverged: bool = False
    gen_error_mc: float = float("nan")


def exclude_poles(alphas, act) -> list[float]:
    lo, hi = LINEAR_EXCLUDE if Activation(act) is Activation.IDENTITY else RELU_EXCLUDE
    return [a for a in alphas if not lo <= a <= hi]


def theory_for(cfg: TeacherStudentConfig) -> float:
    """Reference curve value for a configuration, NaN where none applies."""
    a, S = cfg.alpha, cfg.S
    try:
        if cfg.act is Activation.IDENTITY:
            if cfg.method is Method.VANILLA:
                return eps_id_ord(a, S)
            if cfg.method is Method.BN:
                return eps_id_wn(a, 1.0 / (2 * cfg.M), S)
            if cfg.method is Method.WN_GAMMA_DECAY and cfg.zeta > 0:
                return eps_id_wn(a, cfg.zeta, S)
            return eps_id_ord(a, S)
        if cfg.method is Method.VANILLA and a < 2:
            return eps_relu_ord(a, S)
    except PoleError:
        pass
    return float("nan")


def _run_point(cfg: TeacherStudentConfig) -> SweepPoint:
    r = run_experiment(cfg)
    return SweepPoint(
        alpha=cfg.alpha,
        gen_error_sim=r.gen_error,
        gen_error_theory=theory_for(cfg),
        method=cfg.method,
        M=cfg.M,
        zeta=cfg.zeta,
        seed=cfg.seed,
        diverged=r.diverged,
        gen_error_mc=r.gen_error_mc,
    )


def alpha_sweep(base: TeacherStudentConfig, alphas, jobs: int = 1) -> list[SweepPoint]:
    """One run per alpha.  Runs are independent; results come back in grid order."""
    cfgs = [with_(base, alpha=float(a)) for a in alphas]
    if jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_point, cfgs))
    return [_run_point(c) for c in cfgs]


def seed_average(base: TeacherStudentConfig, alphas, seeds, jobs: int = 1) -> list[SweepPoint]:
    """Per-alpha mean of the simulated error over several data sets."""
    runs = [alpha_sweep(with_(base, seed=s), alphas, jobs) for s in seeds]
    out = []
    for points in zip(*runs):
        sims = [p.gen_error_sim for p in points]
        p0 = points[0]
        out.append(SweepPoint(
            alpha=p0.alpha,
            gen_error_sim=float(np.mean(sims)),
            gen_error_theory=p0.gen_error_theory,
            method=p0.method,
            M=p0.M,
            zeta=p0.zeta,
            seed=p0.seed,
            diverged=any(p.diverged for p in points),
            gen_error_mc=float(np.mean([p.gen_error_mc for p in points])),
        ))
    return out


def theory_curve(kind: str, alphas, S: float, zeta: float = 0.0) -> list[GenCurvePoint]:
    points = []
    for a in alphas:
        if kind == "id_ord":
            eps, method = eps_id_ord(a, S), Method.VANILLA
        elif kind == "relu_ord":
            eps, method = eps_relu_ord(a, S), Method.VANILLA
        elif kind == "id_wn":
            eps, method = eps_id_wn(a, zeta, S), Method.WN_GAMMA_DECAY
        else:
            raise ValueError(f"unknown theory curve {kind!r}")
        points.append(GenCurvePoint(a, eps, method, S, zeta))
    return points


# ---------------------------------------------------------------------------
# figure recipes
# ---------------------------------------------------------------------------

def figure1a(alphas=DEFAULT_ALPHAS, S: float = 0.25, N: int = 1024, M: int = 32,
             seed: int = 42, jobs: int = 1, recipe: dict | None = None) -> dict:
    """Linear student: three theory curves and BN simulation points."""
    recipe = {**LINEAR_BN, "M": M, **(recipe or {})}
    curves = {
        "vanilla_theory": theory_curve("id_ord", exclude_poles(alphas, "identity"), S),
        "wn_zeta_half_over_M": theory_curve("id_wn", alphas, S, 1.0 / (2 * recipe["M"])),
        "wn_zeta_0.25": theory_curve("id_wn", alphas, S, 0.25),
    }
    base = TeacherStudentConfig(N=N, S=S, seed=seed, act="identity", method="bn", **recipe)
    sims = {"bn_sim": alpha_sweep(base, exclude_poles(alphas, "identity"), jobs)}
    return {"theory": curves, "sims": sims}


def figure1b(alphas=DEFAULT_ALPHAS, S: float = 0.25, N: int = 1024, M: int = 16,
             seed: int = 42, jobs: int = 1, recipe: dict | None = None) -> dict:
    """ReLU student: theory, noiseless lower bound, WN+gamma-decay and BN simulation points."""
    recipe = {**RELU_NORMALIZED, "M": M, **(recipe or {})}
    grid = exclude_poles(alphas, "relu")
    curves = {
        "relu_theory": theory_curve("relu_ord", grid, S),
        "relu_lower_bound": theory_curve("relu_ord", grid, 0.0),
    }
    zeta = 1.0 / (4 * recipe["M"])
    wn = TeacherStudentConfig(N=N, S=S, seed=seed, act="relu", method="wn_gamma_decay", zeta=zeta, **recipe)
    bn = TeacherStudentConfig(N=N, S=S, seed=seed, act="relu", method="bn", **recipe)
    sims = {
        "wn_gd_sim": alpha_sweep(wn, grid, jobs),
        "bn_sim": alpha_sweep(bn, grid, jobs),
    }
    return {"theory": curves, "sims": sims}


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

SWEEP_HEADER = ["alpha", "gen_error_sim", "gen_error_theory", "method", "M", "zeta", "seed"]


def _g(x: float) -> str:
    return f"{x:.17g}"


def write_sweep_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for p in points:
            writer.writerow([_g(p.alpha), _g(p.gen_error_sim), _g(p.gen_error_theory),
                             p.method.value, p.M, _g(p.zeta), p.seed])


def read_curve_csv(path, S: float | None = None) -> list[GenCurvePoint]:
    """Parse either a theory curve or a sweep CSV back into curve points.

    Sweep files carry no noise column; pass ``S`` for them.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        if "eps" in r:
            out.append(GenCurvePoint(float(r["alpha"]), float(r["eps"]), r["method"],
                                     float(r["S"]), float(r["zeta"])))
        else:
            s = float("nan") if S is None else S
            out.append(GenCurvePoint(float(r["alpha"]), float(r["gen_error_sim"]), r["method"],
                                     s, float(r["zeta"])))
    return out


def relative_errors(points, reference) -> list[float]:
    return [p / r - 1.0 if r and math.isfinite(r) else float("nan") for p, r in zip(points, reference)]
