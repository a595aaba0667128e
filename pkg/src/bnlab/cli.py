"""bnlab <command> --config CONFIG --out DIR [--seed N] [--jobs K]

Commands: dynamics, simulate, statmech, decompose, figure1a, figure1b.
Configs are JSON objects; every key is optional and falls back to the
defaults below.  ``--out`` may be replaced by the BNLAB_OUT environment
variable.  Exit status: 0 success, 1 configuration error, 2 a required run
diverged.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .core import Activation, DomainError, Method
from .dynamics import DynamicsParams, integrate
from .experiments import (
    DEFAULT_ALPHAS,
    alpha_sweep,
    figure1a,
    figure1b,
    theory_curve,
    write_sweep_csv,
)
from .sgd_lab import TeacherStudentConfig, make_dataset, run_experiment
from .statmech import write_curve_csv

COMMANDS = ("dynamics", "simulate", "statmech", "decompose", "figure1a", "figure1b")
OUT_ENV = "BNLAB_OUT"

DEFAULTS = {
    "dynamics": {"name": "run", "eta": 0.05, "zeta": 0.25, "act": "relu", "method": "bn",
                 "initial": [0.5, 0.3, 1.0], "t_end": 200.0, "dt": 0.01, "record_every": 100,
                 "second_order": True},
    "simulate": {"name": "run", "N": 1024, "M": 32, "alpha": 0.5, "S": 0.25, "zeta": 0.0,
                 "eta": 16.0, "act": "identity", "method": "sgd", "epochs": 2000,
                 "lr_decay": 0.995, "init_scale": 1e-3, "gamma_init": 1.0, "tol": 1e-6,
                 "alphas": None},
    "statmech": {"S": 0.25, "alphas": [a for a in DEFAULT_ALPHAS if a != 1.0],
                 "curves": [{"name": "vanilla_id", "kind": "id_ord"},
                            {"name": "vanilla_relu", "kind": "relu_ord"},
                            {"name": "wn_zeta_0.25", "kind": "id_wn", "zeta": 0.25}]},
    "decompose": {"N": 256, "alpha": 8.0, "M": 64, "S": 0.25, "n_mc": 100000,
                  "loss": "identity", "convention": "no_bias"},
    "figure1a": {"alphas": list(DEFAULT_ALPHAS), "S": 0.25, "N": 1024, "M": 32, "recipe": {}},
    "figure1b": {"alphas": list(DEFAULT_ALPHAS), "S": 0.25, "N": 1024, "M": 16, "recipe": {}},
}


class ConfigError(Exception):
    pass


class DivergenceError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(command: str, path) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(user) - set(cfg) - {"command"})
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        cfg.update(user)
    return cfg


def _diagnose(command: str, cfg: dict) -> list[str]:
    out = []
    alphas = cfg.get("alphas")
    if command in ("statmech", "figure1a", "figure1b") or alphas is not None:
        if not isinstance(alphas, list) or not alphas:
            out.append("alpha grid must be a non-empty list")
        elif any(not isinstance(a, (int, float)) or a <= 0 for a in alphas):
            out.append("alpha values must be positive numbers")
    if "M" in cfg and (not isinstance(cfg["M"], int) or cfg["M"] < 2):
        out.append("M >= 2 required")
    if "S" in cfg and not (isinstance(cfg["S"], (int, float)) and cfg["S"] >= 0):
        out.append("S >= 0 required")
    for key in ("act",):
        if key in cfg and cfg[key] not in [a.value for a in Activation]:
            out.append(f"unknown activation {cfg[key]!r}")
    if "method" in cfg and cfg["method"] not in [m.value for m in Method]:
        out.append(f"unknown method {cfg['method']!r}")

    if isinstance(alphas, list) and alphas and all(isinstance(a, (int, float)) for a in alphas):
        relu_theory = command == "figure1b" or (
            command == "statmech" and any(c.get("kind") == "relu_ord" for c in cfg.get("curves", []))
        ) or (command == "simulate" and cfg.get("act") == "relu" and cfg.get("method") == "sgd")
        if relu_theory and any(a >= 2 for a in alphas):
            out.append("alpha >= 2 requested with the ReLU theory curve: it diverges at the alpha = 2 pole")
        id_theory = command == "statmech" and any(c.get("kind") == "id_ord" for c in cfg.get("curves", []))
        if id_theory and any(a == 1 for a in alphas):
            out.append("alpha = 1 requested with the linear least-squares curve: it diverges at that pole")

    if command == "statmech":
        for c in cfg.get("curves", []):
            if c.get("kind") not in ("id_ord", "relu_ord", "id_wn"):
                out.append(f"unknown curve kind {c.get('kind')!r}")
            if c.get("kind") == "id_wn" and not c.get("zeta", 0) > 0:
                out.append("id_wn curves need zeta > 0")
    if command == "simulate":
        try:
            _sim_config(cfg, 42)
        except (DomainError, TypeError, ValueError) as exc:
            out.append(str(exc))
    if command == "dynamics":
        try:
            DynamicsParams(cfg["eta"], cfg["zeta"], cfg["act"], cfg["method"], cfg["second_order"])
        except (DomainError, ValueError) as exc:
            out.append(str(exc))
        if len(cfg.get("initial", [])) != 3:
            out.append("initial must be [Q, R, L]")
        elif not (-1 <= cfg["initial"][1] <= 1 and cfg["initial"][0] > 0 and cfg["initial"][2] > 0):
            out.append("initial state needs Q > 0, L > 0, |R| <= 1")
        if not cfg.get("t_end", 0) > 0 or not cfg.get("dt", 0) > 0:
            out.append("t_end and dt must be positive")
    if command == "decompose":
        if cfg.get("loss") not in ("identity", "softplus"):
            out.append("loss must be identity or softplus")
        if cfg.get("convention") not in ("no_bias", "bias"):
            out.append("convention must be no_bias or bias")
        if cfg.get("n_mc", 0) < 100:
            out.append("n_mc >= 100 required")
    return out


def validate_config(config_path, command: str | None = None) -> list[str]:
    """All problems with a config file, without running anything.

    The command comes from the argument or from a ``"command"`` key in the file.
    """
    try:
        raw = json.loads(Path(config_path).read_text())
    except FileNotFoundError:
        return [f"config file not found: {config_path}"]
    except json.JSONDecodeError as exc:
        return [f"config is not valid JSON: {exc}"]
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    command = command or raw.get("command")
    if command not in COMMANDS:
        return [f"unknown or missing command {command!r}"]
    try:
        cfg = load_config(command, config_path)
    except ConfigError as exc:
        return [str(exc)]
    return _diagnose(command, cfg)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _sim_config(cfg: dict, seed: int) -> TeacherStudentConfig:
    keys = ("N", "M", "alpha", "S", "zeta", "eta", "act", "method", "epochs",
            "lr_decay", "init_scale", "gamma_init", "tol")
    return TeacherStudentConfig(seed=seed, **{k: cfg[k] for k in keys})


def _cmd_dynamics(cfg, out: Path, seed: int, jobs: int) -> list[str]:
    params = DynamicsParams(cfg["eta"], cfg["zeta"], cfg["act"], cfg["method"], cfg["second_order"])
    traj = integrate(cfg["initial"], params, cfg["t_end"], cfg["dt"], cfg["record_every"])
    name = f"trajectory_{cfg['name']}.csv"
    traj.to_csv(out / name)
    if traj.diverged:
        raise DivergenceError(f"integration diverged at t={traj.times[-1]:g}")
    return [name]


def _cmd_simulate(cfg, out: Path, seed: int, jobs: int) -> list[str]:
    base = _sim_config(cfg, seed)
    if cfg.get("alphas"):
        points = alpha_sweep(base, cfg["alphas"], jobs)
        name = f"curve_{cfg['name']}.csv"
        write_sweep_csv(out / name, points)
        if any(p.diverged for p in points):
            raise DivergenceError("at least one run diverged")
        return [name]
    result = run_experiment(base)
    name = f"trajectory_{cfg['name']}.csv"
    result.to_csv(out / name)
    if result.diverged:
        raise DivergenceError("run diverged")
    return [name]


def _cmd_statmech(cfg, out: Path, seed: int, jobs: int) -> list[str]:
    names = []
    for c in cfg["curves"]:
        pts = theory_curve(c["kind"], cfg["alphas"], cfg["S"], c.get("zeta", 0.0))
        name = f"curve_{c['name']}.csv"
        write_curve_csv(out / name, pts)
        names.append(name)
    return names


def _cmd_decompose(cfg, out: Path, seed: int, jobs: int) -> list[str]:
    from .bn_decompose import decompose_check
    from .sgd_lab import StudentState

    base = TeacherStudentConfig(N=cfg["N"], M=cfg["M"], alpha=cfg["alpha"], S=cfg["S"], seed=seed)
    teacher, X, y = make_dataset(base)
    w = np.linalg.lstsq(X, y, rcond=None)[0]
    h = X @ w
    if cfg["convention"] == "bias":
        z = (h - h.mean()) / h.std()
    else:
        z = h / np.sqrt(np.mean(h * h))
    gamma = float(z @ y / (z @ z))  # least-squares scale under PN
    report = decompose_check(X, y, StudentState(w, gamma), cfg["M"], cfg["n_mc"], seed,
                             cfg["loss"], cfg["convention"])
    report.to_json(out / "decompose_report.json")
    return ["decompose_report.json"]


def _cmd_figure(which):
    def run(cfg, out: Path, seed: int, jobs: int) -> list[str]:
        fn = figure1a if which == "a" else figure1b
        res = fn(cfg["alphas"], cfg["S"], cfg["N"], cfg["M"], seed, jobs, cfg.get("recipe") or {})
        names = []
        for key, pts in res["theory"].items():
            write_curve_csv(out / f"curve_{key}.csv", pts)
            names.append(f"curve_{key}.csv")
        diverged = False
        for key, pts in res["sims"].items():
            write_sweep_csv(out / f"curve_{key}.csv", pts)
            names.append(f"curve_{key}.csv")
            diverged |= any(p.diverged for p in pts)
        if diverged:
            raise DivergenceError("a simulation run diverged")
        return names
    return run


HANDLERS = {
    "dynamics": _cmd_dynamics,
    "simulate": _cmd_simulate,
    "statmech": _cmd_statmech,
    "decompose": _cmd_decompose,
    "figure1a": _cmd_figure("a"),
    "figure1b": _cmd_figure("b"),
}


def _write_manifest(out: Path, command: str, cfg: dict, seed: int, outputs: list[str], status: int) -> None:
    manifest = {
        "command": command,
        "config": cfg,
        "seed": seed,
        "outputs": sorted(outputs),
        "exit_status": status,
        "versions": {
            "bnlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    raise TypeError(type(x))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bnlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config; omitted keys take defaults")
    p.add_argument("--out", help=f"output directory (or ${OUT_ENV})")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.environ.get(OUT_ENV)
    if not out_dir:
        print("error: --out or $BNLAB_OUT is required", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.command, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    problems = _diagnose(args.command, cfg)
    if problems or args.jobs < 1:
        for msg in problems + (["jobs >= 1 required"] if args.jobs < 1 else []):
            print(f"config error: {msg}", file=sys.stderr)
        return 1

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    outputs: list[str] = []
    try:
        outputs = HANDLERS[args.command](cfg, out, args.seed, args.jobs)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        outputs = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
        status = 2
    except (DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    _write_manifest(out, args.command, cfg, args.seed, outputs, status)
    for name in outputs:
        print(out / name)
    return status


if __name__ == "__main__":
    sys.exit(main())
