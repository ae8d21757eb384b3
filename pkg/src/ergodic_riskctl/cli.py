"""Command-line entry point.

Reads a JSON config, runs one of {solve, verify, sweep, simulate, probe}
and writes CSV artifacts plus a run_meta.json echoing the resolved config.
Exit codes: 0 success / PASS, 1 config or parse error, 2 FAIL verdict,
3 numerical or assumption failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .boundary import solve_boundaries, theta_sweep, value_gradient, verify_hjb
from .errors import AssumptionError, InvalidModelError, NumericsError
from .model import ModelSpec
from .sim import PathConfig, optimality_probe, reflected_cost_paths

logger = logging.getLogger(__name__)

_FMT = "%.17g"
_COMMANDS = ("solve", "verify", "sweep", "simulate", "probe")


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class RunConfig:
    command: str
    model: dict
    theta: Optional[float] = None
    thetas: Optional[list] = None
    solver: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _check_keys(d, {"command", "model", "theta", "thetas", "solver",
                        "simulation", "probe", "output_dir"}, "config")
        command = d.get("command")
        if command not in _COMMANDS:
            raise ConfigError(f"command must be one of {_COMMANDS}, got {command!r}")
        model = d.get("model")
        if not isinstance(model, dict):
            raise ConfigError("config requires a 'model' section")
        _check_keys(model, {"form", "params"}, "model")
        solver = d.get("solver", {})
        _check_keys(solver, {"grid_size", "root_tol", "fd_n"}, "solver")
        simulation = d.get("simulation", {})
        _check_keys(simulation, {"x0", "T", "dt", "n_paths", "seed",
                                 "burn_in", "alpha", "beta"}, "simulation")
        probe = d.get("probe", {})
        _check_keys(probe, {"offsets"}, "probe")
        theta = d.get("theta")
        thetas = d.get("thetas")
        if command == "sweep":
            if not thetas:
                raise ConfigError("sweep requires 'thetas'")
        elif theta is None:
            raise ConfigError(f"{command} requires 'theta'")
        return cls(command=command, model=model,
                   theta=None if theta is None else float(theta),
                   thetas=None if thetas is None else [float(t) for t in thetas],
                   solver=dict(solver), simulation=dict(simulation),
                   probe=dict(probe), output_dir=str(d.get("output_dir", "out")))

    def to_dict(self) -> dict:
        out = {"command": self.command, "model": self.model,
               "output_dir": self.output_dir}
        if self.theta is not None:
            out["theta"] = self.theta
        if self.thetas is not None:
            out["thetas"] = self.thetas
        if self.solver:
            out["solver"] = self.solver
        if self.simulation:
            out["simulation"] = self.simulation
        if self.probe:
            out["probe"] = self.probe
        return out


def _atomic_write(path: str, write_fn) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            write_fn(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list, rows: list) -> None:
    def write(f):
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_FMT % v if isinstance(v, float) else v for v in row])
    _atomic_write(path, write)


def _path_config(cfg: RunConfig, require_barriers: bool,
                 seed_override: Optional[int]) -> PathConfig:
    sim = cfg.simulation
    if require_barriers and ("alpha" not in sim or "beta" not in sim):
        raise ConfigError("simulate requires 'alpha' and 'beta' in the "
                          "simulation section")
    try:
        return PathConfig(
            x0=float(sim.get("x0", 0.0)),
            alpha=float(sim.get("alpha", 0.0)),
            beta=float(sim.get("beta", 1.0)),
            horizon=float(sim.get("T", 200.0)),
            dt=float(sim.get("dt", 1e-3)),
            n_paths=int(sim.get("n_paths", 10_000)),
            seed=int(seed_override if seed_override is not None
                     else sim.get("seed", 0)),
            burn_in=float(sim.get("burn_in", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run(cfg: RunConfig, seed_override: Optional[int] = None,
        n_threads: int = 0) -> int:
    """Execute the configured command; returns the process exit status."""
    model = ModelSpec.from_dict(cfg.model)
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    solver_kw = {}
    if "grid_size" in cfg.solver:
        solver_kw["grid_size"] = int(cfg.solver["grid_size"])
    if "root_tol" in cfg.solver:
        solver_kw["beta_tol"] = float(cfg.solver["root_tol"])
    if "fd_n" in cfg.solver:
        solver_kw["fd_n"] = int(cfg.solver["fd_n"])

    meta = {"version": __version__, "config": cfg.to_dict()}
    _atomic_write(os.path.join(out, "run_meta.json"),
                  lambda f: json.dump(meta, f, indent=2, sort_keys=True))

    status = 0
    if cfg.command in ("solve", "verify"):
        sol = solve_boundaries(model, cfg.theta, **solver_kw)
        _write_csv(os.path.join(out, "boundary_solution.csv"),
                   ["alpha_star", "beta_star", "lambda_star",
                    "residual_alpha", "residual_beta", "iterations"],
                   [[sol.alpha_star, sol.beta_star, sol.lambda_star,
                     sol.residual_alpha, sol.residual_beta, sol.iterations]])
        wx = value_gradient(sol, model, cfg.theta, sol.eigen.grid)
        _write_csv(os.path.join(out, "eigenfunction.csv"),
                   ["x", "phi", "phi_deriv", "w_x"],
                   [[float(x), float(p), float(d), float(w)] for x, p, d, w in
                    zip(sol.eigen.grid, sol.eigen.phi, sol.eigen.phi_deriv, wx)])
        if cfg.command == "verify":
            report = verify_hjb(sol, model, cfg.theta)
            _write_csv(os.path.join(out, "hjb_report.csv"),
                       ["quantity", "value"],
                       [[name, float(v)] for name, v in report.rows()]
                       + [["verdict", "PASS" if report.passed else "FAIL"]])
            status = 0 if report.passed else 2
    elif cfg.command == "sweep":
        table = theta_sweep(model, cfg.thetas, **solver_kw)
        table.to_csv(os.path.join(out, "sweep.csv"), fmt=_FMT)
        if any(r.status != "ok" for r in table.rows):
            status = 3
    elif cfg.command == "simulate":
        pcfg = _path_config(cfg, require_barriers=True, seed_override=seed_override)
        batch = reflected_cost_paths(model, cfg.theta, pcfg, n_threads=n_threads)
        batch.to_csv(os.path.join(out, "paths.csv"), fmt=_FMT)
        _atomic_write(os.path.join(out, "simulation_summary.json"),
                      lambda f: json.dump(batch.summary(), f, indent=2,
                                          sort_keys=True))
    elif cfg.command == "probe":
        sol = solve_boundaries(model, cfg.theta, **solver_kw)
        offsets = [tuple(map(float, o)) for o in
                   cfg.probe.get("offsets",
                                 [(-0.25, 0.0), (0.25, 0.0),
                                  (0.0, -0.25), (0.0, 0.25)])]
        pcfg = _path_config(cfg, require_barriers=False, seed_override=seed_override)
        rows = optimality_probe(model, cfg.theta, sol, offsets, pcfg,
                                n_threads=n_threads)
        _write_csv(os.path.join(out, "probe.csv"),
                   ["d_alpha", "d_beta", "rate", "ci_halfwidth",
                    "rate_minus_lambda_star", "eigen_lambda"],
                   [[r.d_alpha, r.d_beta, r.rate, r.ci_halfwidth,
                     r.rate_minus_lambda_star, r.eigen_lambda] for r in rows])
    return status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    level = os.environ.get("ERGODIC_RISKCTL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    p = _Parser(prog="ergodic-riskctl",
                description="Risk-sensitive ergodic reflection-control solver")
    p.add_argument("--config", required=True, help="path to JSON config")
    p.add_argument("--command", choices=_COMMANDS,
                   help="override the command in the config")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads for simulation (0 = auto; "
                        "must not change results)")
    args = p.parse_args(argv)

    try:
        with open(args.config) as f:
            raw = json.load(f)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: config parse failure at line {exc.lineno}, "
              f"column {exc.colno}: {exc.msg}", file=sys.stderr)
        return 1

    try:
        if args.command:
            raw["command"] = args.command
        if args.out:
            raw["output_dir"] = args.out
        cfg = RunConfig.from_dict(raw)
    except (ConfigError, InvalidModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        return run(cfg, seed_override=args.seed, n_threads=args.threads)
    except (ConfigError, InvalidModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return 3
    except (NumericsError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
