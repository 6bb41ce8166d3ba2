"""Declarative run configuration: TOML parsing and validation.

A run file has three sections.  [problem] declares the test problem
(kind, dimensions, noise level, seed, regularizer choice); [solver] the
method and its knobs, with the regularization-parameter rule in
[solver.lambda]; [output] the artifact directory and log options.  The full
grammar is documented in the README.  The RGKS_OUT_DIR environment variable
overrides the output directory; nothing else is read from the environment.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .compression import KINDS, CompressionStrategy
from .errors import ConfigError
from .mm import DEFAULT_GRID
from .solvers import LambdaRule, SolverConfig

PROBLEM_KINDS = ("deblur", "tomo", "streaming-tomo", "dynamic", "identity")
METHODS = ("mm-gks", "rmm-gks", "s-rmm-gks")
PSI_KINDS = ("tv2d", "tv2d+t", "identity")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "deblur"
    n: int = 32
    sigma: float = 1e-3
    seed: int = 0
    psi: str = "tv2d"
    psf: str = "motion"
    psf_size: int = 7
    angles: tuple = (0.0, 180.0, 2.0)  # (start, stop, step) or explicit list
    detectors: int | None = None
    n_t: int = 4
    angles_per_frame: int = 12
    motion: float = 1.0

    def angle_array(self) -> np.ndarray:
        if len(self.angles) == 3 and not isinstance(self.angles[0], (list, tuple)):
            start, stop, step = self.angles
            return np.arange(float(start), float(stop), float(step))
        return np.asarray(self.angles, dtype=float)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "rgks-out"
    verbosity: str = "info"
    timing: bool = False
    ssim: bool = True
    figures: bool = True


@dataclass(frozen=True)
class RunConfig:
    method: str
    problem: ProblemSpec
    solver: SolverConfig
    output: OutputSpec
    name: str = "run"

    def out_dir(self) -> Path:
        override = os.environ.get("RGKS_OUT_DIR")
        return Path(override) if override else Path(self.output.dir)


def _take(table: dict, key, default):
    return table.pop(key, default)


def _opt_int(table: dict, key):
    v = table.pop(key, None)
    return None if v is None else int(v)


def _opt_float(table: dict, key):
    v = table.pop(key, None)
    return None if v is None else float(v)


def _reject_unknown(table: dict, section: str):
    if table:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(table)}")


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config does not parse: {exc}") from None
    cfg = config_from_dict(doc)
    return RunConfig(cfg.method, cfg.problem, cfg.solver, cfg.output, name=path.stem)


def config_from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    prob_tbl = dict(doc.pop("problem", {}))
    solver_tbl = dict(doc.pop("solver", {}))
    out_tbl = dict(doc.pop("output", {}))
    if doc:
        raise ConfigError(f"unknown top-level sections: {sorted(doc)}")

    kind = _take(prob_tbl, "kind", "deblur")
    if kind not in PROBLEM_KINDS:
        raise ConfigError(f"problem.kind must be one of {PROBLEM_KINDS}, got {kind!r}")
    psi = _take(prob_tbl, "psi", "tv2d+t" if kind == "dynamic" else "tv2d")
    if psi not in PSI_KINDS:
        raise ConfigError(f"problem.psi must be one of {PSI_KINDS}, got {psi!r}")
    angles = _take(prob_tbl, "angles", (0.0, 180.0, 2.0))
    if isinstance(angles, dict):
        angles = (angles.get("start", 0.0), angles.get("stop", 180.0), angles.get("step", 1.0))
    problem = ProblemSpec(
        kind=kind,
        n=int(_take(prob_tbl, "n", 32)),
        sigma=float(_take(prob_tbl, "sigma", 1e-3)),
        seed=int(_take(prob_tbl, "seed", 0)),
        psi=psi,
        psf=str(_take(prob_tbl, "psf", "motion")),
        psf_size=int(_take(prob_tbl, "psf_size", 7)),
        angles=tuple(angles),
        detectors=_opt_int(prob_tbl, "detectors"),
        n_t=int(_take(prob_tbl, "n_t", 4)),
        angles_per_frame=int(_take(prob_tbl, "angles_per_frame", 12)),
        motion=float(_take(prob_tbl, "motion", 1.0)),
    )
    if problem.sigma < 0.0:
        raise ConfigError("problem.sigma must be nonnegative")
    _reject_unknown(prob_tbl, "problem")

    method = _take(solver_tbl, "method", "rmm-gks")
    if method not in METHODS:
        raise ConfigError(f"solver.method must be one of {METHODS}, got {method!r}")
    if method == "s-rmm-gks" and kind != "streaming-tomo":
        raise ConfigError("s-rmm-gks requires problem.kind = 'streaming-tomo'")

    lam_tbl = dict(_take(solver_tbl, "lambda", {}))
    mode = _take(lam_tbl, "mode", "gcv")
    value = _take(lam_tbl, "value", None)
    grid = _take(lam_tbl, "grid", list(DEFAULT_GRID))
    _reject_unknown(lam_tbl, "solver.lambda")
    if len(grid) != 3:
        raise ConfigError("solver.lambda.grid must be [min, max, count]")
    try:
        lam = LambdaRule(mode=mode, value=None if value is None else float(value),
                         grid=(float(grid[0]), float(grid[1]), int(grid[2])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    comp_kind = _take(solver_tbl, "compression", "tsvd")
    if comp_kind not in KINDS:
        raise ConfigError(f"solver.compression must be one of {KINDS}, got {comp_kind!r}")
    try:
        compression = CompressionStrategy(
            kind=comp_kind,
            rbd_tol=float(_take(solver_tbl, "rbd_tol", 1e-5)),
            rbd_maxdim=_opt_int(solver_tbl, "rbd_maxdim"),
            soc_tol=float(_take(solver_tbl, "soc_tol", 1.0)),
            soc_maxdim=_opt_int(solver_tbl, "soc_maxdim"),
            sec_lambda=_opt_float(solver_tbl, "sec_lambda"),
            sec_inner_iters=int(_take(solver_tbl, "sec_inner_iters", 10)),
        )
        solver = SolverConfig(
            ell0=_opt_int(solver_tbl, "ell0"),
            k_min=int(_take(solver_tbl, "k_min", 5)),
            k_max=int(_take(solver_tbl, "k_max", 25)),
            i_max=int(_take(solver_tbl, "i_max", 10)),
            inner_max=_opt_int(solver_tbl, "inner_max"),
            max_iters=int(_take(solver_tbl, "max_iters", 100)),
            tol1=float(_take(solver_tbl, "tol1", 1e-5)),
            epsilon=float(_take(solver_tbl, "epsilon", 1e-2)),
            q=float(_take(solver_tbl, "q", 1.0)),
            lam=lam,
            compression=compression,
            seed=int(_take(solver_tbl, "seed", problem.seed)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _reject_unknown(solver_tbl, "solver")

    output = OutputSpec(
        dir=str(_take(out_tbl, "dir", "rgks-out")),
        verbosity=str(_take(out_tbl, "verbosity", "info")),
        timing=bool(_take(out_tbl, "timing", False)),
        ssim=bool(_take(out_tbl, "ssim", True)),
        figures=bool(_take(out_tbl, "figures", True)),
    )
    _reject_unknown(out_tbl, "output")
    return RunConfig(method, problem, solver, output)
