"""Config-driven experiment execution: build, solve, persist.

One run produces, inside its output directory: log.csv (pinned header),
reconstruction.rimg (raw float64) with reconstruction.pgm previews, a final
basis checkpoint for the recycling methods, per-block checkpoints for
streaming runs, and rendered figures.  Two runs of the same config produce
byte-identical log.csv and checkpoint files; wall-clock timing in the ms
column is opt-in (output.timing) because it breaks that guarantee.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import fileio, problems, report
from .config import ProblemSpec, RunConfig
from .errors import ConfigError, RgksError
from .operators import IdentityOperator
from .problems import TestProblem
from .regularizers import make_psi_2d, make_psi_dynamic
from .solvers import SolverResult, mm_gks, rmm_gks, s_rmm_gks

log = logging.getLogger(__name__)


def build_problem(spec: ProblemSpec) -> TestProblem:
    if spec.kind == "deblur":
        prob = problems.deblur_problem(spec.n, spec.psf, spec.psf_size, spec.sigma, spec.seed)
    elif spec.kind == "tomo":
        prob = problems.tomo_problem(spec.n, spec.angle_array(), spec.sigma, spec.seed, spec.detectors)
    elif spec.kind == "streaming-tomo":
        prob = problems.streaming_tomo_problem(spec.n, spec.sigma, spec.seed, n_r=spec.detectors)
    elif spec.kind == "dynamic":
        prob = problems.dynamic_problem(spec.n, spec.n_t, spec.angles_per_frame, spec.sigma,
                                         spec.seed, spec.motion)
    elif spec.kind == "identity":
        prob = problems.identity_problem(spec.n, spec.sigma, spec.seed)
    else:  # unreachable after config validation
        raise ConfigError(f"unknown problem kind {spec.kind!r}")
    return _with_psi(prob, spec)


def _with_psi(prob: TestProblem, spec: ProblemSpec) -> TestProblem:
    n = spec.n
    if spec.psi == "identity":
        prob.psi = IdentityOperator(prob.operator.n)
    elif spec.psi == "tv2d":
        if prob.n_t > 1:
            raise ConfigError("psi = 'tv2d' needs a single-frame problem; use 'tv2d+t'")
        prob.psi = make_psi_2d(n, n)
    elif spec.psi == "tv2d+t":
        if prob.n_t == 1:
            raise ConfigError("psi = 'tv2d+t' needs a dynamic problem")
        prob.psi = make_psi_dynamic(n, n, prob.n_t)
    prob.psi.counter.reset()
    return prob


def execute(config: RunConfig) -> tuple[SolverResult, TestProblem, Path]:
    """Run one configuration and write all artifacts; returns the result."""
    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    prob = build_problem(config.problem)
    metrics = prob.metrics_for(with_ssim=config.output.ssim)
    clock = time.perf_counter if config.output.timing else None

    if config.method == "mm-gks":
        result = mm_gks(prob.operator, prob.psi, prob.d, config.solver, metrics=metrics, clock=clock)
    elif config.method == "rmm-gks":
        result = rmm_gks(prob.operator, prob.psi, prob.d, config.solver, metrics=metrics, clock=clock)
    else:  # s-rmm-gks; config validation pinned the problem kind
        def checkpoint_block(j, x, V, lam):
            fileio.write_checkpoint(out / f"checkpoint_block_{j:03d}.rgks", V, x, lam)

        result = s_rmm_gks(prob.blocks, prob.psi, config.solver, metrics=metrics, clock=clock,
                           on_block_done=checkpoint_block)

    _persist(config, prob, result, out)
    return result, prob, out


def _persist(config: RunConfig, prob: TestProblem, result: SolverResult, out: Path) -> None:
    report.write_log_csv(out / "log.csv", result.log)
    fileio.write_rimg(out / "reconstruction.rimg", result.x, prob.n_x, prob.n_y, prob.n_t)
    npix = prob.n_x * prob.n_y
    for t in range(prob.n_t):
        frame = result.x[t * npix:(t + 1) * npix].reshape(prob.n_y, prob.n_x)
        suffix = f"_t{t:03d}" if prob.n_t > 1 else ""
        fileio.write_pgm(out / f"reconstruction{suffix}.pgm", frame)
    if config.method in ("rmm-gks", "s-rmm-gks"):
        fileio.write_checkpoint(out / "checkpoint_final.rgks", result.basis, result.x, result.lam)
    if config.output.figures:
        report.render_history_figure(result.log, out / "history.png")
        report.render_reconstruction_figure(
            result.x, prob.x_true, prob.n_x, prob.n_y, out / "reconstruction.png",
            n_t=prob.n_t, frame=prob.n_t // 2,
        )
    final = result.log[-1] if result.log else None
    log.info(
        "run %s finished: %d iterations, converged=%s, final rre=%s",
        config.name, result.iterations, result.converged,
        "n/a" if final is None else f"{final.rre:.4g}",
    )


def run(config: RunConfig) -> int:
    """Execute one run; returns a process exit status."""
    try:
        execute(config)
    except ConfigError:
        raise
    except RgksError as exc:
        log.error("solver failed: %s", exc)
        return 1
    return 0


def compare(configs: list[RunConfig], out_dir: Path) -> list[dict]:
    """Run several configs on a shared problem seed and tabulate final quality.

    Each run keeps its own artifact directory; the comparison summary
    (CSV + markdown + overlay figure) lands in out_dir.
    """
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    seeds = {c.problem.seed for c in configs}
    if len(seeds) != 1:
        raise ConfigError(f"compare requires configs to share a problem seed, got {sorted(seeds)}")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    histories = {}
    for cfg in configs:
        result, prob, _ = execute(cfg)
        final = result.log[-1]
        label = f"{cfg.name}:{cfg.method}"
        if cfg.method in ("rmm-gks", "s-rmm-gks"):
            label += f"/{cfg.solver.compression.kind}"
        histories[label] = result.log
        rows.append(
            {
                "run": cfg.name,
                "method": cfg.method,
                "compression": cfg.solver.compression.kind if cfg.method != "mm-gks" else "-",
                "sigma": float(cfg.problem.sigma),
                "iters": result.iterations,
                "final_rre": float(final.rre),
                "final_ssim": float(final.ssim),
                "final_lambda": float(final.lam),
            }
        )
    report.write_summary_csv(out_dir / "summary.csv", rows)
    table = report.markdown_table(rows)
    (out_dir / "summary.md").write_text(table)
    report.render_compare_figure(histories, out_dir / "compare.png")
    return rows
