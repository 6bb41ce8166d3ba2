"""Solver drivers: expand-only, bounded-memory enlarge/compress, and streaming.

All three share one expansion step: reweight at the current iterate, QR-factor
the projected operators, pick lambda on the projected problem, solve it, then
append the normalized normal-equations residual to the basis.  The
bounded-memory driver alternates that expansion (up to k_max columns) with a
compression back to k_min columns that re-injects the current iterate, so the
peak number of stored basis vectors never exceeds k_max.  The streaming driver
hands the compressed basis and iterate from one data block to the next.

Bookkeeping discipline: the products A V and Psi V are cached and updated one
column per expansion step, carried through compression by the mixing matrix,
and the vector Psi x is threaded through the state.  A full enlarge cycle of s
steps therefore costs exactly s forward and s adjoint applications of each of
A and Psi; compression costs none.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .compression import CompressionStrategy, reinject_solution
from .errors import Breakdown, RankDeficient, SolverError
from .linalg import (
    QRFactors,
    golub_kahan,
    qr_append_column,
    qr_factor,
    qr_square_factor,
    solve_regularized_ls,
)
from .mm import (
    DEFAULT_EPSILON,
    DEFAULT_GRID,
    DEFAULT_Q,
    compute_weights,
    gcv_grid,
    select_lambda,
    smoothed_penalty,
    total_objective,
)

log = logging.getLogger(__name__)

# ||r|| below this multiple of ||A^T d|| counts as a vanished residual.
RESIDUAL_BREAKDOWN_RTOL = 1e-14


@dataclass(frozen=True)
class LambdaRule:
    """How the regularization parameter is chosen on each projected problem."""

    mode: str = "gcv"  # "gcv" | "fixed"
    value: float | None = None
    grid: tuple[float, float, int] = DEFAULT_GRID

    def __post_init__(self):
        if self.mode not in ("gcv", "fixed"):
            raise ValueError("lambda mode must be 'gcv' or 'fixed'")
        if self.mode == "fixed" and (self.value is None or self.value < 0.0):
            raise ValueError("fixed lambda mode needs a nonnegative value")


@dataclass(frozen=True)
class SolverConfig:
    """Shared knobs for all drivers.

    ell0 (initial bidiagonalization steps) defaults to k_min.  max_iters
    bounds the expand-only driver; i_max bounds the outer enlarge/compress
    cycles; inner_max optionally caps the expansion steps per cycle below
    k_max - k_min.  The seed is recorded for provenance only: given a fixed
    problem the solvers are deterministic.
    """

    ell0: int | None = None
    k_min: int = 5
    k_max: int = 25
    i_max: int = 10
    inner_max: int | None = None
    max_iters: int = 100
    tol1: float = 1e-5
    epsilon: float = DEFAULT_EPSILON
    q: float = DEFAULT_Q
    lam: LambdaRule = field(default_factory=LambdaRule)
    compression: CompressionStrategy = field(default_factory=CompressionStrategy)
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.k_min < self.k_max):
            raise ValueError("need 0 < k_min < k_max")
        if self.tol1 <= 0.0:
            raise ValueError("tol1 must be positive")
        if self.epsilon <= 0.0 or not (0.0 < self.q <= 2.0):
            raise ValueError("need epsilon > 0 and q in (0, 2]")
        if self.ell0 is not None and self.ell0 < 1:
            raise ValueError("ell0 must be at least 1")

    @property
    def ell(self) -> int:
        return self.ell0 if self.ell0 is not None else self.k_min


@dataclass
class IterationRecord:
    """One log row per basis vector added."""

    it: int
    cycle: int
    basis_k: int
    lam: float
    objective: float
    t1: float
    rre: float
    ssim: float
    mv_a: int
    mv_at: int
    mv_psi: int
    mv_psit: int
    ms: float


@dataclass
class SolverResult:
    x: np.ndarray
    basis: np.ndarray
    log: list[IterationRecord]
    lam: float
    converged: bool
    iterations: int
    peak_basis: int


class InitResult(NamedTuple):
    V: np.ndarray
    x: np.ndarray
    p: np.ndarray
    lam: float


class EnlargeResult(NamedTuple):
    x: np.ndarray
    lam: float
    V: np.ndarray
    R_A: np.ndarray
    R_psi: np.ndarray
    p: np.ndarray
    converged: bool


def stopping_t1(x_k: np.ndarray, x_prev: np.ndarray) -> float:
    """Relative change ||x_k - x_prev|| / ||x_prev||; +inf for a zero previous iterate."""
    nrm = np.linalg.norm(x_prev)
    if nrm == 0.0:
        return np.inf
    return float(np.linalg.norm(np.asarray(x_k) - np.asarray(x_prev)) / nrm)


class _Engine:
    """Mutable run state shared by the drivers; one instance per solve."""

    def __init__(self, A, psi, d, cfg: SolverConfig, metrics=None, clock=None,
                 records=None, it0: int = 0, counter_base=(0, 0, 0, 0)):
        self.A = A
        self.psi = psi
        self.d = np.asarray(d, dtype=float).ravel()
        if self.d.shape[0] != A.m:
            raise SolverError("data length does not match the operator")
        if np.linalg.norm(self.d) == 0.0:
            raise SolverError("data vector is zero")
        if psi.n != A.n:
            raise SolverError("regularizer input dimension does not match the operator")
        self.cfg = cfg
        self.metrics = metrics
        self.clock = clock
        self.records: list[IterationRecord] = records if records is not None else []
        self.it = it0
        # Logged counts are relative to the run start, shifted by an external
        # base (used by the streaming driver to accumulate across blocks).
        c0 = _counter_snapshot(A, psi)
        self.base = tuple(b - c for b, c in zip(counter_base, c0))
        self.t0 = clock() if clock else 0.0

        self.V = None
        self.AV = None
        self.PsiV = None
        self.qr_A: QRFactors | None = None
        self.qr_psi: QRFactors | None = None
        self.x = None
        self.psi_x = None
        self.z = None
        self.lam = 0.0
        self.atd_norm = 0.0
        self.peak_basis = 0
        self.stalled = False  # residual vanished or expansion became rank deficient

    # -- seeding -----------------------------------------------------------

    def seed_from_gk(self):
        """Bidiagonalization seed plus projected least-squares starting iterate."""
        ell = min(self.cfg.ell, self.A.n, self.A.m)
        try:
            V, U, B = golub_kahan(self.A, self.d, ell)
        except Breakdown as b:
            if b.partial is None or b.partial[0].shape[1] == 0:
                raise SolverError("bidiagonalization broke down immediately (A^T d = 0?)") from None
            V, U, B = b.partial
            log.info("bidiagonalization truncated at %d of %d steps", V.shape[1], ell)
        self.V = V
        self.AV = U @ B  # exact product, no further operator applications
        self.PsiV = self.psi.apply_block(V)
        self.atd_norm = float(B[0, 0]) * float(np.linalg.norm(self.d))
        z, *_ = np.linalg.lstsq(B, U.T @ self.d, rcond=None)
        self.z = z
        self.x = V @ z
        self.psi_x = self.PsiV @ z
        self.peak_basis = V.shape[1]

    def seed_from_basis(self, V0: np.ndarray, x0: np.ndarray):
        """Adopt a recycled basis and iterate (one block of operator applies)."""
        V0 = np.asarray(V0, dtype=float)
        self.V = V0.copy()
        self.AV = self.A.apply_block(self.V)
        self.PsiV = self.psi.apply_block(self.V)
        self.x = np.asarray(x0, dtype=float).ravel().copy()
        self.psi_x = self.psi.apply(self.x)
        self.z = None
        self.atd_norm = float(np.linalg.norm(self.A.apply_adjoint(self.d)))
        self.peak_basis = V0.shape[1]

    # -- one expansion step (weights -> QR -> lambda -> solve -> residual) --

    def solve_step(self, cycle: int, expand: bool) -> tuple[float, bool]:
        """Returns (t1, converged).  Appends a basis vector when expand is set."""
        cfg = self.cfg
        w = compute_weights(self.psi_x, cfg.epsilon, cfg.q)
        if self.qr_A is None:
            self.qr_A = qr_factor(self.AV)
        self.qr_psi = qr_square_factor(np.sqrt(w)[:, None] * self.PsiV)
        rhs = self.qr_A.Q.T @ self.d
        if cfg.lam.mode == "fixed":
            lam = float(cfg.lam.value)
        else:
            lam = select_lambda(self.qr_A.R, self.qr_psi.R, rhs, gcv_grid(*cfg.lam.grid)).lam
        z = solve_regularized_ls(self.qr_A.R, self.qr_psi.R, rhs, lam)

        x_new = self.V @ z
        t1 = stopping_t1(x_new, self.x)
        avz = self.AV @ z
        psivz = self.PsiV @ z
        data_resid = avz - self.d
        misfit = float(data_resid @ data_resid)
        objective = total_objective(misfit, smoothed_penalty(psivz, cfg.epsilon, cfg.q), lam, cfg.q)

        self.x, self.psi_x, self.z, self.lam = x_new, psivz, z, lam

        converged = False
        if expand:
            converged = not self._expand_basis(data_resid, w, psivz, lam)
            self.it += 1
            self._record(cycle, objective, t1)
        if t1 <= cfg.tol1:
            converged = True
        return t1, converged

    def _expand_basis(self, data_resid, w, psivz, lam) -> bool:
        """Append the normalized reorthogonalized residual; False on breakdown."""
        r = self.A.apply_adjoint(data_resid) + lam * self.psi.apply_adjoint(w * psivz)
        r = r - self.V @ (self.V.T @ r)
        r = r - self.V @ (self.V.T @ r)
        nr = float(np.linalg.norm(r))
        if nr <= RESIDUAL_BREAKDOWN_RTOL * self.atd_norm:
            log.info("normal-equations residual vanished (%.3e); stopping expansion", nr)
            self.stalled = True
            return False
        v = r / nr
        av = self.A.apply(v)
        try:
            self.qr_A = qr_append_column(self.qr_A, av)
        except RankDeficient:
            log.warning("A-side projection became rank deficient; stopping expansion")
            self.stalled = True
            return False
        self.V = np.column_stack([self.V, v])
        self.AV = np.column_stack([self.AV, av])
        self.PsiV = np.column_stack([self.PsiV, self.psi.apply(v)])
        self.peak_basis = max(self.peak_basis, self.V.shape[1])
        return True

    def _record(self, cycle: int, objective: float, t1: float):
        rre = ssim = float("nan")
        if self.metrics is not None:
            rre, ssim = self.metrics(self.x)
        ms = (self.clock() - self.t0) * 1e3 if self.clock else 0.0
        ca, cat = self.A.counter.forward + self.base[0], self.A.counter.adjoint + self.base[1]
        cp, cpt = self.psi.counter.forward + self.base[2], self.psi.counter.adjoint + self.base[3]
        self.records.append(
            IterationRecord(self.it, cycle, len(self.z), self.lam, objective, t1, rre, ssim, ca, cat, cp, cpt, ms)
        )

    # -- enlarge / compress cycle -------------------------------------------

    def enlarge_cycle(self, cycle: int) -> bool:
        """Expansion steps until k_max (or inner_max) columns or T1 convergence."""
        cfg = self.cfg
        s = max(0, cfg.k_max - self.V.shape[1])
        if cfg.inner_max is not None:
            s = min(s, cfg.inner_max)
        converged = False
        for _ in range(s):
            _, converged = self.solve_step(cycle, expand=True)
            if converged:
                break
        # Full-width factors at the final weights, for the compression step.
        if self.qr_A is None:
            self.qr_A = qr_factor(self.AV)
        w = compute_weights(self.psi_x, cfg.epsilon, cfg.q)
        self.qr_psi = qr_square_factor(np.sqrt(w)[:, None] * self.PsiV)
        return converged

    def compress(self):
        """Mix down to k_min - 1 retained directions and re-inject the iterate."""
        cfg = self.cfg
        k = self.V.shape[1]
        if k <= cfg.k_min:
            return
        if self.z is None:
            raise SolverError("compression requires a projected solve first")
        W = cfg.compression.mixing_matrix(
            self.qr_A.R, self.qr_psi.R, self.qr_A.Q, self.d, self.lam, cfg.k_min
        )
        z_pad = np.zeros(k)
        z_pad[: self.z.shape[0]] = self.z
        c1 = W.T @ z_pad
        wp = z_pad - W @ c1
        c2 = W.T @ wp
        wp = wp - W @ c2
        rho = float(np.linalg.norm(wp))
        if rho <= 1e-12 * np.linalg.norm(z_pad):
            log.info("iterate already contained in compressed range; width %d", W.shape[1])
            W_aug = W
            self.z = c1 + c2
        else:
            W_aug = np.column_stack([W, wp / rho])
            self.z = np.concatenate([c1 + c2, [rho]])
        self.V = self.V @ W_aug
        self.AV = self.AV @ W_aug
        self.PsiV = self.PsiV @ W_aug
        self.qr_A = None
        self.qr_psi = None

    # -- edge-encoded initialization -----------------------------------------

    def init_edge_encoded(self, cycle: int = 0):
        """Seed, one lambda-regularized re-solve, one expansion step, then an
        orthonormal basis of the Krylov space of the reweighted normal-equations
        operator, started at A^T d."""
        cfg = self.cfg
        self.seed_from_gk()
        atd_dir = self.V[:, 0].copy()  # first bidiagonalization vector is A^T d normalized
        self.solve_step(cycle, expand=False)
        self.solve_step(cycle, expand=True)

        lam1 = self.lam
        w1 = compute_weights(self.psi_x, cfg.epsilon, cfg.q)

        def normal_op(v):
            return self.A.apply_adjoint(self.A.apply(v)) + lam1 * self.psi.apply_adjoint(w1 * self.psi.apply(v))

        Q = atd_dir[:, None]
        for _ in range(cfg.k_min - 1):
            cand = normal_op(Q[:, -1])
            scale = float(np.linalg.norm(cand))
            cand = cand - Q @ (Q.T @ cand)
            cand = cand - Q @ (Q.T @ cand)
            nc = float(np.linalg.norm(cand))
            if nc <= 1e-12 * max(scale, 1e-300):
                log.info("edge-encoded Krylov space exhausted at width %d of %d", Q.shape[1], cfg.k_min)
                break
            Q = np.column_stack([Q, cand / nc])

        self.V = Q
        self.AV = self.A.apply_block(Q)
        self.PsiV = self.psi.apply_block(Q)
        self.qr_A = None
        self.qr_psi = None
        self.z = None
        self.peak_basis = max(self.peak_basis, Q.shape[1])


def _counter_snapshot(A, psi) -> tuple[int, int, int, int]:
    return (A.counter.forward, A.counter.adjoint, psi.counter.forward, psi.counter.adjoint)


def mm_gks(A, psi, d, cfg: SolverConfig, *, seed_basis=None, x0=None,
           metrics=None, clock=None) -> SolverResult:
    """Expand-only driver: the solution space grows by one vector per iteration.

    Stops at max_iters, on T1 <= tol1, or on a vanished residual.  With
    seed_basis/x0 provided the bidiagonalization seed is skipped.
    """
    eng = _Engine(A, psi, d, cfg, metrics=metrics, clock=clock)
    if seed_basis is not None:
        if x0 is None:
            raise SolverError("a seed basis requires a starting iterate")
        eng.seed_from_basis(seed_basis, x0)
    else:
        eng.seed_from_gk()
    converged = False
    for _ in range(cfg.max_iters):
        _, converged = eng.solve_step(cycle=0, expand=True)
        if converged:
            break
    return SolverResult(eng.x, eng.V, eng.records, eng.lam, converged, eng.it, eng.peak_basis)


def rmm_gks_init(A, psi, d, cfg: SolverConfig) -> InitResult:
    """The edge-encoded initialization alone: (V_kmin, x, diag(P), lambda)."""
    eng = _Engine(A, psi, d, cfg)
    eng.init_edge_encoded()
    p = np.sqrt(compute_weights(eng.psi_x, cfg.epsilon, cfg.q))
    return InitResult(eng.V, eng.x, p, eng.lam)


def enlarge(A, psi, V, d, x, cfg: SolverConfig, *, metrics=None, clock=None) -> EnlargeResult:
    """One standalone expansion phase from an orthonormal basis V and iterate x.

    Runs up to k_max - width(V) steps, breaking early on T1 <= tol1, and
    returns the iterate, the last regularization parameter, the expanded
    basis, full-width triangular factors, and the weight diagonal recomputed
    at the final iterate.
    """
    eng = _Engine(A, psi, d, cfg, metrics=metrics, clock=clock)
    eng.seed_from_basis(V, x)
    converged = eng.enlarge_cycle(cycle=1)
    p = np.sqrt(compute_weights(eng.psi_x, cfg.epsilon, cfg.q))
    return EnlargeResult(eng.x, eng.lam, eng.V, eng.qr_A.R, eng.qr_psi.R, p, converged)


def compress(V, R_A, R_psi, Q_A, d, x, lam, strategy: CompressionStrategy, k_min: int) -> np.ndarray:
    """Standalone compression: mix V down and re-append the normalized
    projected-out current iterate.  Returns the compressed basis."""
    W = strategy.mixing_matrix(R_A, R_psi, Q_A, d, lam, k_min)
    return reinject_solution(V @ W, x)


def rmm_gks(A, psi, d, cfg: SolverConfig, *, seed_basis=None, x0=None, metrics=None,
            clock=None, _records=None, _it0=0, _cycle0=0, _counter_base=(0, 0, 0, 0)) -> SolverResult:
    """Bounded-memory driver alternating enlarge and compress for i_max cycles.

    With a seed basis (recycling hand-off) the expansion starts from it
    directly; otherwise the edge-encoded initialization runs first.  Inner
    T1 breaks end a cycle early; convergence is declared at the outer level,
    when a full enlarge/compress cycle moves the iterate by at most tol1
    relative (or expansion stalls on a vanished residual).  The trailing
    compression always runs, so the recycled basis is k_min wide, and the
    stored basis never exceeds k_max columns.
    """
    eng = _Engine(A, psi, d, cfg, metrics=metrics, clock=clock,
                  records=_records, it0=_it0, counter_base=_counter_base)
    if seed_basis is not None:
        if x0 is None:
            raise SolverError("a seed basis requires a starting iterate")
        eng.seed_from_basis(seed_basis, x0)
    else:
        eng.init_edge_encoded(cycle=_cycle0)
    converged = False
    for cycle in range(_cycle0 + 1, _cycle0 + cfg.i_max + 1):
        x_at_cycle_start = eng.x.copy()
        eng.enlarge_cycle(cycle)
        eng.compress()
        # Outer convergence: the whole cycle moved the iterate by <= tol1
        # (a single inner T1 break right after compression is expected, not
        # conclusive, unless that one step was the entire cycle).
        if stopping_t1(eng.x, x_at_cycle_start) <= cfg.tol1 or eng.stalled:
            converged = True
            break
    if eng.peak_basis > cfg.k_max:
        raise SolverError(f"basis grew to {eng.peak_basis} > k_max = {cfg.k_max}")
    return SolverResult(eng.x, eng.V, eng.records, eng.lam, converged, eng.it, eng.peak_basis)


def s_rmm_gks(blocks: Sequence[tuple], psi, cfg: SolverConfig, *, metrics=None,
              clock=None, on_block_done: Callable | None = None) -> SolverResult:
    """Streaming driver: solve the data blocks in order, each seeded with the
    compressed basis and iterate of its predecessor.

    Only the k_min-column basis and the iterate survive between blocks; the
    block operator, its data, and all wide factors are dropped.  The log and
    the iteration counter run across blocks; cycles continue counting so the
    per-block boundaries are visible.  on_block_done(j, x, V, lam) fires after
    each block (checkpointing hook).
    """
    if len(blocks) == 0:
        raise SolverError("need at least one data block")
    records: list[IterationRecord] = []
    basis = None
    x = None
    lam = 0.0
    it = 0
    converged = False
    peak = 0
    totals = [0, 0, 0, 0]  # applications accumulated over completed blocks
    cycle0 = 0
    for j, (A_j, d_j) in enumerate(blocks, start=1):
        before = _counter_snapshot(A_j, psi)
        res = rmm_gks(
            A_j, psi, d_j, cfg,
            seed_basis=basis, x0=x, metrics=metrics, clock=clock,
            _records=records, _it0=it, _cycle0=cycle0, _counter_base=tuple(totals),
        )
        if records:
            cycle0 = records[-1].cycle
        basis, x, lam = res.basis, res.x, res.lam
        it = res.iterations
        converged = res.converged
        peak = max(peak, res.peak_basis)
        after = _counter_snapshot(A_j, psi)
        totals = [t + a - b for t, a, b in zip(totals, after, before)]
        if on_block_done is not None:
            on_block_done(j, x, basis, lam)
    return SolverResult(x, basis, records, lam, converged, it, peak)
