"""Run single cases, tune lambda_min, and sweep parameter grids."""

from __future__ import annotations

import functools
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import discretization as disc
from ..analysis import estimate_C
from ..krylov import SolveReport, pcg, pgmres, stationary
from ..multigrid import CycleConfig, Hierarchy, Preconditioner
from ..smoothers import FIRST_OPT, ChebyshevConfig, estimate_lambda_max
from .config import SWEEP_AXES, CaseConfig, ConfigError

log = logging.getLogger(__name__)

DEFAULT_CANDIDATES = tuple(float(v) for v in np.geomspace(0.0125, 0.4, 16))


class TuningError(RuntimeError):
    pass


@dataclass
class CaseResult:
    config: CaseConfig
    report: SolveReport | None
    lambda_tilde: float | None = None
    lambda_min_mult: float | None = None
    C_est: float | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.report is not None and self.report.converged


@dataclass
class Problem:
    """Fine/coarse hierarchy plus the setup quantities shared by runs."""

    domain: disc.Domain
    H: Hierarchy
    lambda_tilde: float

    @property
    def A(self):
        return self.H.A


@functools.lru_cache(maxsize=16)
def _problem(Lx: float, n: int, factor: int, eigen_seed: int, eigen_iterations: int) -> Problem:
    domain = disc.Domain(Lx, 1.0, n)
    H = Hierarchy.for_domain(domain, factor)
    lt = estimate_lambda_max(H.smoother, H.A, eigen_iterations, eigen_seed)
    return Problem(domain, H, lt)


def build_problem(cfg: CaseConfig) -> Problem:
    """Hierarchy and ``lambda_tilde`` for ``cfg`` (cached per process)."""
    return _problem(float(cfg.Lx), cfg.n, cfg.factor, cfg.eigen_seed, cfg.eigen_iterations)


@functools.lru_cache(maxsize=64)
def _rhs(Lx, n, seed, noise):
    domain = disc.Domain(Lx, 1.0, n)
    return disc.build_rhs(disc.build_fine_operator(domain), domain, seed, noise)


def case_rhs(cfg: CaseConfig):
    """``(b, u_exact)`` for the manufactured solution of ``cfg``."""
    b, u = _rhs(float(cfg.Lx), cfg.n, cfg.rhs_seed, cfg.rhs_noise)
    return b.copy(), u.copy()


def cycle_config(cfg: CaseConfig, lambda_tilde: float, lambda_min_mult=None) -> CycleConfig:
    lmin = cfg.lambda_min_mult if lambda_min_mult is None else lambda_min_mult
    smoother = ChebyshevConfig(
        family=cfg.family,
        k=1,
        lambda_tilde=lambda_tilde,
        lambda_max_mult=cfg.lambda_max_mult,
        lambda_min_mult=0.1 if lmin is None else lmin,
    )
    return CycleConfig(cfg.k_pre, cfg.k_post, smoother)


def _drive(cfg: CaseConfig, problem: Problem, cyc: CycleConfig, b):
    A = problem.A
    M = Preconditioner(problem.H, cyc)
    if cfg.driver == "pcg":
        return pcg(A, M, b, tol=cfg.tol, maxit=cfg.maxit)
    if cfg.driver == "pgmres":
        return pgmres(A, M, b, restart=cfg.restart, tol=cfg.tol, maxit=cfg.maxit)
    return stationary(A, M, b, tol=cfg.tol, maxit=cfg.maxit)


def solve_with(cfg: CaseConfig, problem: Problem, b, lambda_min_mult=None) -> SolveReport:
    """Run the configured driver on ``b``; failures come back in the report."""
    cyc = cycle_config(cfg, problem.lambda_tilde, lambda_min_mult)
    try:
        _, rep = _drive(cfg, problem, cyc, b)
    except (ArithmeticError, np.linalg.LinAlgError, FloatingPointError) as exc:
        rep = SolveReport(status=f"failed: {exc}")
        rep.residual_history.append(float(np.linalg.norm(b)))
    return rep


def tune_lambda_min_empirical(cfg: CaseConfig, candidates=DEFAULT_CANDIDATES,
                              problem: Problem | None = None) -> float:
    """Pick the ``lambda_min`` multiplier that solves a random problem fastest.

    Each candidate is run on ``b`` uniform on ``[0, 1)`` drawn with
    ``cfg.tune_seed``.  The winner has the fewest iterations, then the fewest
    fine applications, then appears first in ``candidates``.
    """
    if cfg.family != FIRST_OPT:
        raise ConfigError("lambda_min tuning applies to first_opt_lambda only")
    problem = problem or build_problem(cfg)
    rng = np.random.Generator(np.random.PCG64(cfg.tune_seed))
    b = rng.uniform(0.0, 1.0, size=problem.A.shape[0])
    best, best_key = None, None
    count = problem.A.apply_count
    try:
        for c in candidates:
            rep = solve_with(cfg, problem, b, lambda_min_mult=c)
            if not rep.converged:
                continue
            key = (rep.iterations, rep.fine_matvecs)
            if best_key is None or key < best_key:
                best, best_key = float(c), key
    finally:
        problem.A.apply_count = count
    if best is None:
        raise TuningError(f"every lambda_min candidate failed for case {cfg.case_id}")
    return best


def run_case(cfg: CaseConfig, problem: Problem | None = None) -> CaseResult:
    """Build (or reuse) the problem, tune if requested, and solve.

    ``report.fine_matvecs`` covers the solve only; eigenvalue estimation,
    tuning and the C estimate are setup.
    """
    problem = problem or build_problem(cfg)
    lmin = cfg.lambda_min_mult if cfg.uses_lambda_min else None
    res = CaseResult(cfg, None, lambda_tilde=problem.lambda_tilde)
    try:
        if cfg.family == FIRST_OPT and cfg.lambda_min_mult is None:
            lmin = tune_lambda_min_empirical(cfg, problem=problem)
        res.lambda_min_mult = lmin
        if cfg.estimate_c:
            res.C_est = estimate_C(problem.H, m=cfg.c_iterations, seed=cfg.eigen_seed).C
        b, _ = case_rhs(cfg)
        res.report = solve_with(cfg, problem, b, lambda_min_mult=lmin)
        if not res.report.converged:
            res.error = res.report.status
    except (TuningError, ValueError, ArithmeticError) as exc:
        res.error = str(exc)
    return res


@dataclass
class SweepResult:
    results: list = field(default_factory=list)
    group_by: tuple = ("Lx", "factor")

    def best(self, group_by=None, where=None) -> dict:
        """Best converged row per group: fewest fine applications, then fewest
        iterations, then smaller ``k``."""
        keys = self.group_by if group_by is None else tuple(group_by)
        out = {}
        for r in self.results:
            if not r.ok or (where is not None and not where(r)):
                continue
            g = tuple(getattr(r.config, k) for k in keys)
            rank = (r.report.fine_matvecs, r.report.iterations, r.config.k)
            if g not in out or rank < out[g][0]:
                out[g] = (rank, r)
        return {g: v[1] for g, v in sorted(out.items())}


def expand(base: CaseConfig, axes: dict) -> list:
    """Cross product of ``axes`` applied to ``base`` in a fixed order."""
    names = [a for a in SWEEP_AXES if a in axes] + sorted(a for a in axes if a not in SWEEP_AXES)
    grid = itertools.product(*(axes[a] for a in names))
    return [base.replace(**dict(zip(names, values))) for values in grid]


def _run_one(cfg):
    return run_case(cfg)


def sweep(base: CaseConfig, axes: dict, jobs: int = 1, configs=None) -> SweepResult:
    """Run every configuration in the grid; rows keep their grid order."""
    cfgs = list(configs) if configs is not None else expand(base, axes)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_one, cfgs, chunksize=4))
    else:
        results = [run_case(c) for c in cfgs]
    for r in results:
        if r.error:
            log.warning("%s: %s", r.config.case_id, r.error)
    return SweepResult(results)
