"""Two-level V-cycle with Chebyshev smoothing and an exact coarse solve."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import discretization as disc
from .smoothers import ChebyshevConfig, JacobiSmoother, smooth

FULL = "full"
ONE_SIDED = "one_sided"

DENSE_LIMIT = 1024


@dataclass
class Hierarchy:
    """Fine operator, Galerkin coarse operator, transfer and coarse factor."""

    A: disc.LinearOperator
    Ac: disc.SparseOperator
    P: disc.Prolongation
    coarse_factor: disc.Factorization
    smoother: JacobiSmoother

    @classmethod
    def build(cls, A: disc.LinearOperator, P: disc.Prolongation, smoother=None):
        Ac = disc.galerkin_coarse(A, P)
        return cls(A, Ac, P, disc.factorize(Ac), smoother or JacobiSmoother(A))

    @classmethod
    def for_domain(cls, domain: disc.Domain, factor: int = 2):
        if domain.n % factor:
            raise ValueError(f"coarsening factor {factor} does not divide n={domain.n}")
        A = disc.build_fine_operator(domain)
        return cls.build(A, disc.build_prolongation(domain.n, domain.n // factor))

    def coarse_correction(self, r):
        """``P Ac^{-1} P^T r``."""
        return self.P.matrix @ disc.solve(self.coarse_factor, self.P.matrix.T @ r)


@dataclass(frozen=True)
class CycleConfig:
    """Pre/post smoothing orders and the shared Chebyshev parameters.

    ``CycleConfig.full(k, ...)`` gives the symmetric ``(k, k)`` cycle and
    ``CycleConfig.one_sided(k, ...)`` the ``(2k, 0)`` cycle of equal cost.
    """

    k_pre: int
    k_post: int
    smoother: ChebyshevConfig = field(default_factory=ChebyshevConfig)

    def __post_init__(self):
        if self.k_pre < 0 or self.k_post < 0:
            raise ValueError("smoothing orders must be non-negative")

    @property
    def cycle(self) -> str:
        return ONE_SIDED if self.k_post == 0 and self.k_pre > 0 else FULL

    @property
    def symmetric(self) -> bool:
        return self.k_pre == self.k_post

    @classmethod
    def full(cls, k: int, smoother: ChebyshevConfig):
        return cls(k, k, smoother)

    @classmethod
    def one_sided(cls, k: int, smoother: ChebyshevConfig):
        return cls(2 * k, 0, smoother)

    @classmethod
    def of(cls, cycle: str, k: int, smoother: ChebyshevConfig):
        if cycle == FULL:
            return cls.full(k, smoother)
        if cycle == ONE_SIDED:
            return cls.one_sided(k, smoother)
        raise ValueError(f"unknown cycle {cycle!r}")


def _check_dims(H: Hierarchy, v):
    if np.shape(v)[0] != H.A.shape[0]:
        raise ValueError(f"vector of length {np.shape(v)[0]} does not match operator size "
                         f"{H.A.shape[0]}")


def v_cycle(H: Hierarchy, cfg: CycleConfig, b, x0=None):
    """One two-level V-cycle starting from ``x0`` (``None`` means zero).

    With a zero start the fine operator is applied exactly
    ``k_pre + k_post`` times.
    """
    b = np.asarray(b, dtype=float)
    _check_dims(H, b)
    A, S = H.A, H.smoother
    x = smooth(A, S, b, x0, cfg.smoother.with_order(cfg.k_pre))
    if cfg.k_pre == 0 and x0 is None:
        r = b.copy()
    else:
        r = b - A @ x
    x = x + H.coarse_correction(r)
    if cfg.k_post > 0:
        x = smooth(A, S, b, x, cfg.smoother.with_order(cfg.k_post))
    return x


def preconditioner_apply(H: Hierarchy, cfg: CycleConfig, r):
    """Apply the V-cycle preconditioner (one cycle from a zero start)."""
    return v_cycle(H, cfg, r, None)


class Preconditioner:
    """Callable wrapper around :func:`preconditioner_apply`."""

    def __init__(self, H: Hierarchy, cfg: CycleConfig):
        self.H = H
        self.cfg = cfg

    @property
    def symmetric(self) -> bool:
        return self.cfg.symmetric

    def __call__(self, r):
        return preconditioner_apply(self.H, self.cfg, r)


def _assemble(fn, n):
    return np.column_stack([fn(e) for e in np.eye(n)])


def assemble_error_propagators(H: Hierarchy, cfg: CycleConfig):
    """Dense ``(E, E', E_V)`` through the live smoothing and correction code.

    ``E = pi_f G`` (pre-smoothing then coarse correction), ``E' = G' pi_f``
    and ``E_V = E' E``.  Columns are obtained by running the error
    recurrence ``b = 0`` on unit vectors.
    """
    N = H.A.shape[0]
    if N > DENSE_LIMIT:
        raise ValueError(f"dense propagators limited to {DENSE_LIMIT} unknowns, got {N}")
    A, S = H.A, H.smoother
    zero = np.zeros(N)
    pre = cfg.smoother.with_order(cfg.k_pre)
    post = cfg.smoother.with_order(cfg.k_post)

    def G(e):
        return smooth(A, S, zero, e, pre) if cfg.k_pre else e.copy()

    def Gp(e):
        return smooth(A, S, zero, e, post) if cfg.k_post else e.copy()

    def pi_f(e):
        return e - H.coarse_correction(A @ e)

    E = _assemble(lambda e: pi_f(G(e)), N)
    Ep = _assemble(lambda e: Gp(pi_f(e)), N)
    EV = _assemble(lambda e: Gp(pi_f(G(e))), N)
    return E, Ep, EV


def assemble_preconditioner(H: Hierarchy, cfg: CycleConfig):
    """Dense matrix of the V-cycle preconditioner (test-scale only)."""
    N = H.A.shape[0]
    if N > DENSE_LIMIT:
        raise ValueError(f"dense assembly limited to {DENSE_LIMIT} unknowns, got {N}")
    return _assemble(lambda e: preconditioner_apply(H, cfg, e), N)


def a_norm_matrix(A_dense, M):
    """``||M||_A = ||L^T M L^{-T}||_2`` with ``A = L L^T``."""
    L = np.linalg.cholesky(A_dense)
    X = L.T @ M
    X = scipy.linalg.solve_triangular(L, X.T, lower=True).T
    return float(np.linalg.norm(X, 2))
