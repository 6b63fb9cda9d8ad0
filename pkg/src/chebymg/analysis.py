"""Two-level convergence theory for polynomial smoothers.

All polynomials here are normalized so that the smoothed operator ``S A``
has spectral radius one, i.e. ``lambda_max = 1``.  The smoother quality is
summarized by

    gamma = sup_{0 < lam <= 1} lam p_k(lam)^2 / (1 - p_k(lam)^2)

and the V-cycle contraction bound is ``V(C, k) = C / (C + 1/gamma)``.  A
larger ``1/gamma`` gives a smaller bound.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import discretization as disc
from .smoothers import (
    FIRST,
    FIRST_KIND,
    FIRST_OPT,
    FOURTH,
    FOURTH_KIND,
    FOURTH_OPT,
    fourth_kind_basis,
    fourth_opt_betas,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ResidualPolynomial:
    """Residual polynomial ``p_k`` of a Chebyshev smoother on ``(0, 1]``."""

    family: str
    k: int
    lambda_min: float | None = None
    betas: tuple | None = None

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.k == 0:
            return np.ones_like(lam)
        if self.family in FIRST_KIND:
            return _first_kind_residual(self.k, self.lambda_min, 1.0, lam)
        Q = fourth_kind_basis(self.k, lam.ravel())
        p = 1.0 - np.asarray(self.betas) @ Q
        return p.reshape(lam.shape)


def _chebyshev_t(k, x):
    """First-kind Chebyshev polynomial ``T_k`` by its three-term recurrence."""
    t0, t1 = np.ones_like(x), x
    if k == 0:
        return t0
    for _ in range(k - 1):
        t0, t1 = t1, 2.0 * x * t1 - t0
    return t1


def _first_kind_residual(k, lmin, lmax, lam):
    theta = 0.5 * (lmax + lmin)
    delta = 0.5 * (lmax - lmin)
    return _chebyshev_t(k, (theta - lam) / delta) / _chebyshev_t(k, np.asarray(theta / delta))


DEFAULT_LAMBDA_MIN = 0.1


def resolve_lambda_min(family: str, k: int, lambda_min: float | None = None):
    """Lower Chebyshev bound used by the theory for ``family``.

    ``None`` means 0.1 for ``first`` and the bound-minimizing value from
    :func:`lambda_min_opt_bound` for ``first_opt_lambda``; the 4th-kind
    families ignore it.
    """
    if family not in FIRST_KIND:
        return None
    if lambda_min is not None:
        return float(lambda_min)
    return DEFAULT_LAMBDA_MIN if family == FIRST else lambda_min_opt_bound(k)


def residual_polynomial(family: str, k: int, lambda_min: float | None = None) -> ResidualPolynomial:
    """Residual polynomial of the ``family`` smoother of order ``k``.

    For the 1st-kind families ``lambda_min`` is the lower end of the
    Chebyshev interval relative to ``lambda_max = 1`` (see
    :func:`resolve_lambda_min` for the default).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if family in FIRST_KIND:
        lambda_min = resolve_lambda_min(family, k, lambda_min)
        if not 0.0 < lambda_min < 1.0:
            raise ValueError("lambda_min must lie in (0, 1)")
        return ResidualPolynomial(family, k, float(lambda_min))
    if family == FOURTH:
        return ResidualPolynomial(family, k, betas=(1.0,) * k)
    if family == FOURTH_OPT:
        return ResidualPolynomial(family, k, betas=tuple(fourth_opt_betas(k)))
    raise ValueError(f"unknown family {family!r}")


def _sup_samples(n=10_000):
    # half log-spaced near zero, half uniform up to one
    return np.unique(np.concatenate([np.logspace(-8, -2, n // 2, endpoint=False),
                                     np.linspace(1e-2, 1.0, n - n // 2)]))


_SAMPLES = _sup_samples()


def _golden_max(f, a, b, tol=1e-10):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def gamma_sup(p) -> float:
    """``sup lam p(lam)^2 / (1 - p(lam)^2)`` over ``(0, 1]``.

    Dense mixed log/linear sampling followed by golden-section refinement
    around the best sample.
    """
    lam = _SAMPLES

    def f(x):
        px = p(x)
        return x * px**2 / (1.0 - px**2)

    vals = f(lam)
    if not np.all(np.isfinite(vals)) or np.any(np.abs(p(lam)) >= 1.0):
        raise ValueError("residual polynomial must satisfy |p| < 1 on (0, 1]")
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = lam[max(i - 1, 0)]
    hi = lam[min(i + 1, lam.size - 1)]
    if hi > lo:
        _, fx = _golden_max(lambda x: float(f(np.array(x))), lo, hi)
        best = max(best, fx)
    return best


@functools.lru_cache(maxsize=4096)
def gamma_inverse(family: str, k: int, lambda_min: float | None = None,
                  numeric: bool = False) -> float:
    """Smoother constant ``1/gamma``.

    ``fourth`` uses the closed form ``4 k (k + 1) / 3`` unless ``numeric``;
    the other families always use the numeric supremum.  ``lambda_min``
    follows :func:`resolve_lambda_min`.
    """
    if k < 1:
        raise ValueError("gamma is undefined for k = 0 (p_k == 1)")
    if family == FOURTH and not numeric:
        return 4.0 * k * (k + 1) / 3.0
    return 1.0 / gamma_sup(residual_polynomial(family, k, lambda_min))


def gamma_inverse_opt_asymptote(k: int) -> float:
    """Large-``k`` estimate ``4 (2k + 1)^2 / pi^2 - 2/3`` for ``fourth_opt``."""
    return 4.0 / math.pi**2 * (2 * k + 1) ** 2 - 2.0 / 3.0


def _ginv(family, k, lambda_min, gamma_inv):
    return gamma_inverse(family, k, lambda_min) if gamma_inv is None else gamma_inv


def v_bound(C: float, family: str, k: int, lambda_min: float | None = None,
            gamma_inv=None) -> float:
    """Contraction bound ``C / (C + 1/gamma)`` for ``C >= 1``."""
    if not C >= 1.0:
        raise ValueError(f"C must be >= 1, got {C}")
    g = _ginv(family, k, lambda_min, gamma_inv)
    return C / (C + g)


def bound_ratio(C: float, family: str, k: int, lambda_min: float | None = None) -> float:
    """``V(C, k) / sqrt(V(C, 2k))``; above one the one-sided cycle is predicted faster."""
    return v_bound(C, family, k, lambda_min) / math.sqrt(v_bound(C, family, 2 * k, lambda_min))


def critical_C(family: str, k: int, lambda_min: float | None = None, lo: float = 1.0,
               hi: float = 1e12) -> float:
    """Root of ``V(C, k) = sqrt(V(C, 2k))`` by bisection on ``[lo, hi]``.

    Above the returned ``C*`` the one-sided ``(2k, 0)`` cycle has the
    smaller bound.
    """
    g1 = gamma_inverse(family, k, lambda_min)
    g2 = gamma_inverse(family, 2 * k, lambda_min)

    def f(C):
        return C / (C + g1) - math.sqrt(C / (C + g2))

    flo, fhi = f(lo), f(hi)
    if flo > 0:
        raise ValueError(
            f"no sign change on [{lo:g}, {hi:g}] for {family}, k={k}: the one-sided "
            f"bound is already smaller at C={lo:g}, so the root lies below {lo:g}")
    if fhi <= 0:
        raise ValueError(
            f"no sign change on [{lo:g}, {hi:g}] for {family}, k={k}: "
            "the full cycle is always better in bound")
    a, b = lo, hi
    while True:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b or (b - a) <= 1e-15 * b:
            break
        if f(mid) > 0:
            b = mid
        else:
            a = mid
    return b if abs(f(b)) < abs(f(a)) else a


@functools.lru_cache(maxsize=256)
def lambda_min_opt_bound(k: int, grid: int = 256, lo: float = 1e-3, hi: float = 0.5,
                         tol: float = 1e-6) -> float:
    """``lambda_min`` giving the 1st-kind smoother of order ``k`` the best bound.

    Maximizes ``1/gamma`` (equivalently minimizes ``V``) over ``(lo, hi)``
    with a coarse grid followed by golden-section refinement.
    """
    xs = np.linspace(lo, hi, grid)

    def g(x):
        return 1.0 / gamma_sup(residual_polynomial(FIRST, k, float(x)))

    vals = np.array([g(x) for x in xs])
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    x, _ = _golden_max(g, a, b, tol=tol)
    return float(x)


# Lanczos estimate of the approximation-property constant


@dataclass(frozen=True)
class CEstimate:
    C: float
    m: int
    alphas: tuple
    betas: tuple
    lambda_max: float


def spectral_radius_SA(A: disc.LinearOperator, S, m: int = 80, seed: int = 0) -> float:
    """Largest eigenvalue of ``S A`` for a diagonal ``S`` via Lanczos.

    Runs ``m`` fully reorthogonalized Lanczos steps on the symmetric form
    ``S^{1/2} A S^{1/2}``.  Applications of ``A`` are not counted.
    """
    s = np.sqrt(S.inv_diag)
    count = A.apply_count
    try:
        T = _lanczos(lambda v: s * (A @ (s * v)), A.shape[0], m, seed, low=-1.0)[0]
    finally:
        A.apply_count = count
    return float(np.max(np.linalg.eigvalsh(T)))


def _lanczos(op, N, m, seed, start=None, project=None, reorth=True, low=0.0):
    """Symmetric Lanczos with Euclidean inner products.

    Returns ``(T, alphas, betas)``; stops early on breakdown.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    q = rng.uniform(low, 1.0, N) if start is None else np.asarray(start, float)
    if project is not None:
        q = project(q)
    q = q / np.linalg.norm(q)
    Q = [q]
    alphas, betas = [], []
    prev = None
    for j in range(m):
        w = op(Q[-1])
        if project is not None:
            w = project(w)
        scale = float(np.linalg.norm(w))
        if prev is not None:
            w = w - betas[-1] * prev
        a = float(Q[-1] @ w)
        alphas.append(a)
        w = w - a * Q[-1]
        if reorth:
            B = np.array(Q)
            for _ in range(2):
                w = w - (B @ w) @ B
        b = float(np.linalg.norm(w))
        if j == m - 1:
            break
        if b <= 1e-10 * scale:
            break
        betas.append(b)
        prev = Q[-1]
        Q.append(w / b)
    n = len(alphas)
    T = np.diag(alphas) + np.diag(betas[: n - 1], 1) + np.diag(betas[: n - 1], -1)
    return T, alphas, betas[: n - 1]


def estimate_C(H, m: int = 20, seed: int = 0, reorthogonalize: bool = True,
               lambda_max: float | None = None, fine_factor=None) -> CEstimate:
    """Lanczos estimate of the approximation-property constant ``C``.

    Iterates on ``pi_f (S A)^{-1}`` with ``pi_f = I - P Ac^{-1} P^T A`` and
    the Jacobi smoother rescaled so that ``rho(S A) = 1``; ``(S A)^{-1}`` is
    applied with exact fine solves.  The start vector is ``pi_f`` of a
    seeded uniform ``[0, 1)`` vector.  Returns the spectral radius of the
    ``m x m`` tridiagonal matrix.
    """
    A = H.A
    count = A.apply_count
    try:
        lam = spectral_radius_SA(A, H.smoother) if lambda_max is None else lambda_max
        F = disc.factorize(A) if fine_factor is None else fine_factor
        s_inv = lam / H.smoother.inv_diag  # S^{-1} of the rescaled smoother

        def pi_f(v):
            return v - H.coarse_correction(A @ v)

        def op(q):
            return disc.solve(F, s_inv * q)

        T, alphas, betas = _lanczos(op, A.shape[0], m, seed, project=pi_f,
                                    reorth=reorthogonalize)
    finally:
        A.apply_count = count
    C = float(np.max(np.abs(np.linalg.eigvalsh(T))))
    return CEstimate(C, len(alphas), tuple(alphas), tuple(betas), float(lam))
