"""Preconditioned CG and restarted right-preconditioned GMRES."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SolveReport",
    "IndefinitePreconditionerError",
    "pcg",
    "pgmres",
    "stationary",
    "convergence_rate",
]


class IndefinitePreconditionerError(ArithmeticError):
    """PCG found ``<r, M r> <= 0``."""


@dataclass
class SolveReport:
    iterations: int = 0
    fine_matvecs: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    status: str = ""
    rho: float | None = None
    windows: list = field(default_factory=list)
    bases: list | None = None

    def finish(self):
        self.rho = convergence_rate(self) if self.iterations >= 1 and self.residual_history[0] > 0 else None
        return self


def convergence_rate(report) -> float:
    """Average per-iteration residual reduction ``(||r_N|| / ||r_0||)^(1/N)``.

    Accepts a :class:`SolveReport` or a plain residual-norm sequence.
    """
    hist = report.residual_history if isinstance(report, SolveReport) else list(report)
    N = report.iterations if isinstance(report, SolveReport) else len(hist) - 1
    if N < 1:
        raise ValueError("convergence rate needs at least one iteration")
    r0, rN = hist[0], hist[-1]
    if r0 == 0:
        raise ValueError("zero initial residual")
    if rN == 0:
        return 0.0
    return math.exp(math.log(rN / r0) / N)


def _as_callable(M):
    if M is None:
        return lambda r: r.copy()
    if callable(M):
        return M
    return lambda r: M @ r


def _counter(A):
    return getattr(A, "apply_count", None)


def pcg(A, M, b, x0=None, tol: float = 1e-6, maxit: int = 1000):
    """Preconditioned conjugate gradients.

    Stops when the unpreconditioned residual drops below ``tol`` relative to
    the initial one; convergence is confirmed on ``b - A x`` recomputed from
    scratch (one extra application of ``A``).
    """
    t0 = time.perf_counter()
    c0 = _counter(A)
    Minv = _as_callable(M)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b.copy() if x0 is None else b - A @ x
    rep = SolveReport()
    r0 = float(np.linalg.norm(r))
    rep.residual_history.append(r0)
    if r0 == 0.0:
        rep.converged, rep.status = True, "zero initial residual"
    else:
        z = Minv(r)
        rz = float(r @ z)
        p = z.copy()
        while rep.iterations < maxit:
            if not rz > 0:
                raise IndefinitePreconditionerError(
                    f"<r, M r> = {rz:.3e} at iteration {rep.iterations}")
            q = A @ p
            pq = float(p @ q)
            alpha = rz / pq
            x += alpha * p
            r -= alpha * q
            rep.iterations += 1
            rn = float(np.linalg.norm(r))
            if rn <= tol * r0:
                rt = float(np.linalg.norm(b - A @ x))
                rep.residual_history.append(rt)
                if rt <= tol * r0:
                    rep.converged, rep.status = True, "converged"
                    break
                r = b - A @ x
                rn = rt
            else:
                rep.residual_history.append(rn)
            z = Minv(r)
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        else:
            rep.status = "maxit"
    rep.wall_time = time.perf_counter() - t0
    if c0 is not None:
        rep.fine_matvecs = A.apply_count - c0
    return x, rep.finish()


def _arnoldi_step(A, Z, V, H, j, M, reorth):
    z = M(V[j])
    Z.append(z)
    w = A @ z
    # classical Gram-Schmidt over the whole basis at once
    Vj = np.array(V[: j + 1])
    h = Vj @ w
    w = w - h @ Vj
    if reorth:
        h2 = Vj @ w
        w = w - h2 @ Vj
        h = h + h2
    H[: j + 1, j] = h
    H[j + 1, j] = np.linalg.norm(w)
    return w


def pgmres(A, M, b, x0=None, restart: int = 30, tol: float = 1e-6, maxit: int = 1000,
           reorthogonalize: bool = True, keep_basis: bool = False):
    """Right-preconditioned restarted GMRES(m) with classical Gram-Schmidt.

    ``maxit`` counts inner (Arnoldi) iterations.  The residual history holds
    the least-squares residual norm of every inner iteration, which equals
    ``||b - A x_i||`` up to round-off; at convergence the true residual is
    recomputed and replaces the last entry.  A restart cycle without any
    decrease ends the solve with status ``"stagnated"``.
    """
    if restart < 1:
        raise ValueError("restart must be >= 1")
    t0 = time.perf_counter()
    c0 = _counter(A)
    Minv = _as_callable(M)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b.copy() if x0 is None else b - A @ x
    rep = SolveReport()
    r0 = float(np.linalg.norm(r))
    rep.residual_history.append(r0)
    rep.bases = [] if keep_basis else None
    if r0 == 0.0:
        rep.converged, rep.status = True, "zero initial residual"
    beta = r0
    while not rep.converged and rep.iterations < maxit:
        start_res = beta
        V = [r / beta]
        Z = []
        H = np.zeros((restart + 1, restart))
        g = np.zeros(restart + 1)
        g[0] = beta
        window_start = len(rep.residual_history) - 1
        res = beta
        j = 0
        y = np.zeros(0)
        while j < restart and rep.iterations < maxit:
            w = _arnoldi_step(A, Z, V, H, j, Minv, reorthogonalize)
            rep.iterations += 1
            y, *_ = np.linalg.lstsq(H[: j + 2, : j + 1], g[: j + 2], rcond=None)
            res = float(np.linalg.norm(g[: j + 2] - H[: j + 2, : j + 1] @ y))
            rep.residual_history.append(res)
            j += 1
            if H[j, j - 1] == 0.0 or res <= tol * r0:
                break
            V.append(w / H[j, j - 1])
        x = x + np.array(Z[:j]).T @ y
        if rep.bases is not None:
            rep.bases.append(np.array(V[:j]).T)
        rep.windows.append((window_start, len(rep.residual_history) - 1))
        if res <= tol * r0:
            r = b - A @ x
            beta = float(np.linalg.norm(r))
            rep.residual_history[-1] = beta
            if beta <= tol * r0:
                rep.converged, rep.status = True, "converged"
                break
        else:
            r = b - A @ x
            beta = float(np.linalg.norm(r))
        if beta >= start_res:
            rep.status = "stagnated"
            break
    if not rep.converged and not rep.status:
        rep.status = "maxit"
    rep.wall_time = time.perf_counter() - t0
    if c0 is not None:
        rep.fine_matvecs = A.apply_count - c0
    return x, rep.finish()


def stationary(A, M, b, x0=None, tol: float = 1e-6, maxit: int = 1000,
               divergence: float = 1e8):
    """Preconditioned Richardson iteration ``x += M (b - A x)``.

    Each iteration applies ``A`` once for the residual (the first is skipped
    for a zero start).  Stops with status ``"diverged"`` if the residual grows
    by ``divergence``.
    """
    t0 = time.perf_counter()
    c0 = _counter(A)
    Minv = _as_callable(M)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b.copy() if x0 is None else b - A @ x
    rep = SolveReport()
    r0 = float(np.linalg.norm(r))
    rep.residual_history.append(r0)
    if r0 == 0.0:
        rep.converged, rep.status = True, "zero initial residual"
    while not rep.converged and rep.iterations < maxit:
        x += Minv(r)
        r = b - A @ x
        rep.iterations += 1
        rn = float(np.linalg.norm(r))
        rep.residual_history.append(rn)
        if rn <= tol * r0:
            rep.converged, rep.status = True, "converged"
        elif not np.isfinite(rn) or rn > divergence * r0:
            rep.status = "diverged"
            break
    if not rep.converged and not rep.status:
        rep.status = "maxit"
    rep.wall_time = time.perf_counter() - t0
    if c0 is not None:
        rep.fine_matvecs = A.apply_count - c0
    return x, rep.finish()
