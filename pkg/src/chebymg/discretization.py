"""Two-dimensional Dirichlet Poisson problem on a uniform finite-difference grid.

Unknowns live on the ``(n - 1) x (n - 1)`` interior nodes and are ordered
row-major: index ``j * (n - 1) + i`` holds the node at ``(x_i, y_j)`` with
``x_i = i * h_x`` and ``y_j = j * h_y``.  Boundary values are zero and are
eliminated from every operator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "Domain",
    "LinearOperator",
    "StencilOperator",
    "SparseOperator",
    "Prolongation",
    "Factorization",
    "NotPositiveDefiniteError",
    "build_fine_operator",
    "build_prolongation",
    "galerkin_coarse",
    "build_rhs",
    "factorize",
    "solve",
    "interior_coordinates",
]

COARSENING_RATIOS = (2, 4, 8, 16)


@dataclass(frozen=True)
class Domain:
    """Rectangle ``[0, Lx] x [0, Ly]`` with ``n`` cells per side."""

    Lx: float = 1.0
    Ly: float = 1.0
    n: int = 128

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.Lx / self.n

    @property
    def hy(self) -> float:
        return self.Ly / self.n

    @property
    def m(self) -> int:
        """Interior nodes per side."""
        return self.n - 1

    @property
    def size(self) -> int:
        return (self.n - 1) ** 2


def interior_coordinates(domain: Domain):
    """Return flattened ``(x, y)`` coordinates of the interior nodes."""
    idx = np.arange(1, domain.n)
    X, Y = np.meshgrid(idx * domain.hx, idx * domain.hy, indexing="xy")
    return X.ravel(), Y.ravel()


class LinearOperator:
    """Square operator with an application counter.

    Subclasses implement ``_apply``.  Every call to :meth:`apply` (or ``@``)
    bumps ``apply_count`` by one, regardless of whether a vector or a block of
    column vectors is passed.
    """

    shape: tuple

    def __init__(self):
        self.apply_count = 0

    def apply(self, v):
        self.apply_count += 1
        return self._apply(np.asarray(v, dtype=float))

    def __matmul__(self, v):
        return self.apply(v)

    def _apply(self, v):
        raise NotImplementedError

    def diagonal(self) -> np.ndarray:
        raise NotImplementedError

    def to_sparse(self) -> sp.csr_matrix:
        raise NotImplementedError

    def todense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    @property
    def size(self) -> int:
        return self.shape[0]


class StencilOperator(LinearOperator):
    """Matrix-free five-point Laplacian on the interior of a :class:`Domain`."""

    def __init__(self, domain: Domain):
        super().__init__()
        self.domain = domain
        m = domain.m
        self.shape = (m * m, m * m)
        self.cx = 1.0 / domain.hx**2
        self.cy = 1.0 / domain.hy**2
        self.center = 2.0 * self.cx + 2.0 * self.cy

    def _apply(self, v):
        m = self.domain.m
        if v.ndim == 1:
            u = v.reshape(m, m)
            out = self.center * u
            out[:, 1:] -= self.cx * u[:, :-1]
            out[:, :-1] -= self.cx * u[:, 1:]
            out[1:, :] -= self.cy * u[:-1, :]
            out[:-1, :] -= self.cy * u[1:, :]
            return out.ravel()
        if v.ndim == 2:
            cols = [self._apply(np.ascontiguousarray(v[:, j])) for j in range(v.shape[1])]
            return np.column_stack(cols) if cols else np.empty_like(v)
        raise ValueError("expected a vector or a matrix of column vectors")

    def diagonal(self):
        return np.full(self.shape[0], self.center)

    def to_sparse(self):
        m = self.domain.m
        e = np.ones(m)
        T = sp.diags([-e[1:], 2 * e, -e[1:]], [-1, 0, 1])
        eye = sp.identity(m)
        # row-major: x varies fastest
        A = (self.cx * sp.kron(eye, T) + self.cy * sp.kron(T, eye)).tocsr()
        A.eliminate_zeros()
        return A


class SparseOperator(LinearOperator):
    """Explicit sparse (CSR) operator."""

    def __init__(self, matrix, grid_m: int | None = None):
        super().__init__()
        self.matrix = sp.csr_matrix(matrix)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"operator must be square, got {self.matrix.shape}")
        self.shape = self.matrix.shape
        self.grid_m = grid_m

    def _apply(self, v):
        return self.matrix @ v

    def diagonal(self):
        return self.matrix.diagonal()

    def to_sparse(self):
        return self.matrix


def build_fine_operator(domain: Domain) -> StencilOperator:
    """Five-point operator ``-Laplace`` with homogeneous Dirichlet boundaries."""
    if domain.n < 2:
        raise ValueError("n must be >= 2")
    return StencilOperator(domain)


@dataclass(frozen=True)
class Prolongation:
    """Bilinear interpolation from coarse interior nodes to fine interior nodes."""

    fine_n: int
    coarse_n: int
    matrix: sp.csr_matrix

    @property
    def ratio(self) -> int:
        return self.fine_n // self.coarse_n

    @property
    def T(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def __matmul__(self, v):
        return self.matrix @ v

    def restrict(self, r):
        return self.matrix.T @ r


def _interp_1d(fine_n: int, coarse_n: int) -> sp.csr_matrix:
    r = fine_n // coarse_n
    fine = np.arange(1, fine_n)[:, None]
    coarse = (np.arange(1, coarse_n) * r)[None, :]
    W = np.maximum(0.0, 1.0 - np.abs(fine - coarse) / r)
    return sp.csr_matrix(W)


def build_prolongation(fine_n: int, coarse_n: int) -> Prolongation:
    """Tensor-product linear interpolation between grids with ``fine_n`` and
    ``coarse_n`` cells per side.

    The coarsening ratio must be one of 2, 4, 8 or 16.
    """
    if coarse_n < 1 or fine_n % coarse_n:
        raise ValueError(f"fine_n={fine_n} is not divisible by coarse_n={coarse_n}")
    if fine_n // coarse_n not in COARSENING_RATIOS:
        raise ValueError(f"unsupported coarsening ratio {fine_n // coarse_n}")
    if coarse_n < 2:
        raise ValueError("coarse grid needs at least one interior node")
    P1 = _interp_1d(fine_n, coarse_n)
    return Prolongation(fine_n, coarse_n, sp.kron(P1, P1, format="csr"))


def galerkin_coarse(A: LinearOperator, P: Prolongation) -> SparseOperator:
    """Coarse operator ``P^T A P`` as an explicit sparse matrix."""
    Pm = P.matrix
    if Pm.shape[0] != A.shape[1]:
        raise ValueError(f"P has {Pm.shape[0]} rows but A has {A.shape[1]} columns")
    Ac = (Pm.T @ (A.to_sparse() @ Pm)).tocsr()
    # enforce exact symmetry lost to summation order
    Ac = ((Ac + Ac.T) * 0.5).tocsr()
    Ac.eliminate_zeros()
    return SparseOperator(Ac, grid_m=P.coarse_n - 1)


NOISE_KINDS = ("uniform01", "centered", "none")


def build_rhs(A: LinearOperator, domain: Domain, seed: int | None = 0, noise: str = "uniform01"):
    """Right-hand side ``b = A u`` for the manufactured solution.

    ``u = sin(3 pi x / Lx) sin(4 pi y / Ly) + g`` at interior nodes.  ``g`` is
    drawn from ``numpy.random.PCG64(seed)``: uniform on ``[0, 1)`` for
    ``noise="uniform01"``, on ``[-1/2, 1/2)`` for ``"centered"``, and zero
    for ``"none"``.  The operator's counter is left untouched.
    """
    if noise not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {noise!r}")
    x, y = interior_coordinates(domain)
    u = np.sin(3 * np.pi * x / domain.Lx) * np.sin(4 * np.pi * y / domain.Ly)
    if noise != "none":
        rng = np.random.Generator(np.random.PCG64(seed))
        low = 0.0 if noise == "uniform01" else -0.5
        u = u + rng.uniform(low, low + 1.0, size=u.shape)
    count = A.apply_count
    b = A.apply(u)
    A.apply_count = count
    return b, u


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky pivot failure; ``index`` is the zero-based failing row."""

    def __init__(self, index: int):
        super().__init__(f"operator is not positive definite: pivot {index} failed")
        self.index = index


@dataclass(frozen=True)
class Factorization:
    """Banded Cholesky factor (upper form, LAPACK ``pbtrf`` storage)."""

    cb: np.ndarray
    bandwidth: int

    @property
    def size(self) -> int:
        return self.cb.shape[1]


def _bandwidth(M: sp.spmatrix) -> int:
    coo = M.tocoo()
    coo.eliminate_zeros()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


def factorize(A) -> Factorization:
    """Banded Cholesky factorization of an SPD operator."""
    M = A.to_sparse() if isinstance(A, LinearOperator) else sp.csr_matrix(A)
    N = M.shape[0]
    u = _bandwidth(M)
    ab = np.zeros((u + 1, N))
    for off in range(u + 1):
        ab[u - off, off:] = M.diagonal(off)
    try:
        cb = scipy.linalg.cholesky_banded(ab, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        m = re.search(r"(\d+)", str(exc))
        raise NotPositiveDefiniteError(int(m.group(1)) - 1 if m else -1) from exc
    return Factorization(cb, u)


def solve(F: Factorization, r):
    """Solve ``A x = r`` with a factorization from :func:`factorize`."""
    r = np.asarray(r, dtype=float)
    return scipy.linalg.cho_solve_banded((F.cb, False), r, check_finite=False)
