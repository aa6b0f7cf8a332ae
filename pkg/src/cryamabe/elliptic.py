"""Linear algebra for the discrete sub-Laplacian.

Solves and eigenproblems live on the mean-zero subspace: the kernel of the
discrete operator is exactly the constants, so projecting out the mean keeps
``-Lap`` symmetric positive definite there without pinning any site.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, eigsh

from . import _backend
from .hcalc import DEFAULT_CONFIG, OperatorConfig
from .lattice import LatticeSpec, ScalarField

DENSE_LIMIT = 4096


class SpectrumError(RuntimeError):
    """Eigen-solve failed to reach the requested residual."""

    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Smallest positive eigenvalues of ``-Lap`` with L^2-normalized eigenfields."""

    eigenvalues: np.ndarray
    eigenfields: tuple[ScalarField, ...]
    residuals: np.ndarray
    method: str = field(default="dense")

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])


# -- operator forms ---------------------------------------------------------
def apply_neg_laplacian(v: np.ndarray, lattice: LatticeSpec, cfg: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``-Lap v`` on a flat vector."""
    lap, _ = _backend.sublaplacian(v.reshape(lattice.shape), lattice, cfg.kappa)
    return -lap.reshape(-1)


def _frame_difference_matrices(lattice: LatticeSpec) -> list[sp.csr_matrix]:
    """Sparse forward differences ``D_a`` (unscaled), one per horizontal direction."""
    N = lattice.size
    rows = np.arange(N)
    eye = sp.identity(N, format="csr")
    t_next = sp.csr_matrix((np.ones(N), (rows, lattice.neighbor_index(lattice.t_axis, 1))), shape=(N, N))
    dt = (t_next - eye) / lattice.ht
    mats = []
    for i in range(lattice.n):
        for axis, h, coeff in (
            (lattice.x_axis(i), lattice.hx[i], 2.0 * lattice.coordinate(lattice.y_axis(i))),
            (lattice.y_axis(i), lattice.hy[i], -2.0 * lattice.coordinate(lattice.x_axis(i))),
        ):
            step = sp.csr_matrix((np.ones(N), (rows, lattice.neighbor_index(axis, 1))), shape=(N, N))
            c = np.broadcast_to(coeff, lattice.shape).reshape(-1)
            mats.append(((step - eye) / h + sp.diags(c) @ dt).tocsr())
    # order as X_1..X_n, Y_1..Y_n
    return mats[0::2] + mats[1::2]


def operator_matrix(lattice: LatticeSpec, cfg: OperatorConfig = DEFAULT_CONFIG) -> sp.csr_matrix:
    """Sparse assembly of ``-Lap = kappa * sum_a D_a^T D_a``."""
    mats = _frame_difference_matrices(lattice)
    A = sum(D.T @ D for D in mats)
    return (cfg.kappa * A).tocsr()


def dense_matrix(lattice: LatticeSpec, cfg: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Dense ``-Lap`` built column by column from the matrix-free operator."""
    N = lattice.size
    out = np.empty((N, N))
    e = np.zeros(N)
    for j in range(N):
        e[j] = 1.0
        out[:, j] = apply_neg_laplacian(e, lattice, cfg)
        e[j] = 0.0
    return out


def gershgorin_bound(lattice: LatticeSpec, cfg: OperatorConfig = DEFAULT_CONFIG) -> float:
    """Upper bound on the spectral radius of ``-Lap``: the largest absolute row sum."""
    A = operator_matrix(lattice, cfg)
    return float(np.max(np.asarray(abs(A).sum(axis=1)).ravel()))


# -- mean-zero solves -------------------------------------------------------
def _project(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def _operators(lattice: LatticeSpec, cfg: OperatorConfig, precondition: bool):
    N = lattice.size
    A = LinearOperator((N, N), matvec=lambda v: apply_neg_laplacian(_project(v), lattice, cfg), dtype=np.float64)
    M = None
    if precondition:
        inv_diag = 1.0 / _diagonal(lattice, cfg)
        M = LinearOperator((N, N), matvec=lambda r: _project(inv_diag * _project(r)), dtype=np.float64)
    return A, M


def _diagonal(lattice: LatticeSpec, cfg: OperatorConfig) -> np.ndarray:
    # diagonal of kappa * D^T D: each forward difference row contributes the
    # squares of its entries to the sites it touches
    n = lattice.n
    d = np.zeros(lattice.shape)
    for i in range(n):
        for h, c in (
            (lattice.hx[i], 2.0 * lattice.coordinate(lattice.y_axis(i))),
            (lattice.hy[i], -2.0 * lattice.coordinate(lattice.x_axis(i))),
        ):
            # own row: (-1/h - c/ht)^2; neighbor rows along the axis: (1/h)^2; along t: (c/ht)^2
            d = d + (1.0 / h + c / lattice.ht) ** 2 + 1.0 / h**2 + (c / lattice.ht) ** 2
    return cfg.kappa * d.reshape(-1)


def _solve_mean_zero(b: np.ndarray, lattice: LatticeSpec, cfg: OperatorConfig, tol: float,
                     max_iter: int, precondition: bool) -> tuple[np.ndarray, int]:
    A, M = _operators(lattice, cfg, precondition)
    count = [0]

    def tick(_):
        count[0] += 1

    x, _ = cg(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=tick)
    return _project(x), count[0]


def poisson_solve(
    rho: ScalarField,
    cfg: OperatorConfig = DEFAULT_CONFIG,
    tol: float = 1e-10,
    max_iter: int = 5000,
    precondition: bool = True,
) -> tuple[ScalarField, SolveReport]:
    """Solve ``Lap g = rho - mean(rho)`` with ``mean(g) = 0`` by conjugate gradients.

    Parameters
    ----------
    rho : ScalarField
        Source; its mean is removed (the solvability condition).
    tol : float
        Relative residual target ``||Lap g - (rho - mean)|| <= tol * ||rho - mean||``.
    max_iter : int
        Iteration cap; on exhaustion the report has ``converged=False``.
    precondition : bool
        Jacobi (diagonal) preconditioning on the mean-zero subspace.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    lat = rho.lattice
    b = -_project(rho.values.reshape(-1))
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return ScalarField(lat, np.zeros(lat.shape)), SolveReport(0, 0.0, True)
    x, iters = _solve_mean_zero(b, lat, cfg, tol, max_iter, precondition)
    res = float(np.linalg.norm(apply_neg_laplacian(x, lat, cfg) - b)) / bnorm
    return ScalarField(lat, x), SolveReport(iters, res, res <= tol)


# -- spectrum ---------------------------------------------------------------
def _normalize(vecs: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    norms = np.sqrt(np.sum(vecs * vecs, axis=0) * lattice.cell_volume)
    return vecs / norms


def _residuals(vals, vecs, lattice, cfg) -> np.ndarray:
    out = []
    for lam, v in zip(vals, vecs.T):
        r = apply_neg_laplacian(v, lattice, cfg) - lam * v
        out.append(float(np.linalg.norm(r) / np.linalg.norm(v)))
    return np.array(out)


def _dense_pairs(lattice, cfg, k):
    A = dense_matrix(lattice, cfg)
    A = 0.5 * (A + A.T)
    # lift the constant direction above the spectrum
    shift = 2.0 * gershgorin_bound(lattice, cfg)
    A += shift / lattice.size
    vals, vecs = np.linalg.eigh(A)
    return vals[:k], vecs[:, :k]


def _lanczos_pairs(lattice, cfg, k, tol, seed):
    N = lattice.size
    inner_tol = min(1e-12, tol * 1e-3)
    A, M = _operators(lattice, cfg, True)

    def green(v):
        x, _ = cg(A, _project(v), rtol=inner_tol, atol=0.0, maxiter=20 * N, M=M)
        return _project(x)

    G = LinearOperator((N, N), matvec=green, dtype=np.float64)
    v0 = _project(np.random.default_rng(seed).standard_normal(N))
    mu, vecs = eigsh(G, k=k, which="LA", v0=v0, tol=tol * 1e-2, ncv=max(2 * k + 1, 20))
    order = np.argsort(-mu)
    mu, vecs = mu[order], vecs[:, order]
    vecs = np.column_stack([_project(v) for v in vecs.T])
    # Rayleigh quotients on the operator itself
    vals = np.array([v @ apply_neg_laplacian(v, lattice, cfg) / (v @ v) for v in vecs.T])
    return vals, vecs


def spectrum(
    lattice: LatticeSpec,
    k: int = 1,
    cfg: OperatorConfig = DEFAULT_CONFIG,
    tol: float = 1e-8,
    method: str = "auto",
    seed: int = 0,
) -> SpectrumResult:
    """The ``k`` smallest positive eigenvalues of ``-Lap``.

    ``method="dense"`` diagonalizes the assembled matrix (at most
    ``DENSE_LIMIT`` sites); ``"lanczos"`` runs restarted Lanczos on the
    mean-zero Green operator, whose largest eigenvalues are ``1/lambda``.
    ``"auto"`` picks dense when the lattice is small enough.

    Raises
    ------
    SpectrumError
        If any relative residual ``||-Lap v - lambda v|| / lambda`` exceeds ``tol``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > 10:
        raise ValueError("spectrum is meant for a few low modes (k <= 10)")
    if method == "auto":
        method = "dense" if lattice.size <= DENSE_LIMIT else "lanczos"
    if method == "dense":
        if lattice.size > DENSE_LIMIT:
            raise ValueError(f"dense eigensolve limited to {DENSE_LIMIT} sites")
        vals, vecs = _dense_pairs(lattice, cfg, k)
    elif method == "lanczos":
        vals, vecs = _lanczos_pairs(lattice, cfg, k, tol, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    vecs = _normalize(vecs, lattice)
    res = _residuals(vals, vecs, lattice, cfg)
    rel = res / vals
    if not np.all(vals > 0.0) or np.any(rel > tol):
        raise SpectrumError(
            f"eigenpairs did not converge (worst relative residual {rel.max():.2e} > {tol:.1e})", rel
        )
    fields = tuple(ScalarField(lattice, v) for v in vecs.T)
    return SpectrumResult(np.asarray(vals), fields, rel, method)


__all__ = [
    "DENSE_LIMIT",
    "SolveReport",
    "SpectrumError",
    "SpectrumResult",
    "apply_neg_laplacian",
    "operator_matrix",
    "dense_matrix",
    "gershgorin_bound",
    "poisson_solve",
    "spectrum",
]
