"""Horizontal calculus on the lattice: frame derivatives, sub-Laplacian, norms.

The horizontal frame is ``X_i = d/dx_i + 2 y_i d/dt`` and
``Y_i = d/dy_i - 2 x_i d/dt``, with ``T = d/dt``.  The scaled frame
``E_a = sqrt(kappa) * (X_i or Y_i)`` defines the sub-Laplacian
``Lap = sum_a E_a^2`` and the horizontal inner product
``<df, dg> = sum_a (E_a f)(E_a g)``.

The sub-Laplacian is assembled as ``-sum_a D_a^T D_a`` from forward
differences, which makes it exactly symmetric and negative semi-definite
with only constants in its kernel.  Pointwise derivatives (frame
derivatives, Hessians) use centered differences instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .lattice import LatticeSpec, ScalarField


@dataclass(frozen=True)
class OperatorConfig:
    """Frame scale of the sub-Laplacian, ``Lap = kappa * sum(X_i^2 + Y_i^2)``."""

    kappa: float = 0.25

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


DEFAULT_CONFIG = OperatorConfig()


@dataclass(frozen=True, eq=False)
class HorizontalHessian:
    """All ordered second frame derivatives ``components[a][b] = E_b E_a f``.

    Indices run over ``X_1..X_n, Y_1..Y_n``.
    """

    lattice: LatticeSpec
    components: tuple[tuple[ScalarField, ...], ...]

    def component(self, a: int, b: int) -> ScalarField:
        return self.components[a][b]

    def magnitude(self) -> np.ndarray:
        """Pointwise Frobenius norm over all ``(2n)^2`` ordered components."""
        total = np.zeros(self.lattice.shape)
        for row in self.components:
            for c in row:
                total += c.values * c.values
        return np.sqrt(total)

    def trace(self) -> ScalarField:
        return ScalarField(
            self.lattice, sum(self.components[a][a].values for a in range(len(self.components)))
        )


# -- helpers ----------------------------------------------------------------
def _values(f) -> np.ndarray:
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=np.float64)


def _same_lattice(f: ScalarField, g: ScalarField) -> None:
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")


def _shift(v: np.ndarray, lattice: LatticeSpec, axis: int, step: int) -> np.ndarray:
    if axis == lattice.t_axis:
        return np.roll(v, -step, axis=-1)
    return v.reshape(-1)[lattice.neighbor_index(axis, step)].reshape(v.shape)


def _parse_direction(lattice: LatticeSpec, direction) -> tuple[str, int]:
    """Map ``"X"``, ``"Y_2"``, ``"T"`` or a frame index to ``(kind, pair)``."""
    n = lattice.n
    if isinstance(direction, (int, np.integer)):
        a = int(direction)
        if not 0 <= a < 2 * n:
            raise ValueError(f"frame index {a} out of range for n={n}")
        return ("X", a) if a < n else ("Y", a - n)
    name = str(direction).upper()
    kind, _, num = name.partition("_")
    if kind not in ("X", "Y", "T"):
        raise ValueError(f"unknown frame direction {direction!r}")
    i = int(num) - 1 if num else 0
    if not 0 <= i < n:
        raise ValueError(f"unknown frame direction {direction!r}")
    return kind, i


def _centered(v: np.ndarray, lattice: LatticeSpec, axis: int, h: float) -> np.ndarray:
    return (_shift(v, lattice, axis, 1) - _shift(v, lattice, axis, -1)) / (2.0 * h)


def _frame_values(v: np.ndarray, lattice: LatticeSpec, kind: str, i: int) -> np.ndarray:
    dt = _centered(v, lattice, lattice.t_axis, lattice.ht)
    if kind == "T":
        return dt
    if kind == "X":
        y = lattice.coordinate(lattice.y_axis(i))
        return _centered(v, lattice, lattice.x_axis(i), lattice.hx[i]) + 2.0 * y * dt
    x = lattice.coordinate(lattice.x_axis(i))
    return _centered(v, lattice, lattice.y_axis(i), lattice.hy[i]) - 2.0 * x * dt


# -- operators --------------------------------------------------------------
def frame_derivative(f: ScalarField, direction) -> ScalarField:
    """Unscaled frame derivative ``X_i f``, ``Y_i f`` or ``T f`` (centered)."""
    kind, i = _parse_direction(f.lattice, direction)
    return ScalarField(f.lattice, _frame_values(f.values, f.lattice, kind, i))


def sub_laplacian(f: ScalarField, cfg: OperatorConfig = DEFAULT_CONFIG) -> ScalarField:
    """``Lap f = -kappa * sum_a D_a^T D_a f`` with forward differences ``D_a``."""
    lap, _ = _backend.sublaplacian(f.values, f.lattice, cfg.kappa)
    return ScalarField(f.lattice, lap)


def dirichlet_energy(f: ScalarField, cfg: OperatorConfig = DEFAULT_CONFIG) -> float:
    """``int |grad f|^2 dV``, consistent with :func:`sub_laplacian` by parts."""
    _, s = _backend.sublaplacian(f.values, f.lattice, cfg.kappa)
    return s * f.lattice.cell_volume


def _staggered_average(v: np.ndarray, lattice: LatticeSpec, axis: int) -> np.ndarray:
    # forward-difference products live between sites along ``axis`` and t;
    # average the four surrounding values back onto the site
    back = _shift(v, lattice, axis, -1)
    both = v + back
    return 0.25 * (both + np.roll(both, 1, axis=-1))


def horizontal_inner(
    f: ScalarField, g: ScalarField, cfg: OperatorConfig = DEFAULT_CONFIG
) -> ScalarField:
    """Pointwise ``<df, dg>``, built from the forward differences of the sub-Laplacian.

    Its integral equals ``-<Lap f, g>`` exactly.
    """
    _same_lattice(f, g)
    lat = f.lattice
    df = _backend.forward_frame(f.values, lat)
    dg = df if g is f else _backend.forward_frame(g.values, lat)
    out = np.zeros(lat.shape)
    for a in range(2 * lat.n):
        axis = lat.x_axis(a) if a < lat.n else lat.y_axis(a - lat.n)
        out += _staggered_average(df[a] * dg[a], lat, axis)
    return ScalarField(lat, cfg.kappa * out)


def grad_magnitude(f: ScalarField, cfg: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Pointwise ``|grad f|`` from centered frame derivatives.

    Matches the stencil of :func:`horizontal_hessian`, so the two behave
    alike in interpolation inequalities; its squared integral agrees with
    :func:`dirichlet_energy` to second order.
    """
    lat = f.lattice
    total = np.zeros(lat.shape)
    for kind in ("X", "Y"):
        for i in range(lat.n):
            d = _frame_values(f.values, lat, kind, i)
            total += d * d
    return np.sqrt(cfg.kappa * total)


def horizontal_hessian(f: ScalarField, cfg: OperatorConfig = DEFAULT_CONFIG) -> HorizontalHessian:
    """Ordered second derivatives ``E_b E_a f`` from centered frame differences."""
    lat = f.lattice
    dirs = [("X", i) for i in range(lat.n)] + [("Y", i) for i in range(lat.n)]
    first = [_frame_values(f.values, lat, *d) for d in dirs]
    comps = tuple(
        tuple(
            ScalarField(lat, cfg.kappa * _frame_values(first[a], lat, *dirs[b]))
            for b in range(len(dirs))
        )
        for a in range(len(dirs))
    )
    return HorizontalHessian(lat, comps)


def derivative_magnitude(f: ScalarField, order: int, cfg: OperatorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Pointwise magnitude of the ``order``-th horizontal derivative tensor.

    Order 0 is ``|f|``, order 1 the gradient magnitude of :func:`grad_magnitude`,
    order 2 the Frobenius norm of the Hessian; higher orders apply centered
    frame derivatives recursively over all ordered index tuples.
    """
    if order < 0:
        raise ValueError("derivative order must be non-negative")
    if order == 0:
        return np.abs(f.values)
    if order == 1:
        return grad_magnitude(f, cfg)
    if order == 2:
        return horizontal_hessian(f, cfg).magnitude()
    lat = f.lattice
    dirs = [("X", i) for i in range(lat.n)] + [("Y", i) for i in range(lat.n)]
    scale = np.sqrt(cfg.kappa)
    level = [f.values]
    for _ in range(order):
        level = [scale * _frame_values(v, lat, *d) for v in level for d in dirs]
    return np.sqrt(sum(v * v for v in level))


# -- integrals and norms ----------------------------------------------------
def integrate(f) -> float:
    """Midpoint-rule integral with the contact volume density."""
    lat = f.lattice
    return float(np.sum(_values(f))) * lat.cell_volume


def mean(f: ScalarField) -> float:
    """Volume-weighted average."""
    return float(np.mean(f.values))


def _lp(values: np.ndarray, lattice: LatticeSpec, p: float) -> float:
    if not p >= 1.0:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {p}")
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * lattice.cell_volume) ** (1.0 / p))


def lp_norm(f: ScalarField, p: float) -> float:
    """``(int |f|^p dV)^(1/p)``; ``p = inf`` gives the max norm."""
    return _lp(f.values, f.lattice, p)


def grad_lp_norm(f: ScalarField, p: float, cfg: OperatorConfig = DEFAULT_CONFIG) -> float:
    """L^p norm of the pointwise horizontal gradient magnitude."""
    return _lp(grad_magnitude(f, cfg), f.lattice, p)


def hessian_lr_norm(H: HorizontalHessian, r: float) -> float:
    """L^r norm of the pointwise Frobenius magnitude of the Hessian."""
    return _lp(H.magnitude(), H.lattice, r)


def derivative_lp_norm(f: ScalarField, order: int, p: float, cfg: OperatorConfig = DEFAULT_CONFIG) -> float:
    return _lp(derivative_magnitude(f, order, cfg), f.lattice, p)


def s12_norm(f: ScalarField, cfg: OperatorConfig = DEFAULT_CONFIG) -> float:
    """Folland-Stein norm ``(int |grad f|^2 + |f|^2 dV)^(1/2)``."""
    return float(np.sqrt(dirichlet_energy(f, cfg) + lp_norm(f, 2) ** 2))


def frame_names(n: int) -> list[str]:
    suffix = (lambda i: "") if n == 1 else (lambda i: f"_{i + 1}")
    return [f"X{suffix(i)}" for i in range(n)] + [f"Y{suffix(i)}" for i in range(n)]


__all__ = [
    "OperatorConfig",
    "HorizontalHessian",
    "frame_derivative",
    "sub_laplacian",
    "dirichlet_energy",
    "horizontal_inner",
    "grad_magnitude",
    "horizontal_hessian",
    "derivative_magnitude",
    "integrate",
    "mean",
    "lp_norm",
    "grad_lp_norm",
    "hessian_lr_norm",
    "derivative_lp_norm",
    "s12_norm",
    "frame_names",
]
