"""Pure-NumPy stencil kernels, valid for every CR dimension n.

Same arithmetic contract as the compiled ``_kernels`` module: forward frame
differences ``D_a u`` per horizontal direction, and their negative adjoint.
"""
from __future__ import annotations

import numpy as np

from .lattice import LatticeSpec


def _dt_forward(u: np.ndarray, ht: float) -> np.ndarray:
    return (np.roll(u, -1, axis=-1) - u) / ht


def _dt_backward(u: np.ndarray, ht: float) -> np.ndarray:
    return (u - np.roll(u, 1, axis=-1)) / ht


def _gather(u: np.ndarray, lattice: LatticeSpec, axis: int, step: int) -> np.ndarray:
    return u.reshape(-1)[lattice.neighbor_index(axis, step)].reshape(u.shape)


def forward_frame(u: np.ndarray, lattice: LatticeSpec) -> list[np.ndarray]:
    """Forward differences ``[D_X1 u, ..., D_Xn u, D_Y1 u, ..., D_Yn u]`` (unscaled)."""
    n = lattice.n
    dtu = _dt_forward(u, lattice.ht)
    out = [None] * (2 * n)
    for i in range(n):
        cx = 2.0 * lattice.coordinate(lattice.x_axis(i))
        cy = 2.0 * lattice.coordinate(lattice.y_axis(i))
        ax, ay = lattice.x_axis(i), lattice.y_axis(i)
        out[i] = (_gather(u, lattice, ax, 1) - u) / lattice.hx[i] + cy * dtu
        out[n + i] = (_gather(u, lattice, ay, 1) - u) / lattice.hy[i] - cx * dtu
    return out


def adjoint_frame(g: list[np.ndarray], lattice: LatticeSpec) -> np.ndarray:
    """``-sum_a D_a^T g_a`` for the forward differences of :func:`forward_frame`."""
    n = lattice.n
    out = np.zeros(lattice.shape)
    for i in range(n):
        cx = 2.0 * lattice.coordinate(lattice.x_axis(i))
        cy = 2.0 * lattice.coordinate(lattice.y_axis(i))
        gx, gy = g[i], g[n + i]
        out += (gx - _gather(gx, lattice, lattice.x_axis(i), -1)) / lattice.hx[i]
        out += cy * _dt_backward(gx, lattice.ht)
        out += (gy - _gather(gy, lattice, lattice.y_axis(i), -1)) / lattice.hy[i]
        out -= cx * _dt_backward(gy, lattice.ht)
    return out


def sublaplacian(u: np.ndarray, lattice: LatticeSpec, kappa: float) -> tuple[np.ndarray, float]:
    """Return ``(kappa * Lap u, kappa * sum |D u|^2)`` (sum unweighted)."""
    g = forward_frame(u, lattice)
    s = sum(float(np.sum(ga * ga)) for ga in g)
    return kappa * adjoint_frame(g, lattice), kappa * s


def flow_eval(u: np.ndarray, lattice: LatticeSpec, kappa: float, R0: np.ndarray | None,
              diag: bool) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Flow right-hand side ``(n+1) u^(-2/n) Lap u - (n/2) R0 u^(1-2/n) + (n/2) r u``.

    Returns ``(rhs, lap, (E, V, Q1, Q2, umin, umax))``; see the compiled twin.
    """
    n = lattice.n
    w = lattice.cell_volume
    lap, s = sublaplacian(u, lattice, kappa)
    E = s * w
    vol_density = u ** (2.0 + 2.0 / n)
    V = float(np.sum(vol_density)) * w
    total = (2.0 + 2.0 / n) * E
    if R0 is not None:
        total += float(np.sum(R0 * u * u)) * w
    r = total / V
    u_m2n = u ** (-2.0 / n)
    rhs = (n + 1.0) * u_m2n * lap + (0.5 * n * r) * u
    if R0 is not None:
        rhs -= 0.5 * n * R0 * u * u_m2n
    if not diag:
        nan = float("nan")
        return rhs, lap, (E, V, nan, nan, nan, nan)
    R = (-(2.0 + 2.0 / n) * lap + (0.0 if R0 is None else R0 * u)) * u_m2n / u
    q1 = float(np.sum((R - r) ** 2 * vol_density)) * w
    q2 = float(np.sum(lap * lap * u_m2n)) * w
    return rhs, lap, (E, V, q1, q2, float(u.min()), float(u.max()))
