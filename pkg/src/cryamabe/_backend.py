"""Kernel backend selection.

The compiled extension is used for n = 1 lattices when it imported cleanly;
everything else runs on the NumPy fallback.  ``set_backend("python")`` forces
the fallback (used by the tests and the benchmark to compare the two).
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from . import _fallback
from .lattice import LatticeSpec

try:  # pragma: no cover - depends on the build
    from . import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

_selected = "compiled" if _kernels is not None else "python"


def compiled_available() -> bool:
    return _kernels is not None


def get_backend() -> str:
    return _selected


def set_backend(name: str) -> None:
    global _selected
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _kernels is None:
        raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
    _selected = name


@contextlib.contextmanager
def use_backend(name: str):
    prev = _selected
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


@dataclass
class _Work:
    gx: np.ndarray
    gy: np.ndarray
    lap: np.ndarray
    rhs: np.ndarray
    stages: np.ndarray


_workspaces: dict[LatticeSpec, _Work] = {}


def _work(lattice: LatticeSpec) -> _Work:
    ws = _workspaces.get(lattice)
    if ws is None:
        ws = _Work(*(np.empty(lattice.shape) for _ in range(4)), np.empty((5,) + lattice.shape))
        _workspaces.clear()  # one lattice at a time is the common case
        _workspaces[lattice] = ws
    return ws


def _compiled_for(lattice: LatticeSpec) -> bool:
    return _selected == "compiled" and lattice.n == 1


def _geom(lattice: LatticeSpec):
    return (lattice.hx[0], lattice.hy[0], lattice.ht, lattice.t_shift_y(0), lattice.t_shift_x(0))


def sublaplacian(u: np.ndarray, lattice: LatticeSpec, kappa: float) -> tuple[np.ndarray, float]:
    """``(kappa * Lap u, kappa * sum_sites |D u|^2)``; the returned array is fresh."""
    u = np.ascontiguousarray(u, dtype=np.float64).reshape(lattice.shape)
    if _compiled_for(lattice):
        ws = _work(lattice)
        out = np.empty(lattice.shape)
        s = _kernels.sublaplacian(u, out, ws.gx, ws.gy, *_geom(lattice), kappa)
        return out, s
    return _fallback.sublaplacian(u, lattice, kappa)


def forward_frame(u: np.ndarray, lattice: LatticeSpec) -> list[np.ndarray]:
    u = np.ascontiguousarray(u, dtype=np.float64).reshape(lattice.shape)
    if _compiled_for(lattice):
        gx, gy = np.empty(lattice.shape), np.empty(lattice.shape)
        _kernels.forward_frame(u, gx, gy, *_geom(lattice))
        return [gx, gy]
    return _fallback.forward_frame(u, lattice)


def flow_eval(u: np.ndarray, lattice: LatticeSpec, kappa: float, R0: np.ndarray | None = None,
              diag: bool = True) -> tuple[np.ndarray, np.ndarray, tuple]:
    """See :func:`cryamabe._fallback.flow_eval`.  Returned arrays are fresh copies."""
    u = np.ascontiguousarray(u, dtype=np.float64).reshape(lattice.shape)
    if _compiled_for(lattice) and R0 is None:
        ws = _work(lattice)
        stats = _kernels.flow_eval(
            u, ws.rhs, ws.lap, ws.gx, ws.gy, *_geom(lattice), kappa, lattice.cell_volume, diag
        )
        return ws.rhs.copy(), ws.lap.copy(), stats
    return _fallback.flow_eval(u, lattice, kappa, R0, diag)


def rk4_step(u: np.ndarray, lattice: LatticeSpec, kappa: float, dt: float,
             R0: np.ndarray | None = None) -> tuple[np.ndarray, tuple, float]:
    """One classical Runge-Kutta step of the flow.

    Returns ``(u_next, stats, lowest)`` where ``stats`` are the diagnostics of
    :func:`flow_eval` at ``u`` and ``lowest`` is the minimum over every stage
    value and ``u_next``; a non-positive ``lowest`` means the step failed.
    """
    u = np.ascontiguousarray(u, dtype=np.float64).reshape(lattice.shape)
    if _compiled_for(lattice) and R0 is None:
        ws = _work(lattice)
        out = np.empty(lattice.shape)
        res = _kernels.rk4_step(u, out, ws.stages, *_geom(lattice), kappa, lattice.cell_volume, dt)
        return out, res[:6], res[6]
    k, _, stats = _fallback.flow_eval(u, lattice, kappa, R0, True)
    lowest = float("inf")
    acc = k.copy()
    for a, c in ((0.5 * dt, 2.0), (0.5 * dt, 2.0), (dt, 1.0)):
        stage = u + a * k
        lowest = min(lowest, float(stage.min()))
        if lowest <= 0.0:
            return stage, stats, lowest
        k = _fallback.flow_eval(stage, lattice, kappa, R0, False)[0]
        acc = acc + c * k
    out = u + (dt / 6.0) * acc
    return out, stats, min(lowest, float(out.min()))
