"""Discrete Heisenberg nilmanifold and scalar fields on it.

The model manifold is the quotient of the Heisenberg group by the integer
lattice subgroup, with contact form ``dt + 2 sum(x_i dy_i - y_i dx_i)``.
A fundamental domain is ``[0, 1)^(2n) x [0, 4)``; the identifications are

    (x_i, y_i, t) ~ (x_i + 1, y_i, t - 2 y_i)
    (x_i, y_i, t) ~ (x_i, y_i + 1, t + 2 x_i)
    (x, y, t)     ~ (x, y, t + 4)

Sites sit at ``x_i = i h_x``, ``y_j = j h_y``, ``t_k = k h_t``.  Keeping the
horizontal coordinates on multiples of the spacing is what lets the sheared
wraps land on grid lines (given the divisibility rules below).

Array layout is ``(x_1, ..., x_n, y_1, ..., y_n, t)`` with ``t`` fastest.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

L_X = 1.0
L_Y = 1.0
L_T = 4.0

SNAPSHOT_MAGIC = b"CRYF"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class LatticeSpec:
    """Uniform grid on the fundamental domain of the nilmanifold."""

    n: int
    Nx: tuple[int, ...]
    Ny: tuple[int, ...]
    Nt: int

    def __post_init__(self):
        object.__setattr__(self, "Nx", tuple(int(c) for c in self.Nx))
        object.__setattr__(self, "Ny", tuple(int(c) for c in self.Ny))
        if self.n < 1:
            raise ValueError(f"CR dimension must be positive, got n={self.n}")
        if len(self.Nx) != self.n or len(self.Ny) != self.n:
            raise ValueError("need one x count and one y count per horizontal pair")
        for name, count in [("N_t", self.Nt)] + [
            (f"N_x[{i + 1}]", c) for i, c in enumerate(self.Nx)
        ] + [(f"N_y[{i + 1}]", c) for i, c in enumerate(self.Ny)]:
            if count < 4:
                raise ValueError(f"{name}={count} is below the minimum grid count 4")
        for i in range(self.n):
            for label, c in ((f"N_x[{i + 1}]", self.Nx[i]), (f"N_y[{i + 1}]", self.Ny[i])):
                if self.Nt % (2 * c):
                    raise ValueError(
                        f"twist compatibility: N_t={self.Nt} is not divisible by "
                        f"2*{label}={2 * c}"
                    )

    # -- geometry ---------------------------------------------------------
    @cached_property
    def hx(self) -> tuple[float, ...]:
        return tuple(L_X / c for c in self.Nx)

    @cached_property
    def hy(self) -> tuple[float, ...]:
        return tuple(L_Y / c for c in self.Ny)

    @property
    def ht(self) -> float:
        return L_T / self.Nt

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return (*self.Nx, *self.Ny, self.Nt)

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def ndim(self) -> int:
        return 2 * self.n + 1

    @property
    def density(self) -> float:
        """Constant density of theta ^ (d theta)^n in coordinates: 4^n n!."""
        return float(4**self.n * math.factorial(self.n))

    @cached_property
    def cell_volume(self) -> float:
        return self.density * float(np.prod(self.hx)) * float(np.prod(self.hy)) * self.ht

    @property
    def volume(self) -> float:
        return self.cell_volume * self.size

    def x_axis(self, i: int) -> int:
        return i

    def y_axis(self, i: int) -> int:
        return self.n + i

    @property
    def t_axis(self) -> int:
        return 2 * self.n

    def t_shift_x(self, i: int) -> int:
        """t-index shift per unit y_i index when x_i wraps once."""
        return self.Nt // (2 * self.Ny[i])

    def t_shift_y(self, i: int) -> int:
        """t-index shift per unit x_i index when y_i wraps once."""
        return self.Nt // (2 * self.Nx[i])

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinate values along ``axis``, shaped to broadcast against fields."""
        if axis < self.n:
            h, count = self.hx[axis], self.Nx[axis]
        elif axis < 2 * self.n:
            h, count = self.hy[axis - self.n], self.Ny[axis - self.n]
        else:
            h, count = self.ht, self.Nt
        shape = [1] * self.ndim
        shape[axis] = count
        return (np.arange(count) * h).reshape(shape)

    # -- indexing ---------------------------------------------------------
    def flatten(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def unflatten(self, flat: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    @cached_property
    def _neighbors(self) -> dict:
        return {}

    def neighbor_index(self, axis: int, step: int) -> np.ndarray:
        """Flat gather indices of the site one ``step`` along ``axis``, wrapped.

        ``f.ravel()[idx]`` evaluates ``f`` at the shifted site for every site.
        """
        key = (axis, step)
        cache = self._neighbors
        if key not in cache:
            grids = np.indices(self.shape).reshape(self.ndim, -1)
            grids[axis] += step
            wrapped = wrap_many(self, grids)
            idx = np.ravel_multi_index(tuple(wrapped), self.shape)
            idx.flags.writeable = False
            cache[key] = idx
        return cache[key]


def make_lattice(n: int = 1, counts: Sequence[int] | None = None, **kwargs) -> LatticeSpec:
    """Build a validated lattice.

    ``counts`` is ``(N_x[1..n], N_y[1..n], N_t)`` flattened, e.g. ``(16, 16, 64)``
    for ``n=1``.  Keyword form ``Nx=, Ny=, Nt=`` is also accepted.
    """
    if counts is not None:
        counts = [int(c) for c in counts]
        if len(counts) != 2 * n + 1:
            raise ValueError(f"expected {2 * n + 1} grid counts for n={n}, got {len(counts)}")
        return LatticeSpec(n, tuple(counts[:n]), tuple(counts[n : 2 * n]), counts[2 * n])
    Nx, Ny = kwargs["Nx"], kwargs["Ny"]
    if np.isscalar(Nx):
        Nx = (Nx,) * n
    if np.isscalar(Ny):
        Ny = (Ny,) * n
    return LatticeSpec(n, tuple(Nx), tuple(Ny), int(kwargs["Nt"]))


# -- wraps ------------------------------------------------------------------
def wrap_many(lattice: LatticeSpec, raw: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap` over an integer array of shape ``(2n+1, m)``."""
    idx = np.array(raw, dtype=np.int64, copy=True)
    n = lattice.n
    it = idx[2 * n]
    # reduce y first; the t-shift of a y-wrap depends on x_i, which may
    # itself be out of range at this point (the group law does not care)
    for i in range(n):
        iy = idx[n + i]
        q = np.floor_divide(iy, lattice.Ny[i])
        iy -= q * lattice.Ny[i]
        it -= q * idx[i] * lattice.t_shift_y(i)
    for i in range(n):
        ix = idx[i]
        q = np.floor_divide(ix, lattice.Nx[i])
        ix -= q * lattice.Nx[i]
        it += q * idx[n + i] * lattice.t_shift_x(i)
    np.mod(it, lattice.Nt, out=it)
    return idx


def wrap(lattice: LatticeSpec, raw_index: Sequence[int]) -> tuple[int, ...]:
    """Resolve a raw multi-index to its representative in the fundamental domain.

    Crossing ``x_i`` by one period moves ``t`` by ``-2 y_i``; crossing ``y_i``
    moves it by ``+2 x_i``; ``t`` is plainly periodic.  So the raw site
    ``(N_x, j, k)`` is the point ``(1, y_j, t_k)``, which the group action
    carries back to ``(0, y_j, t_k + 2 y_j)``, i.e. index ``k + j N_t/(2 N_y)``.
    """
    raw = np.asarray(raw_index, dtype=np.int64).reshape(lattice.ndim, 1)
    return tuple(int(v) for v in wrap_many(lattice, raw)[:, 0])


# -- fields -----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per lattice site (read-only)."""

    lattice: LatticeSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.size != self.lattice.size:
            raise ValueError(
                f"field has {vals.size} values, lattice has {self.lattice.size} sites"
            )
        vals = vals.reshape(self.lattice.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.lattice != self.lattice:
                raise ValueError("fields live on different lattices")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.lattice, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.lattice, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.lattice, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.lattice, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.lattice, self.values / self._other(other))

    def __neg__(self):
        return ScalarField(self.lattice, -self.values)

    def __pow__(self, p):
        return ScalarField(self.lattice, self.values**p)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    def copy_values(self) -> np.ndarray:
        return np.array(self.values)


def require_positive(f: ScalarField, what: str = "conformal factor") -> None:
    if f.min <= 0.0:
        raise ValueError(f"{what} must be strictly positive (min={f.min:.3e})")


# -- sampling ---------------------------------------------------------------
def _axis_from_name(lattice: LatticeSpec, name: str) -> int:
    name = name.lower()
    if name == "t":
        return lattice.t_axis
    kind, _, num = name.partition("_") if "_" in name else (name[0], "", name[1:])
    i = int(num) - 1 if num else 0
    if not 0 <= i < lattice.n or kind not in "xy":
        raise ValueError(f"unknown coordinate {name!r}")
    return lattice.x_axis(i) if kind == "x" else lattice.y_axis(i)


def _mode_values(lattice: LatticeSpec, params: dict) -> np.ndarray:
    func = params["func"]
    axis = _axis_from_name(lattice, params.get("axis", "x"))
    k = int(params.get("k", 1))
    if axis == lattice.t_axis and k != 0:
        raise ValueError(
            "t-dependent pure modes are not well defined on the nilmanifold "
            "(invariance under t -> t - 2y forces t-constancy)"
        )
    coord = lattice.coordinate(axis)
    arg = 2.0 * np.pi * k * coord
    vals = {"sin": np.sin, "cos": np.cos}[func](arg)
    return np.broadcast_to(vals, lattice.shape)


def horizontal_modes(n: int, cutoff: int) -> list[tuple[int, ...]]:
    """Half-space of nonzero integer wave vectors in R^(2n) with |k| <= cutoff."""
    out = []
    for k in np.ndindex(*([2 * cutoff + 1] * (2 * n))):
        vec = tuple(int(v) - cutoff for v in k)
        if not any(vec) or sum(v * v for v in vec) > cutoff * cutoff:
            continue
        first = next(v for v in vec if v)
        if first > 0:
            out.append(vec)
    return sorted(out, key=lambda v: (sum(a * a for a in v), v))


def bandlimited_values(
    lattice: LatticeSpec, seed: int, cutoff: int, mean_zero: bool = False
) -> np.ndarray:
    """Random t-independent field sum(a_k cos(2 pi k.z) + b_k sin(2 pi k.z)).

    The coefficient stream depends only on ``seed`` and ``cutoff``, so the
    same seed gives the same continuum function on every lattice.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    modes = horizontal_modes(lattice.n, cutoff)
    rng = np.random.default_rng(seed)
    c0 = rng.standard_normal()
    coef = rng.standard_normal((len(modes), 2))
    coords = [lattice.coordinate(a) for a in range(2 * lattice.n)]
    out = np.full(lattice.shape, 0.0 if mean_zero else c0)
    for (a, b), k in zip(coef, modes):
        phase = sum(2.0 * np.pi * kk * c for kk, c in zip(k, coords) if kk)
        out = out + a * np.cos(phase) + b * np.sin(phase)
    out = np.broadcast_to(out, lattice.shape).copy()
    if mean_zero:
        out -= out.mean()
    return out


def packet_values(
    lattice: LatticeSpec,
    m: int = 1,
    width: float | None = None,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    phase: float = 0.0,
) -> np.ndarray:
    """Periodized Heisenberg wave packet with t-frequency ``m`` (n = 1 only).

    Sums ``exp(-a |z - z0|^2 + i(pi m/2)(t - t0 + ...))`` over the lattice group,
    after a left translation to ``center``; the sum is invariant under every
    identification, so the field is a genuine t-dependent function on the
    quotient.  With ``a = pi |m| / 2`` it is an exact eigenfunction of the
    continuum sub-Laplacian (lowest level for that t-frequency).
    """
    if lattice.n != 1:
        raise ValueError("wave packets are implemented for n = 1")
    if m == 0:
        raise ValueError("packet t-frequency must be nonzero")
    omega = 0.5 * np.pi * m
    a = abs(omega) if width is None else float(width)
    x0, y0, t0 = (float(c) for c in center)
    x = lattice.coordinate(0)
    y = lattice.coordinate(1)
    t = lattice.coordinate(2)
    reach = int(np.ceil(np.sqrt(40.0 / a))) + 2
    total = np.zeros(lattice.shape, dtype=np.complex128)
    for ga in range(-reach, reach + 1):
        for gb in range(-reach, reach + 1):
            # (ga, gb, -2 ga gb) . (x, y, t)
            X = x + ga
            Y = y + gb
            T = t - 2.0 * ga * gb + 2.0 * (gb * x - ga * y)
            # then the inverse left translation by the packet center
            Xc = X - x0
            Yc = Y - y0
            Tc = T - t0 + 2.0 * (-y0 * X + x0 * Y)
            total += np.exp(-a * (Xc**2 + Yc**2) + 1j * (omega * Tc + phase))
    return np.ascontiguousarray(total.real)


def sample(lattice: LatticeSpec, tag: str, params: dict | None = None) -> ScalarField:
    """Closed-form test fields.

    Tags
    ----
    constant : ``value`` (default 1)
    sin, cos : ``axis`` in {"x", "y", "x_2", ...}, ``k`` (default 1), ``amplitude``
    product  : ``factors``, a list of ``{"func": "sin"|"cos", "axis", "k"}``
    random   : ``seed``, ``cutoff`` (default 3), ``mean_zero``
    packet   : ``m``, ``width``, ``center``, ``phase`` (t-dependent, n = 1)
    """
    params = dict(params or {})
    if tag == "constant":
        vals = np.full(lattice.shape, float(params.get("value", 1.0)))
    elif tag in ("sin", "cos"):
        params["func"] = tag
        vals = float(params.get("amplitude", 1.0)) * _mode_values(lattice, params)
    elif tag == "product":
        vals = np.ones(lattice.shape)
        for factor in params["factors"]:
            vals = vals * _mode_values(lattice, factor)
    elif tag == "random":
        vals = bandlimited_values(
            lattice,
            int(params["seed"]),
            int(params.get("cutoff", 3)),
            bool(params.get("mean_zero", False)),
        )
    elif tag == "packet":
        vals = packet_values(
            lattice,
            int(params.get("m", 1)),
            params.get("width"),
            params.get("center", (0.0, 0.0, 0.0)),
            float(params.get("phase", 0.0)),
        )
    else:
        raise ValueError(f"unknown closed form {tag!r}")
    return ScalarField(lattice, vals)


# -- snapshot files ---------------------------------------------------------
def write_snapshot(path: str | Path, f: ScalarField, time: float = 0.0) -> None:
    lat = f.lattice
    header = SNAPSHOT_MAGIC + struct.pack(
        f"<II{2 * lat.n + 1}Id", SNAPSHOT_VERSION, lat.n, *lat.Nx, *lat.Ny, lat.Nt, float(time)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[ScalarField, float]:
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a field snapshot (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    off = 12
    counts = struct.unpack_from(f"<{2 * n + 1}I", data, off)
    off += 4 * (2 * n + 1)
    (time,) = struct.unpack_from("<d", data, off)
    off += 8
    lat = make_lattice(n, counts)
    vals = np.frombuffer(data, dtype="<f8", offset=off)
    if vals.size != lat.size:
        raise ValueError(f"{path}: truncated value array ({vals.size} of {lat.size})")
    return ScalarField(lat, vals.astype(np.float64)), float(time)
