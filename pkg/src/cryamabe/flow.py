"""Normalized CR Yamabe flow of the conformal factor.

The factor evolves by ``du/dt = -(n/2)(R - r) u``, where ``R`` is the Webster
curvature of ``u^(2/n) theta_0`` and ``r`` its volume average.  With the
CR Yamabe equation this is ``(n+1) u^(-2/n) Lap u - (n/2) R0 u^(1-2/n) + (n/2) r u``.

Every step records a :class:`DiagnosticsRecord`; the evolution identities
(volume form, average curvature, gradient energy, pointwise curvature) are
checked afterwards from snapshots by centered time differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Callable, Iterator

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import _backend, hcalc
from .conformal import (
    ContactBackground,
    conformal_sub_laplacian,
    conformal_volume,
    rbar,
    scalar_curvature,
)
from .elliptic import gershgorin_bound
from .lattice import ScalarField, require_positive

CSV_COLUMNS = (
    "step",
    "t",
    "dt",
    "rbar",
    "volume",
    "energy",
    "umin",
    "umax",
    "ratio",
    "rdot_residual",
    "energy_identity_residual",
)


class FlowError(RuntimeError):
    """A step kept failing after repeated step-size halving."""


class PositivityError(ArithmeticError):
    """A Runge-Kutta stage or implicit solve produced a non-positive factor."""


@dataclass(frozen=True)
class FlowConfig:
    """Integration settings.

    ``dt`` is a positive number or ``"auto"`` (CFL-limited, recomputed every
    step).  ``snapshot_every`` > 0 stores the states at steps ``s - 1, s, s + 1``
    for every multiple ``s`` of it, which is what the identity checks need.
    """

    integrator: str = "rk4"
    dt: float | str = "auto"
    cfl_safety: float = 0.5
    t_end: float = 10.0
    snapshot_every: int = 0
    monotonicity_slack: float = 1e-9
    max_retries: int = 10
    cg_tol: float = 1e-12
    cg_max_iter: int = 20000

    def __post_init__(self):
        if self.integrator not in ("rk4", "imex"):
            raise ValueError(f"integrator must be 'rk4' or 'imex', got {self.integrator!r}")
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be non-negative")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


@dataclass(frozen=True, eq=False)
class FlowState:
    u: ScalarField
    time: float = 0.0
    step: int = 0

    def __post_init__(self):
        require_positive(self.u)
        if self.time < 0.0:
            raise ValueError("time must be non-negative")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Scalars of the state after ``step`` steps.

    ``dt`` is the size of the step that produced the state (0 for the
    initial state).  ``curvature_deviation`` is ``int (R - r)^2 dV`` in the
    conformal volume, ``laplacian_energy`` is ``int (Lap u)^2 u^(-2/n) dV_0``;
    both feed the identity residuals.
    """

    step: int
    t: float
    dt: float
    rbar: float
    volume: float
    energy: float
    umin: float
    umax: float
    ratio: float
    rdot_residual: float
    energy_identity_residual: float
    curvature_deviation: float
    laplacian_energy: float

    def csv_row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


_RECORD_FIELDS = tuple(f.name for f in fields(DiagnosticsRecord))


class Trajectory:
    """Append-only columnar store of :class:`DiagnosticsRecord` rows."""

    def __init__(self, capacity: int = 1024):
        self._cols = {name: np.empty(capacity) for name in _RECORD_FIELDS}
        self._len = 0

    def __len__(self) -> int:
        return self._len

    def _grow(self) -> None:
        for name, col in self._cols.items():
            bigger = np.empty(2 * col.size)
            bigger[: self._len] = col[: self._len]
            self._cols[name] = bigger

    def append(self, **values) -> None:
        if self._len == self._cols["t"].size:
            self._grow()
        for name in _RECORD_FIELDS:
            self._cols[name][self._len] = values.get(name, np.nan)
        self._len += 1

    def column(self, name: str) -> np.ndarray:
        """Read-only view of one column."""
        col = self._cols[name][: self._len]
        view = col.view()
        view.flags.writeable = False
        return view

    def __getitem__(self, k: int) -> DiagnosticsRecord:
        if k < 0:
            k += self._len
        if not 0 <= k < self._len:
            raise IndexError(k)
        vals = {name: float(self._cols[name][k]) for name in _RECORD_FIELDS}
        vals["step"] = int(vals["step"])
        return DiagnosticsRecord(**vals)

    def __iter__(self) -> Iterator[DiagnosticsRecord]:
        for k in range(self._len):
            yield self[k]

    def _fill_residuals(self, n: int) -> None:
        m = self._len
        if m < 3:
            return
        t = self._cols["t"][:m]
        r = self._cols["rbar"][:m]
        E = self._cols["energy"][:m]
        V = self._cols["volume"][:m]
        rdot = centered_derivative(t, r)
        Edot = centered_derivative(t, E)
        rhs_r = -n * self._cols["curvature_deviation"][:m] / V
        rhs_E = -2.0 * (n + 1) * self._cols["laplacian_energy"][:m] + n * r * E
        self._cols["rdot_residual"][:m] = relative_residual(rdot, rhs_r)
        self._cols["energy_identity_residual"][:m] = relative_residual(Edot, rhs_E)


@dataclass(frozen=True, eq=False)
class Snapshot:
    step: int
    time: float
    u: ScalarField


@dataclass(eq=False)
class RunResult:
    trajectory: Trajectory
    final: FlowState
    snapshots: dict[int, Snapshot] = field(default_factory=dict)
    rejected_steps: int = 0


@dataclass(frozen=True)
class DecayFit:
    rate: float
    prefactor: float
    r2: float
    window: tuple[float, float]


# -- numerics helpers -------------------------------------------------------
def centered_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order derivative on a non-uniform grid; NaN at both ends."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    out = np.full(f.shape, np.nan)
    if f.size < 3:
        return out
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    out[1:-1] = (
        -h2 / (h1 * (h1 + h2)) * f[:-2]
        + (h2 - h1) / (h1 * h2) * f[1:-1]
        + h1 / (h2 * (h1 + h2)) * f[2:]
    )
    return out


def relative_residual(lhs, rhs):
    """``|lhs - rhs| / |rhs|``, falling back to ``|lhs - rhs|`` where ``rhs == 0``."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    diff = np.abs(lhs - rhs)
    scale = np.abs(rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(scale > 0.0, diff / np.where(scale > 0.0, scale, 1.0), diff)


# -- right-hand side and step size -----------------------------------------
def _r0(bg: ContactBackground) -> np.ndarray | None:
    return None if bg.is_flat else bg.R0.values


def flow_rhs(bg: ContactBackground, u: ScalarField) -> ScalarField:
    """``-(n/2)(R - r) u`` with ``R`` from the CR Yamabe equation."""
    R = scalar_curvature(bg, u)
    r = rbar(bg, u)
    return ScalarField(u.lattice, -0.5 * bg.n * (R.values - r) * u.values)


def flow_rhs_expanded(bg: ContactBackground, u: ScalarField) -> ScalarField:
    """The same right-hand side in the expanded form evaluated by the kernels."""
    require_positive(u)
    rhs, _, _ = _backend.flow_eval(u.values, u.lattice, bg.cfg.kappa, _r0(bg), diag=False)
    if _r0(bg) is not None:
        # kernel stats omit the R0 term of the average; recompute the slow way
        n = bg.n
        r = rbar(bg, u)
        lap = hcalc.sub_laplacian(u, bg.cfg).values
        um = u.values ** (-2.0 / n)
        rhs = (n + 1.0) * um * lap - 0.5 * n * bg.R0.values * u.values * um + 0.5 * n * r * u.values
    return ScalarField(u.lattice, rhs)


def cfl_dt(bg: ContactBackground, u: ScalarField, cfg: FlowConfig, bound: float | None = None) -> float:
    """``cfl_safety / ((n+1) max(u^(-2/n)) bound)`` with the Gershgorin bound."""
    if bound is None:
        bound = gershgorin_bound(bg.lattice, bg.cfg)
    n = bg.n
    return cfg.cfl_safety / ((n + 1.0) * float(np.max(u.values ** (-2.0 / n))) * bound)


def _cfl_from_min(bg, umin, cfg, bound) -> float:
    return cfg.cfl_safety / ((bg.n + 1.0) * umin ** (-2.0 / bg.n) * bound)


def _stats_record(bg: ContactBackground, u: np.ndarray, stats) -> dict:
    n = bg.n
    E, V, q1, q2, umin, umax = stats
    total = (2.0 + 2.0 / n) * E
    if not bg.is_flat:
        total += float(np.sum(bg.R0.values * u * u)) * bg.lattice.cell_volume
    return dict(
        rbar=total / V,
        volume=V,
        energy=E,
        umin=umin,
        umax=umax,
        ratio=umax / umin,
        curvature_deviation=q1,
        laplacian_energy=q2,
    )


# -- single steps -----------------------------------------------------------
def _rk4_raw(bg: ContactBackground, u: np.ndarray, dt: float):
    out, stats, lowest = _backend.rk4_step(u, bg.lattice, bg.cfg.kappa, dt, _r0(bg))
    if not lowest > 0.0 or not np.all(np.isfinite(out)):
        raise PositivityError(f"positivity lost in a Runge-Kutta stage (min {lowest:.3e})")
    return out, stats


def _imex_raw(bg: ContactBackground, u: np.ndarray, dt: float, tol: float, max_iter: int):
    lat = bg.lattice
    n = bg.n
    _, lap, stats = _backend.flow_eval(u, lat, bg.cfg.kappa, _r0(bg), diag=True)
    r = _stats_record(bg, u, stats)["rbar"]
    d = (n + 1.0) * u ** (-2.0 / n)
    rhs = u + dt * 0.5 * n * r * u
    if not bg.is_flat:
        rhs = rhs - dt * 0.5 * n * bg.R0.values * u ** (1.0 - 2.0 / n)
    # (I - dt d Lap) x = rhs  <=>  (1/d - dt Lap) x = rhs / d, symmetric positive definite
    inv_d = (1.0 / d).reshape(-1)
    kappa = bg.cfg.kappa

    def matvec(x):
        lap_x, _ = _backend.sublaplacian(x.reshape(lat.shape), lat, kappa)
        return inv_d * x - dt * lap_x.reshape(-1)

    N = lat.size
    A = LinearOperator((N, N), matvec=matvec, dtype=np.float64)
    from .elliptic import _diagonal  # stencil diagonal of -Lap

    M_inv = 1.0 / (inv_d + dt * _diagonal(lat, bg.cfg))
    M = LinearOperator((N, N), matvec=lambda v: M_inv * v, dtype=np.float64)
    b = (rhs / d).reshape(-1)
    x, info = cg(A, b, x0=u.reshape(-1), rtol=tol, atol=0.0, maxiter=max_iter, M=M)
    if info != 0:
        raise PositivityError(f"implicit solve did not converge (info={info})")
    out = x.reshape(lat.shape)
    if not out.min() > 0.0:
        raise PositivityError(f"positivity lost in the implicit step (min {out.min():.3e})")
    return out, stats


def step_rk4(bg: ContactBackground, state: FlowState, dt: float) -> FlowState:
    """Classical four-stage Runge-Kutta step; r is recomputed at every stage."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    out, _ = _rk4_raw(bg, state.u.values, dt)
    return FlowState(ScalarField(bg.lattice, out), state.time + dt, state.step + 1)


def step_imex(bg: ContactBackground, state: FlowState, dt: float, tol: float = 1e-12,
              max_iter: int = 20000) -> FlowState:
    """Linearly implicit Euler step with lagged coefficients.

    Solves ``(I - dt (n+1) u^(-2/n) Lap) u_new = u + dt (n/2) r u`` (minus the
    ``R0`` term) by conjugate gradients on the symmetrized system.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    out, _ = _imex_raw(bg, state.u.values, dt, tol, max_iter)
    return FlowState(ScalarField(bg.lattice, out), state.time + dt, state.step + 1)


# -- driver -----------------------------------------------------------------
def _snapshot_steps(every: int, step: int) -> bool:
    if every <= 0:
        return False
    if step == 0:
        return True
    return (step % every) in (0, 1, every - 1)


def run(
    bg: ContactBackground,
    u0: ScalarField,
    cfg: FlowConfig,
    on_record: Callable[[DiagnosticsRecord], None] | None = None,
) -> RunResult:
    """Integrate from ``u0`` to ``cfg.t_end``.

    A failed step (lost positivity, unconverged implicit solve) is retried
    with half the step size, up to ``cfg.max_retries`` times.

    Raises
    ------
    FlowError
        When a step still fails after the allowed retries.
    """
    require_positive(u0, "initial conformal factor")
    if u0.lattice != bg.lattice:
        raise ValueError("initial factor lives on a different lattice")
    lat = bg.lattice
    bound = gershgorin_bound(lat, bg.cfg) if cfg.dt == "auto" else None
    traj = Trajectory()
    snaps: dict[int, Snapshot] = {}
    u = np.array(u0.values)
    t = 0.0
    step = 0
    last_dt = 0.0
    rejected = 0
    t_end = cfg.t_end
    r0 = _r0(bg)
    if cfg.integrator == "rk4":
        advance = lambda v, h: _rk4_raw(bg, v, h)  # noqa: E731
    else:
        advance = lambda v, h: _imex_raw(bg, v, h, cfg.cg_tol, cfg.cg_max_iter)  # noqa: E731

    def emit(stats):
        rec = dict(step=step, t=t, dt=last_dt, **_stats_record(bg, u, stats))
        traj.append(**rec)
        if on_record is not None:
            on_record(traj[len(traj) - 1])

    while t_end - t > 1e-12 * t_end:
        if _snapshot_steps(cfg.snapshot_every, step):
            snaps[step] = Snapshot(step, t, ScalarField(lat, u))
        if cfg.dt == "auto":
            dt = _cfl_from_min(bg, float(u.min()), cfg, bound)
        else:
            dt = float(cfg.dt)
        dt = min(dt, t_end - t)
        for attempt in range(cfg.max_retries + 1):
            try:
                new, step_stats = advance(u, dt)
                break
            except PositivityError:
                if attempt == cfg.max_retries:
                    raise FlowError(
                        f"step {step} at t={t:.6g} failed after {cfg.max_retries} halvings of dt"
                    ) from None
                rejected += 1
                dt *= 0.5
        emit(step_stats)
        u = new
        t += dt
        step += 1
        last_dt = dt
    stats = _backend.flow_eval(u, lat, bg.cfg.kappa, r0, diag=True)[2]
    emit(stats)
    final = FlowState(ScalarField(lat, u), t, step)
    if cfg.snapshot_every > 0:
        snaps[step] = Snapshot(step, t, final.u)
    traj._fill_residuals(bg.n)
    return RunResult(traj, final, snaps, rejected)


# -- identities -------------------------------------------------------------
@dataclass(frozen=True)
class IdentityResiduals:
    """Worst relative residual per identity over the checked snapshot triplets."""

    volume_form: float
    rbar: float
    energy: float
    curvature: float
    centers: tuple[int, ...]
    per_center: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {
            "volume_form": self.volume_form,
            "rbar": self.rbar,
            "energy": self.energy,
            "curvature": self.curvature,
        }


def _field_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    num = float(np.linalg.norm(lhs - rhs))
    den = float(np.linalg.norm(rhs))
    return num / den if den > 0.0 else num


def _identity_terms(bg: ContactBackground, u: ScalarField) -> dict:
    n = bg.n
    p = 2.0 + 2.0 / n
    R = scalar_curvature(bg, u).values
    vol = conformal_volume(bg, u)
    r = rbar(bg, u)
    dens = u.values**p
    lap = hcalc.sub_laplacian(u, bg.cfg).values
    E = hcalc.dirichlet_energy(u, bg.cfg)
    w = bg.lattice.cell_volume
    return dict(
        R=R,
        r=r,
        vol=vol,
        dens=dens,
        E=E,
        dev=float(np.sum((R - r) ** 2 * dens)) * w,
        lapE=float(np.sum(lap * lap * u.values ** (-2.0 / n))) * w,
    )


def triplet_residuals(bg: ContactBackground, snaps: tuple[Snapshot, Snapshot, Snapshot]) -> dict:
    """Residuals of the four evolution identities at the middle snapshot."""
    n = bg.n
    a, b, c = snaps
    times = np.array([a.time, b.time, c.time])
    terms = [_identity_terms(bg, s.u) for s in snaps]
    mid = terms[1]

    def ddt(key):
        vals = np.stack([np.asarray(tm[key], dtype=float) for tm in terms])
        h1, h2 = times[1] - times[0], times[2] - times[1]
        return (
            -h2 / (h1 * (h1 + h2)) * vals[0]
            + (h2 - h1) / (h1 * h2) * vals[1]
            + h1 / (h2 * (h1 + h2)) * vals[2]
        )

    vol_rhs = -(n + 1.0) * (mid["R"] - mid["r"]) * mid["dens"]
    r_rhs = -n * mid["dev"] / mid["vol"]
    e_rhs = -2.0 * (n + 1.0) * mid["lapE"] + n * mid["r"] * mid["E"]
    R_field = ScalarField(bg.lattice, mid["R"])
    R_rhs = (n + 1.0) * conformal_sub_laplacian(bg, b.u, R_field).values + (mid["R"] - mid["r"]) * mid["R"]
    return {
        "volume_form": _field_residual(ddt("dens"), vol_rhs),
        "rbar": float(relative_residual(ddt("r"), r_rhs)),
        "energy": float(relative_residual(ddt("E"), e_rhs)),
        "curvature": _field_residual(ddt("R"), R_rhs),
        "rbar_value": mid["r"],
    }


def check_identities(
    bg: ContactBackground,
    result: RunResult,
    band: tuple[float, float] | None = (1e-10, 1e-2),
) -> IdentityResiduals:
    """Centered-difference residuals of the evolution identities.

    Uses every stored triplet of consecutive snapshots.  With ``band`` set,
    only triplets whose average curvature, relative to its initial value,
    lies inside the band are used (the decay eventually reaches round-off,
    where relative residuals lose meaning); stationary runs use every triplet.

    Raises
    ------
    ValueError
        If no usable triplet is stored.
    """
    snaps = result.snapshots
    r_init = float(result.trajectory.column("rbar")[0]) if len(result.trajectory) else 0.0
    centers = []
    for s in sorted(snaps):
        if s - 1 in snaps and s + 1 in snaps:
            centers.append(s)
    if not centers:
        raise ValueError("need snapshots at three consecutive steps")
    per = {}
    for s in centers:
        res = triplet_residuals(bg, (snaps[s - 1], snaps[s], snaps[s + 1]))
        if band is not None and r_init > 0.0:
            rel = res["rbar_value"] / r_init
            if not band[0] <= rel <= band[1]:
                continue
        per[s] = res
    if not per:
        raise ValueError("no snapshot triplet falls inside the requested band")
    worst = {k: max(v[k] for v in per.values()) for k in ("volume_form", "rbar", "energy", "curvature")}
    return IdentityResiduals(centers=tuple(per), per_center=per, **worst)


# -- monotonicity and decay -------------------------------------------------
@dataclass(frozen=True)
class Verdict:
    """Tri-state check outcome; ``step`` is the first violating record."""

    status: str
    step: int | None = None
    worst: float = 0.0

    def as_dict(self) -> dict:
        return {"status": self.status, "step": self.step, "worst": self.worst}


def _first_violation(excess: np.ndarray, steps: np.ndarray) -> Verdict:
    if excess.size == 0:
        return Verdict("n/a")
    bad = np.flatnonzero(excess > 0.0)
    worst = float(np.max(excess))
    if bad.size:
        return Verdict("fail", int(steps[bad[0]]), worst)
    return Verdict("pass", None, worst)


def monotonicity_verdicts(traj: Trajectory, n: int, slack: float = 1e-9,
                          background_volume: float | None = None) -> dict[str, Verdict]:
    """Per-step monotonicity laws, each with slack ``slack * |initial value|``.

    Checks that the average curvature is non-increasing and non-negative,
    ``u_min`` is non-decreasing, ``u_max/u_min`` is non-increasing, and
    ``u_min <= (Vol / Vol_0)^(n/(2n+2))`` when the background volume ``Vol_0``
    is given.
    """
    if len(traj) == 0:
        return {k: Verdict("n/a") for k in (
            "rbar_nonincreasing", "rbar_nonnegative", "umin_nondecreasing",
            "ratio_nonincreasing", "umin_volume_bound")}
    steps = traj.column("step")
    r = traj.column("rbar")
    umin = traj.column("umin")
    ratio = traj.column("ratio")
    vol = traj.column("volume")

    def scale(x):
        s = abs(float(x[0]))
        return s if s > 0.0 else 1.0

    out = {
        "rbar_nonincreasing": _first_violation(np.diff(r) - slack * scale(r), steps[1:]),
        "rbar_nonnegative": _first_violation(-r - slack * scale(r), steps),
        "umin_nondecreasing": _first_violation(-np.diff(umin) - slack * scale(umin), steps[1:]),
        "ratio_nonincreasing": _first_violation(np.diff(ratio) - slack * scale(ratio), steps[1:]),
    }
    if background_volume is not None:
        out["umin_volume_bound"] = umin_volume_bound(traj, background_volume, n, slack)
    return out


def umin_volume_bound(traj: Trajectory, background_volume: float, n: int, slack: float = 1e-9) -> Verdict:
    """``u_min <= (Vol(theta) / Vol(theta_0))^(n/(2n+2))`` at every step."""
    umin = traj.column("umin")
    bound = (traj.column("volume") / background_volume) ** (n / (2.0 * n + 2.0))
    return _first_violation(umin - bound * (1.0 + slack), traj.column("step"))


def volume_drift(traj: Trajectory) -> float:
    """Largest relative deviation of the volume from its initial value."""
    v = traj.column("volume")
    return float(np.max(np.abs(v - v[0])) / v[0])


def signal_window(t: np.ndarray, values: np.ndarray, band: tuple[float, float] = (1e-10, 1e-2)) -> tuple[float, float] | None:
    """Time span where ``values / values[0]`` lies inside ``band``.

    Exponential decay eventually reaches round-off; fits and identity checks
    are restricted to this span.  Returns ``None`` when no sample qualifies.
    """
    t = np.asarray(t)
    v = np.asarray(values)
    if v.size == 0 or v[0] <= 0.0:
        return None
    rel = v / v[0]
    inside = np.flatnonzero((rel >= band[0]) & (rel <= band[1]))
    if inside.size < 2:
        return None
    return float(t[inside[0]]), float(t[inside[-1]])


def fit_decay(t: np.ndarray, values: np.ndarray, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares line through ``(t, log value)`` on ``window``.

    Returns the decay rate (negated slope), prefactor and coefficient of
    determination.

    Raises
    ------
    ValueError
        If a value in the window is not positive or fewer than two points remain.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t[0]), float(t[-1]))
    mask = (t >= window[0]) & (t <= window[1])
    tw, vw = t[mask], v[mask]
    if tw.size < 2:
        raise ValueError("need at least two samples in the fit window")
    if np.any(vw <= 0.0):
        raise ValueError("decay fit needs positive values in the window")
    y = np.log(vw)
    slope, intercept = np.polyfit(tw, y, 1)
    resid = y - (slope * tw + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit(float(-slope), float(np.exp(intercept)), r2, (float(window[0]), float(window[1])))


__all__ = [
    "CSV_COLUMNS",
    "FlowError",
    "PositivityError",
    "FlowConfig",
    "FlowState",
    "DiagnosticsRecord",
    "Trajectory",
    "Snapshot",
    "RunResult",
    "DecayFit",
    "IdentityResiduals",
    "Verdict",
    "centered_derivative",
    "relative_residual",
    "flow_rhs",
    "flow_rhs_expanded",
    "cfl_dt",
    "step_rk4",
    "step_imex",
    "run",
    "triplet_residuals",
    "check_identities",
    "monotonicity_verdicts",
    "umin_volume_bound",
    "volume_drift",
    "signal_window",
    "fit_decay",
]
