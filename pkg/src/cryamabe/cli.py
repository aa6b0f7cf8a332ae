"""Command-line experiments: ``cryamabe {flow,spectrum,identities,inequalities,lambda}``.

Every command reads one JSON config, writes machine-readable reports to the
output directory, and exits with 0 (all checks pass), 1 (run failure or a
failed check) or 2 (bad configuration or usage).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import flow, ineq
from .conformal import ContactBackground, lambda_estimate, yamabe_quotient
from .elliptic import SpectrumError, poisson_solve, spectrum
from .hcalc import OperatorConfig, sub_laplacian
from .lattice import (
    LatticeSpec,
    ScalarField,
    bandlimited_values,
    read_snapshot,
    sample,
    write_snapshot,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Invalid, incomplete or unreadable experiment configuration."""


# -- configuration ----------------------------------------------------------
@dataclass(frozen=True)
class ModelSection:
    n: int = 1
    N_x: int | list = 16
    N_y: int | list = 16
    N_t: int = 64
    kappa: float = 0.25


@dataclass(frozen=True)
class FlowSection:
    integrator: str = "rk4"
    dt: float | str = "auto"
    cfl_safety: float = 0.5
    t_end: float = 10.0
    snapshot_every: int = 0


@dataclass(frozen=True)
class InitSection:
    kind: str = "sine"
    amplitude: float = 0.1
    seed: int = 0
    path: str | None = None


@dataclass(frozen=True)
class TolerancesSection:
    cg_tol: float = 1e-12
    cg_max_iter: int = 20000
    eig_tol: float = 1e-8


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    emit_csv: bool = True
    emit_summary: bool = True


@dataclass(frozen=True)
class ChecksSection:
    """Pass thresholds for every verdict the commands emit."""

    volume_tol: float = 1e-6
    monotonicity_slack: float = 1e-9
    decay_r2_min: float = 0.99
    identity_tol: float = 0.02
    curvature_identity_tol: float = 0.05
    refinement_shrink: float = 2.0
    identities_t_end: float = 0.4
    identities_snapshot_every: int = 100
    spectrum_rayleigh_slack: float = 0.05
    poincare_samples: int = 200
    poincare_match: float = 0.02
    green_tol: float = 1e-8
    it3_samples: int = 50
    it3_slack: float = 0.1
    it3_analytic_tol: float = 0.01
    gn_samples: int = 50
    gn_stability: float = 0.2
    lambda_steps: int = 2000
    lambda_tol: float = 1e-3


_SECTIONS = {
    "model": ModelSection,
    "flow": FlowSection,
    "init": InitSection,
    "tolerances": TolerancesSection,
    "output": OutputSection,
    "checks": ChecksSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    flow: FlowSection = field(default_factory=FlowSection)
    init: InitSection = field(default_factory=InitSection)
    tolerances: TolerancesSection = field(default_factory=TolerancesSection)
    output: OutputSection = field(default_factory=OutputSection)
    checks: ChecksSection = field(default_factory=ChecksSection)
    base_dir: Path = field(default=Path("."), compare=False)

    # -- derived objects ----------------------------------------------------
    def lattice(self) -> LatticeSpec:
        m = self.model
        nx = m.N_x if isinstance(m.N_x, list) else [m.N_x] * m.n
        ny = m.N_y if isinstance(m.N_y, list) else [m.N_y] * m.n
        return LatticeSpec(m.n, tuple(nx), tuple(ny), m.N_t)

    def background(self) -> ContactBackground:
        return ContactBackground.flat(self.lattice(), OperatorConfig(self.model.kappa))

    def flow_config(self, **overrides) -> flow.FlowConfig:
        f = self.flow
        base = flow.FlowConfig(
            integrator=f.integrator,
            dt=f.dt,
            cfl_safety=f.cfl_safety,
            t_end=f.t_end,
            snapshot_every=f.snapshot_every,
            monotonicity_slack=self.checks.monotonicity_slack,
            cg_tol=self.tolerances.cg_tol,
            cg_max_iter=self.tolerances.cg_max_iter,
        )
        return replace(base, **overrides)

    def initial_factor(self) -> ScalarField:
        lat = self.lattice()
        init = self.init
        if init.kind == "constant":
            return ScalarField(lat, np.ones(lat.shape))
        if init.kind == "sine":
            return 1.0 + sample(lat, "sin", {"amplitude": init.amplitude})
        if init.kind == "random":
            v = bandlimited_values(lat, init.seed, 2, mean_zero=True)
            return ScalarField(lat, 1.0 + init.amplitude * v / np.max(np.abs(v)))
        u, _ = read_snapshot(self.resolve(init.path))
        if u.lattice != lat:
            raise ConfigError("initial snapshot lattice does not match the model section")
        return u

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, init=replace(self.init, seed=int(seed)))

    def with_out(self, out: str) -> "ExperimentConfig":
        return replace(self, output=replace(self.output, dir=str(out)))

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}


def _section(name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    return cls(**raw)


def _check_number(value, name: str, *, integer: bool = False, positive: bool = False,
                  nonneg: bool = False) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    if integer and not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{name} must be positive")
    if nonneg and value < 0:
        raise ConfigError(f"{name} must be non-negative")


def _validate(cfg: ExperimentConfig) -> None:
    m = cfg.model
    _check_number(m.n, "model.n", integer=True, positive=True)
    for name in ("N_x", "N_y"):
        v = getattr(m, name)
        for c in v if isinstance(v, list) else [v]:
            _check_number(c, f"model.{name}", integer=True, positive=True)
    _check_number(m.N_t, "model.N_t", integer=True, positive=True)
    _check_number(m.kappa, "model.kappa", positive=True)
    try:
        cfg.lattice()
        cfg.flow_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    init = cfg.init
    if init.kind not in ("constant", "sine", "random", "file"):
        raise ConfigError(f"init.kind must be constant, sine, random or file, got {init.kind!r}")
    _check_number(init.amplitude, "init.amplitude", nonneg=True)
    _check_number(init.seed, "init.seed", integer=True, nonneg=True)
    if init.kind in ("sine", "random") and not init.amplitude < 1.0:
        raise ConfigError("init.amplitude must be below 1 to keep the factor positive")
    if init.kind == "file":
        if not init.path:
            raise ConfigError("init.kind 'file' needs init.path")
        if not cfg.resolve(init.path).is_file():
            raise ConfigError(f"init.path {init.path!r} does not exist")
    t = cfg.tolerances
    _check_number(t.cg_tol, "tolerances.cg_tol", positive=True)
    _check_number(t.cg_max_iter, "tolerances.cg_max_iter", integer=True, positive=True)
    _check_number(t.eig_tol, "tolerances.eig_tol", positive=True)
    for f in fields(ChecksSection):
        _check_number(getattr(cfg.checks, f.name), f"checks.{f.name}", integer=f.type == "int",
                      positive=True)
    for f in fields(OutputSection):
        v = getattr(cfg.output, f.name)
        if f.name == "dir":
            if not isinstance(v, str) or not v:
                raise ConfigError("output.dir must be a non-empty string")
        elif not isinstance(v, bool):
            raise ConfigError(f"output.{f.name} must be true or false")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config.

    Missing sections take their defaults; unknown keys are rejected.

    Raises
    ------
    ConfigError
        On unreadable files, malformed JSON, unknown keys or out-of-range values.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {str(path)!r}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    try:
        parts = {name: _section(name, cls, raw.get(name, {})) for name, cls in _SECTIONS.items()}
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(**parts, base_dir=path.resolve().parent)
    _validate(cfg)
    return cfg


# -- reports ----------------------------------------------------------------
def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def _verdict(ok: bool | None, **detail) -> dict:
    status = "n/a" if ok is None else ("pass" if ok else "fail")
    return {"status": status, **detail}


def _all_pass(verdicts: dict) -> bool:
    return all(v["status"] != "fail" for v in verdicts.values())


@dataclass
class RunSummary:
    """Scalar results and verdicts of a flow run (wall time is written separately)."""

    final_rbar: float
    final_volume: float
    volume_drift: float
    steps: int
    final_time: float
    rejected_steps: int
    decay: dict
    verdicts: dict
    identity_residuals: dict | None

    def to_dict(self) -> dict:
        return asdict(self)


def write_csv(path: Path, traj: flow.Trajectory) -> None:
    cols = [traj.column(c) for c in flow.CSV_COLUMNS]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(flow.CSV_COLUMNS)
        for row in zip(*cols):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def _decay_summary(traj: flow.Trajectory) -> dict:
    t = traj.column("t")
    out = {}
    for name in ("rbar", "energy"):
        win = flow.signal_window(t, traj.column(name))
        if win is None:
            out[name] = None
            continue
        fit = flow.fit_decay(t, traj.column(name), win)
        out[name] = asdict(fit)
    return out


def summarize_run(cfg: ExperimentConfig, bg: ContactBackground, result: flow.RunResult) -> RunSummary:
    traj = result.trajectory
    checks = cfg.checks
    verdicts = {}
    drift = flow.volume_drift(traj)
    verdicts["volume_conservation"] = _verdict(drift <= checks.volume_tol, worst=drift)
    mono = flow.monotonicity_verdicts(traj, bg.n, checks.monotonicity_slack, bg.lattice.volume)
    verdicts.update({k: v.as_dict() for k, v in mono.items()})
    decay = _decay_summary(traj)
    for name, fit in decay.items():
        key = f"decay_fit_{name}"
        verdicts[key] = _verdict(None) if fit is None else _verdict(fit["r2"] >= checks.decay_r2_min, r2=fit["r2"])
    residuals = None
    try:
        ids = flow.check_identities(bg, result)
        residuals = ids.as_dict()
        for name, value in residuals.items():
            tol = checks.curvature_identity_tol if name == "curvature" else checks.identity_tol
            verdicts[f"identity_{name}"] = _verdict(value <= tol, worst=value)
    except ValueError:
        for name in ("volume_form", "rbar", "energy", "curvature"):
            verdicts[f"identity_{name}"] = _verdict(None)
    return RunSummary(
        final_rbar=float(traj.column("rbar")[-1]),
        final_volume=float(traj.column("volume")[-1]),
        volume_drift=drift,
        steps=result.final.step,
        final_time=result.final.time,
        rejected_steps=result.rejected_steps,
        decay=decay,
        verdicts=verdicts,
        identity_residuals=residuals,
    )


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_timing(out: Path, name: str, seconds: float) -> None:
    _write_json(out / f"{name}_timing.json", {"wall_time_seconds": seconds})


# -- commands ---------------------------------------------------------------
def cmd_flow(cfg: ExperimentConfig) -> int:
    """Run the flow, write CSV, snapshots and the summary; exit 0 iff every verdict passes."""
    start = time.perf_counter()
    bg = cfg.background()
    u0 = cfg.initial_factor()
    result = flow.run(bg, u0, cfg.flow_config())
    out = _out_dir(cfg)
    if cfg.output.emit_csv:
        write_csv(out / "diagnostics.csv", result.trajectory)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    snaps = dict(result.snapshots)
    snaps.setdefault(0, flow.Snapshot(0, 0.0, u0))
    snaps.setdefault(result.final.step, flow.Snapshot(result.final.step, result.final.time, result.final.u))
    for step, snap in sorted(snaps.items()):
        write_snapshot(snap_dir / f"step_{step:08d}.cryf", snap.u, snap.time)
    summary = summarize_run(cfg, bg, result)
    if cfg.output.emit_summary:
        _write_json(out / "summary.json", {"config": cfg.to_dict(), **summary.to_dict()})
    _write_timing(out, "flow", time.perf_counter() - start)
    return EXIT_OK if _all_pass(summary.verdicts) else EXIT_FAIL


def cmd_spectrum(cfg: ExperimentConfig, k: int = 1) -> int:
    """Lowest ``k`` eigenvalues of ``-Lap``; exit 0 on convergence and a passing Rayleigh bound."""
    if k < 1:
        raise ConfigError("--k must be at least 1")
    start = time.perf_counter()
    bg = cfg.background()
    out = _out_dir(cfg)
    try:
        res = spectrum(bg.lattice, k, bg.cfg, tol=cfg.tolerances.eig_tol, seed=cfg.init.seed)
    except SpectrumError as exc:
        _write_json(out / "spectrum.json", {"converged": False, "error": str(exc),
                                            "residuals": exc.residuals.tolist()})
        return EXIT_FAIL
    # the Rayleigh quotient of sin(2 pi x) bounds lambda_1 from above
    bound = (2.0 * math.pi) ** 2 * bg.cfg.kappa
    verdicts = {
        "rayleigh_bound": _verdict(
            res.lambda1 <= bound * (1.0 + cfg.checks.spectrum_rayleigh_slack), bound=bound
        )
    }
    _write_json(out / "spectrum.json", {
        "converged": True,
        "method": res.method,
        "eigenvalues": res.eigenvalues.tolist(),
        "residuals": res.residuals.tolist(),
        "verdicts": verdicts,
    })
    _write_timing(out, "spectrum", time.perf_counter() - start)
    return EXIT_OK if _all_pass(verdicts) else EXIT_FAIL


def identity_study(cfg: ExperimentConfig, threshold: float | None = None) -> dict:
    """Short fixed-step runs at ``dt`` and ``dt/2`` with dense snapshots.

    Returns residuals at both step sizes, the shrink factors and verdicts.
    """
    bg = cfg.background()
    u0 = cfg.initial_factor()
    checks = cfg.checks
    base = cfg.flow_config(t_end=checks.identities_t_end)
    dt = flow.cfl_dt(bg, u0, base) if base.dt == "auto" else float(base.dt)
    every = checks.identities_snapshot_every
    levels = []
    for level in range(2):
        fc = replace(base, dt=dt / 2**level, snapshot_every=every * 2**level)
        levels.append(flow.check_identities(bg, flow.run(bg, u0, fc)).as_dict())
    tol = checks.identity_tol if threshold is None else threshold
    ctol = checks.curvature_identity_tol if threshold is None else threshold
    verdicts = {}
    shrink = {}
    for name, coarse in levels[0].items():
        fine = levels[1][name]
        limit = ctol if name == "curvature" else tol
        verdicts[f"{name}_residual"] = _verdict(coarse <= limit, worst=coarse, threshold=limit)
        if coarse <= 1e-10:
            # already at round-off (stationary data): nothing left to shrink
            shrink[name] = None
            verdicts[f"{name}_refinement"] = _verdict(None)
        else:
            shrink[name] = coarse / fine if fine > 0.0 else math.inf
            verdicts[f"{name}_refinement"] = _verdict(shrink[name] >= checks.refinement_shrink,
                                                      factor=shrink[name])
    return {"dt": dt, "residuals": levels[0], "residuals_half_dt": levels[1],
            "shrink": shrink, "verdicts": verdicts}


def cmd_identities(cfg: ExperimentConfig, threshold: float | None = None) -> int:
    start = time.perf_counter()
    report = identity_study(cfg, threshold)
    out = _out_dir(cfg)
    _write_json(out / "identities.json", report)
    _write_timing(out, "identities", time.perf_counter() - start)
    return EXIT_OK if _all_pass(report["verdicts"]) else EXIT_FAIL


def _refined(lat: LatticeSpec) -> LatticeSpec:
    return LatticeSpec(lat.n, tuple(2 * c for c in lat.Nx), tuple(2 * c for c in lat.Ny), 2 * lat.Nt)


def _suite_poincare(cfg: ExperimentConfig, bg: ContactBackground, seed: int) -> dict:
    ch = cfg.checks
    lam = ineq.spectral_gap(bg)
    out = {"lambda1": lam, "verdicts": {}}
    const = ineq.poincare_constant(bg)
    rep = ineq.poincare_search(bg, ch.poincare_samples, seed)
    rel = rep.max_ratio / const
    out["poincare"] = {"constant": const, "search": rep.as_dict(), "search_over_constant": rel}
    out["verdicts"]["poincare_match"] = _verdict(1.0 - ch.poincare_match <= rel <= 1.0 + 1e-6, relative=rel)
    gconst = ineq.grad_vs_lap_constant(bg)
    grep = ineq.grad_vs_lap_search(bg, ch.poincare_samples, seed)
    grel = grep.max_ratio / gconst
    out["grad_vs_lap"] = {"constant": gconst, "search": grep.as_dict(), "search_over_constant": grel}
    out["verdicts"]["grad_vs_lap_match"] = _verdict(1.0 - ch.poincare_match <= grel <= 1.0 + 1e-6, relative=grel)
    bound = (2.0 * math.pi) ** 2 * bg.cfg.kappa
    out["verdicts"]["rayleigh_bound"] = _verdict(lam <= bound * (1.0 + ch.spectrum_rayleigh_slack), bound=bound)
    phi = ineq.random_bandlimited(bg, seed, 3, mean_zero=False)
    rho = sub_laplacian(phi, bg.cfg)
    g, report = poisson_solve(rho, bg.cfg, tol=1e-12)
    err = float(np.max(np.abs(g.values - (phi.values - phi.values.mean()))))
    scale = float(np.max(np.abs(phi.values)))
    out["green"] = {"sup_error": err, "sup_phi": scale, "iterations": report.iterations}
    out["verdicts"]["green_reproduction"] = _verdict(err <= ch.green_tol * scale, relative=err / scale)
    return out


def _suite_gn(cfg, bg, seed, spec, name) -> dict:
    ch = cfg.checks
    fine = ContactBackground.flat(_refined(bg.lattice), bg.cfg)
    a = ineq.gn_empirical_K(bg, spec, ch.gn_samples, seed)
    b = ineq.gn_empirical_K(fine, spec, ch.gn_samples, seed)
    change = abs(b.max_ratio / a.max_ratio - 1.0)
    return {
        "spec": asdict(spec),
        "coarse": a.as_dict(),
        "fine": b.as_dict(),
        "relative_change": change,
        "verdicts": {f"{name}_stability": _verdict(change <= ch.gn_stability, relative_change=change)},
    }


def _suite_it3(cfg, bg, seed) -> dict:
    ch = cfg.checks
    out = {"verdicts": {}}
    for p in (2, 3, 4):
        rep = ineq.it3_sweep(bg, p, ch.it3_samples, seed, slack=ch.it3_slack)
        out[f"p{p}"] = rep.as_dict()
        out["verdicts"][f"it3_p{p}"] = _verdict(rep.passed, worst_ratio=rep.ratio)
    s = sample(bg.lattice, "sin")
    rep = ineq.it3_check(bg, s, 2.0, slack=ch.it3_slack, witness="sin(2 pi x)")
    expected = 1.0 / math.sqrt(2.0)
    rel = abs(rep.ratio / expected - 1.0)
    out["analytic"] = {**rep.as_dict(), "expected": expected}
    out["verdicts"]["it3_analytic"] = _verdict(rel <= ch.it3_analytic_tol, relative_error=rel)
    return out


SUITES = ("poincare", "gn", "it2", "it3")


def cmd_inequalities(cfg: ExperimentConfig, which: str = "all") -> int:
    """Run the selected inequality suites; exit 0 iff every verdict passes."""
    if which not in SUITES + ("all",):
        raise ConfigError(f"--which must be one of {', '.join(SUITES + ('all',))}")
    start = time.perf_counter()
    bg = cfg.background()
    seed = cfg.init.seed
    chosen = SUITES if which == "all" else (which,)
    report = {}
    for name in chosen:
        if name == "poincare":
            report[name] = _suite_poincare(cfg, bg, seed)
        elif name == "gn":
            report[name] = _suite_gn(cfg, bg, seed, ineq.InequalitySpec.solve(0, 1, 2.0, 2.0, 0.5, bg.n), "gn")
        elif name == "it2":
            report[name] = _suite_gn(cfg, bg, seed, ineq.it2_spec(bg.n), "it2")
        else:
            report[name] = _suite_it3(cfg, bg, seed)
    verdicts = {f"{s}.{k}": v for s in chosen for k, v in report[s]["verdicts"].items()}
    out = _out_dir(cfg)
    _write_json(out / "inequalities.json", {"which": which, "suites": report, "verdicts": verdicts})
    _write_timing(out, "inequalities", time.perf_counter() - start)
    return EXIT_OK if _all_pass(verdicts) else EXIT_FAIL


def cmd_lambda(cfg: ExperimentConfig) -> int:
    """Descent estimate of the Yamabe invariant from the configured start."""
    start = time.perf_counter()
    bg = cfg.background()
    u0 = cfg.initial_factor()
    q0 = yamabe_quotient(bg, u0)
    est = lambda_estimate(bg, u0, steps=cfg.checks.lambda_steps)
    verdicts = {"lambda_zero": _verdict(abs(est) <= cfg.checks.lambda_tol, estimate=est)}
    out = _out_dir(cfg)
    _write_json(out / "lambda.json", {"initial_quotient": q0, "estimate": est, "verdicts": verdicts})
    _write_timing(out, "lambda", time.perf_counter() - start)
    return EXIT_OK if _all_pass(verdicts) else EXIT_FAIL


# -- entry point ------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cryamabe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="seed override for random fields")
        return p

    common(sub.add_parser("flow", help="integrate the flow and check its laws"))
    common(sub.add_parser("spectrum", help="lowest eigenvalues of -Lap")).add_argument(
        "--k", type=int, default=1, help="number of eigenvalues (1..10)")
    common(sub.add_parser("identities", help="evolution identity residuals")).add_argument(
        "--threshold", type=float, help="override every identity residual threshold")
    common(sub.add_parser("inequalities", help="functional inequality suites")).add_argument(
        "--which", default="all", help="poincare, gn, it2, it3 or all")
    common(sub.add_parser("lambda", help="estimate the Yamabe invariant by descent"))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = cfg.with_seed(args.seed)
        if args.out:
            cfg = cfg.with_out(args.out)
        if args.command == "flow":
            return cmd_flow(cfg)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args.k)
        if args.command == "identities":
            return cmd_identities(cfg, args.threshold)
        if args.command == "inequalities":
            return cmd_inequalities(cfg, args.which)
        return cmd_lambda(cfg)
    except ConfigError as exc:
        print(f"cryamabe: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (flow.FlowError, SpectrumError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"cryamabe: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
