import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryamabe import flow
from cryamabe.conformal import ContactBackground, rbar
from cryamabe.elliptic import gershgorin_bound
from cryamabe.flow import (
    FlowConfig,
    FlowError,
    FlowState,
    Trajectory,
    centered_derivative,
    cfl_dt,
    check_identities,
    fit_decay,
    flow_rhs,
    flow_rhs_expanded,
    monotonicity_verdicts,
    run,
    signal_window,
    step_imex,
    step_rk4,
)
from cryamabe.lattice import make_lattice, sample


@pytest.fixture(scope="module")
def bg():
    return ContactBackground.flat(make_lattice(1, (8, 8, 32)))


def _sine(bg, amp=0.1):
    return 1.0 + sample(bg.lattice, "sin", {"amplitude": amp})


def _positive(bg, seed, amp=0.3):
    f = sample(bg.lattice, "random", {"seed": seed, "cutoff": 2})
    return 1.0 + f * (amp / np.abs(f.values).max())


@pytest.fixture(scope="module")
def sine_run(bg):
    cfg = FlowConfig(t_end=0.5, snapshot_every=40)
    return run(bg, _sine(bg), cfg)


# -- right-hand side ----------------------------------------------------------
@pytest.mark.parametrize("c", [1.0, 0.3, 4.0])
def test_constants_are_fixed_points(bg, c):
    u = sample(bg.lattice, "constant", {"value": c})
    assert np.all(flow_rhs(bg, u).values == 0.0)
    assert np.all(flow_rhs_expanded(bg, u).values == 0.0)


@settings(max_examples=15)
@given(st.integers(0, 2**31))
def test_rhs_forms_agree(seed):
    bg = ContactBackground.flat(make_lattice(1, (8, 8, 32)))
    u = _positive(bg, seed)
    a = flow_rhs(bg, u).values
    b = flow_rhs_expanded(bg, u).values
    assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


def test_rhs_forms_agree_on_curved_background():
    lat = make_lattice(1, (8, 8, 16))
    bg = ContactBackground(lat, 0.5 + 0.2 * sample(lat, "cos", {"axis": "y"}))
    u = 1.0 + 0.2 * sample(lat, "sin")
    a = flow_rhs(bg, u).values
    b = flow_rhs_expanded(bg, u).values
    assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


# -- step size ----------------------------------------------------------------
def test_cfl_dt_examples(bg):
    cfg = FlowConfig()
    one = sample(bg.lattice, "constant")
    lam = gershgorin_bound(bg.lattice)
    assert cfl_dt(bg, one, cfg) == pytest.approx(0.5 / (2 * lam), rel=1e-14)
    assert cfl_dt(bg, one, cfg, bound=2 * lam) == pytest.approx(0.5 * cfl_dt(bg, one, cfg), rel=1e-14)
    u = _positive(bg, 1)
    assert cfl_dt(bg, 3.0 * u, cfg) == pytest.approx(9.0 * cfl_dt(bg, u, cfg), rel=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [dict(integrator="euler"), dict(dt=0.0), dict(dt="fast"), dict(cfl_safety=1.5), dict(t_end=0.0),
     dict(snapshot_every=-1)],
)
def test_flow_config_validation(kwargs):
    with pytest.raises(ValueError):
        FlowConfig(**kwargs)


# -- single steps -------------------------------------------------------------
@pytest.mark.parametrize("stepper", [step_rk4, step_imex])
def test_constant_state_is_unchanged(bg, stepper):
    s = FlowState(sample(bg.lattice, "constant"))
    out = stepper(bg, s, 1e-3)
    assert np.abs(out.u.values - 1.0).max() <= 1e-14
    assert out.step == 1 and out.time == 1e-3


def test_rk4_step_agrees_with_euler_to_second_order(bg):
    u = _sine(bg)
    rhs = flow_rhs(bg, u).values
    errs = []
    for dt in (1e-4, 5e-5):
        out = step_rk4(bg, FlowState(u), dt).u.values
        errs.append(np.abs(out - (u.values + dt * rhs)).max())
    assert 1.8 <= math.log2(errs[0] / errs[1]) <= 2.2


def test_rk4_and_imex_agree_to_second_order(bg):
    u = _sine(bg)
    errs = []
    for dt in (1e-4, 5e-5):
        a = step_rk4(bg, FlowState(u), dt).u.values
        b = step_imex(bg, FlowState(u), dt).u.values
        errs.append(np.abs(a - b).max())
    assert 1.8 <= math.log2(errs[0] / errs[1]) <= 2.2


def test_step_rejects_bad_dt(bg):
    with pytest.raises(ValueError):
        step_rk4(bg, FlowState(_sine(bg)), 0.0)


# -- run ----------------------------------------------------------------------
def test_stationary_run(bg):
    res = run(bg, sample(bg.lattice, "constant"), FlowConfig(dt=1e-3, t_end=0.1, snapshot_every=10))
    r = res.trajectory.column("rbar")
    assert len(res.trajectory) == 101
    assert np.all(r == 0.0)
    for name in ("volume", "energy", "umin", "umax"):
        col = res.trajectory.column(name)
        assert np.all(col == col[0])
    assert np.abs(res.final.u.values - 1.0).max() <= 1e-12
    ids = check_identities(bg, res)
    assert max(ids.as_dict().values()) <= 1e-10


def test_run_records(sine_run):
    traj = sine_run.trajectory
    assert traj[0].step == 0 and traj[0].t == 0.0 and traj[0].dt == 0.0
    assert traj[-1].t == pytest.approx(0.5, abs=1e-12)
    assert np.all(np.diff(traj.column("t")) > 0.0)
    assert np.all(traj.column("ratio") >= 1.0)
    assert sine_run.final.step == traj[-1].step == len(traj) - 1
    assert sine_run.rejected_steps == 0


def test_trajectory_columns_are_read_only(sine_run):
    with pytest.raises(ValueError):
        sine_run.trajectory.column("rbar")[0] = 1.0


def test_run_conserves_volume(sine_run):
    assert flow.volume_drift(sine_run.trajectory) <= 1e-6


def test_run_monotonicity(bg, sine_run):
    verdicts = monotonicity_verdicts(sine_run.trajectory, 1, 1e-9, bg.lattice.volume)
    assert {k: v.status for k, v in verdicts.items()} == dict.fromkeys(verdicts, "pass")


def test_rbar_column_matches_direct_evaluation(bg, sine_run):
    final = sine_run.final
    assert sine_run.trajectory[-1].rbar == pytest.approx(rbar(bg, final.u), rel=1e-10)


def test_on_record_sees_every_record(bg):
    seen = []
    res = run(bg, _sine(bg), FlowConfig(dt=1e-3, t_end=0.01), on_record=seen.append)
    assert [r.step for r in seen] == list(range(len(res.trajectory)))


def test_snapshot_cadence(sine_run):
    steps = sorted(sine_run.snapshots)
    assert steps[:5] == [0, 1, 39, 40, 41]
    assert steps[-1] == sine_run.final.step


def test_imex_run_decays(bg):
    res = run(bg, _sine(bg), FlowConfig(integrator="imex", dt=2e-3, t_end=0.2))
    r = res.trajectory.column("rbar")
    assert r[-1] < 0.1 * r[0]
    assert flow.volume_drift(res.trajectory) < 1e-2


def test_persistent_positivity_loss_is_a_hard_error(bg):
    with pytest.raises(FlowError, match="halvings"):
        run(bg, _positive(bg, 2, 0.9), FlowConfig(dt=5.0, t_end=5.0, max_retries=2))


def test_positivity_loss_is_retried(bg):
    res = run(bg, _positive(bg, 2, 0.9), FlowConfig(dt=0.05, t_end=0.05, max_retries=10))
    assert res.rejected_steps > 0
    assert res.final.u.values.min() > 0.0


def test_mismatched_lattice_rejected(bg):
    with pytest.raises(ValueError):
        run(bg, sample(make_lattice(1, (8, 8, 16)), "constant"), FlowConfig(t_end=0.1))


# -- identities ---------------------------------------------------------------
def test_identities_mid_run(bg, sine_run):
    ids = check_identities(bg, sine_run)
    assert ids.rbar <= 0.02 and ids.volume_form <= 0.02 and ids.energy <= 0.02
    assert ids.curvature <= 0.05
    assert len(ids.centers) >= 2


def test_identity_residuals_shrink_under_dt_halving(bg):
    out = []
    for dt in (2e-4, 1e-4):
        every = round(0.02 / dt)
        res = run(bg, _sine(bg), FlowConfig(dt=dt, t_end=0.1, snapshot_every=every))
        out.append(check_identities(bg, res, band=None).as_dict())
    for key in out[0]:
        assert out[0][key] >= 2.0 * out[1][key], key


def test_trajectory_residual_columns(sine_run):
    traj = sine_run.trajectory
    mid = slice(1, len(traj) // 4)
    assert np.nanmax(traj.column("rdot_residual")[mid]) <= 0.02
    assert np.nanmax(traj.column("energy_identity_residual")[mid]) <= 0.02
    assert math.isnan(traj[0].rdot_residual)


def test_curvature_identity_floor_shrinks_under_grid_refinement():
    # on t-dependent data the curvature identity has a spatial floor, so refine the grid
    floors = []
    for N in (8, 16):
        bgN = ContactBackground.flat(make_lattice(1, (N, N, 4 * N)))
        packet = sample(bgN.lattice, "packet", {"m": 1, "center": (0.3, 0.6, 1.1)})
        u = 1.0 + packet * (0.1 / np.abs(packet.values).max())
        dt = 1e-5
        s0 = flow.Snapshot(0, 0.0, u)
        s1 = step_rk4(bgN, FlowState(u), dt)
        s2 = step_rk4(bgN, s1, dt)
        trip = (s0, flow.Snapshot(1, s1.time, s1.u), flow.Snapshot(2, s2.time, s2.u))
        floors.append(flow.triplet_residuals(bgN, trip)["curvature"])
    assert floors[1] < 0.5 * floors[0]


def test_identities_need_triplets(bg):
    res = run(bg, _sine(bg), FlowConfig(dt=1e-3, t_end=0.005))
    with pytest.raises(ValueError, match="consecutive"):
        check_identities(bg, res)


# -- decay fitting --------------------------------------------------------------
@given(st.floats(0.01, 50.0), st.floats(1e-3, 1e3))
def test_fit_recovers_exact_exponential(A, C):
    t = np.linspace(0.0, 0.5, 40)
    fit = fit_decay(t, C * np.exp(-A * t))
    assert fit.rate == pytest.approx(A, rel=1e-10, abs=1e-10)
    assert fit.prefactor == pytest.approx(C, rel=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_of_constant_series():
    fit = fit_decay(np.linspace(0, 1, 10), np.full(10, 2.0))
    assert fit.rate == pytest.approx(0.0, abs=1e-12) and fit.r2 == 1.0


def test_fit_rejects_nonpositive_values():
    with pytest.raises(ValueError):
        fit_decay(np.linspace(0, 1, 5), np.array([1.0, 0.5, 0.0, 0.2, 0.1]))


def test_fit_window():
    t = np.linspace(0, 2, 201)
    v = np.where(t < 1, np.exp(-t), np.exp(-1) * np.exp(-3 * (t - 1)))
    assert fit_decay(t, v, (1.0, 2.0)).rate == pytest.approx(3.0, rel=1e-8)


def test_signal_window():
    t = np.linspace(0, 10, 101)
    v = np.exp(-5 * t)
    lo, hi = signal_window(t, v, (1e-10, 1e-2))
    assert lo == pytest.approx(1.0) and hi == pytest.approx(4.6)
    assert signal_window(t, np.zeros(101)) is None


# -- helpers ------------------------------------------------------------------
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=10), st.floats(-3, 3), st.floats(-3, 3))
def test_centered_derivative_exact_on_quadratics(gaps, a, b):
    t = np.concatenate([[0.0], np.cumsum(gaps)])
    d = centered_derivative(t, a * t**2 + b * t)
    np.testing.assert_allclose(d[1:-1], 2 * a * t[1:-1] + b, atol=1e-9)
    assert np.isnan(d[0]) and np.isnan(d[-1])


def test_monotonicity_reports_first_violation():
    traj = Trajectory(capacity=2)
    for k, (r, lo) in enumerate([(1.0, 0.5), (0.9, 0.6), (0.95, 0.55), (0.8, 0.7)]):
        traj.append(step=k, t=0.1 * k, dt=0.1, rbar=r, volume=16.0, energy=1.0, umin=lo, umax=1.0,
                    ratio=1.0 / lo)
    v = monotonicity_verdicts(traj, 1)
    assert v["rbar_nonincreasing"].status == "fail" and v["rbar_nonincreasing"].step == 2
    assert v["umin_nondecreasing"].step == 2
    assert v["ratio_nonincreasing"].step == 2
    assert v["rbar_nonnegative"].status == "pass"
    assert len(traj) == 4


def test_umin_volume_bound_detects_violation():
    traj = Trajectory()
    traj.append(step=0, t=0.0, dt=0.0, rbar=0.0, volume=16.0, energy=0.0, umin=1.1, umax=1.2, ratio=1.2 / 1.1)
    assert flow.umin_volume_bound(traj, 16.0, 1).status == "fail"
