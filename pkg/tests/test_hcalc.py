import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryamabe import hcalc
from cryamabe.elliptic import dense_matrix
from cryamabe.hcalc import OperatorConfig
from cryamabe.lattice import ScalarField, make_lattice, sample

PI2 = math.pi**2


def _lattice(N):
    return make_lattice(1, (N, N, 4 * N))


def _random(lat, seed):
    return ScalarField(lat, np.random.default_rng(seed).standard_normal(lat.shape))


def _order(errors):
    return math.log2(errors[0] / errors[1])


# -- frame derivatives ----------------------------------------------------------
def test_x_derivative_of_sine_is_second_order():
    errs = []
    for N in (16, 32):
        lat = _lattice(N)
        f = sample(lat, "sin")
        exact = 2 * math.pi * np.cos(2 * math.pi * lat.coordinate(0))
        errs.append(np.abs(hcalc.frame_derivative(f, "X").values - exact).max())
    assert 1.8 <= _order(errs) <= 2.2


def test_y_derivative_of_x_mode_is_exactly_zero():
    f = sample(_lattice(8), "sin")
    assert np.all(hcalc.frame_derivative(f, "Y").values == 0.0)


def test_t_derivative_of_constant():
    f = sample(_lattice(8), "constant", {"value": 3.0})
    assert np.all(hcalc.frame_derivative(f, "T").values == 0.0)


def test_direction_names():
    lat = _lattice(8)
    f = sample(lat, "random", {"seed": 1})
    assert np.array_equal(hcalc.frame_derivative(f, "X").values, hcalc.frame_derivative(f, 0).values)
    with pytest.raises(ValueError):
        hcalc.frame_derivative(f, "Z")


# -- sub-Laplacian ----------------------------------------------------------
def test_sub_laplacian_kills_constants(backend):
    f = sample(_lattice(8), "constant", {"value": 2.5})
    assert np.all(hcalc.sub_laplacian(f).values == 0.0)


def test_sub_laplacian_of_sine_converges_at_second_order(backend):
    errs = []
    for N in (16, 32):
        lat = _lattice(N)
        f = sample(lat, "sin")
        errs.append(np.abs(hcalc.sub_laplacian(f).values + PI2 * f.values).max())
    assert 1.8 <= _order(errs) <= 2.2


def test_dense_operator_is_symmetric():
    lat = _lattice(8)
    A = dense_matrix(lat)
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()


@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_self_adjoint(seed_f, seed_g):
    lat = make_lattice(1, (8, 8, 32))
    f, g = _random(lat, seed_f), _random(lat, seed_g)
    lf, lg = hcalc.sub_laplacian(f), hcalc.sub_laplacian(g)
    gap = abs(np.sum(lf.values * g.values) - np.sum(f.values * lg.values))
    assert gap <= 1e-10 * np.linalg.norm(f.values) * np.linalg.norm(g.values)


@given(st.integers(0, 2**31), st.integers(0, 2**31))
def test_weak_definition_pairing(seed_f, seed_g):
    # <Lap f, g> + int <df, dg> = 0 with the averaged one-sided pairing
    lat = make_lattice(1, (8, 8, 32))
    f, g = _random(lat, seed_f), _random(lat, seed_g)
    lhs = hcalc.integrate(hcalc.sub_laplacian(f) * g)
    cross = hcalc.integrate(hcalc.horizontal_inner(f, g))
    assert abs(lhs + cross) <= 1e-11 * (abs(lhs) + abs(cross))


@given(st.integers(0, 2**31))
def test_negative_semidefinite(seed):
    lat = make_lattice(1, (8, 8, 32))
    f = _random(lat, seed)
    assert hcalc.integrate(f * hcalc.sub_laplacian(f)) < 0.0


def test_quadratic_form_vanishes_only_on_constants():
    lat = _lattice(8)
    assert hcalc.dirichlet_energy(sample(lat, "constant")) == 0.0
    assert hcalc.dirichlet_energy(sample(lat, "packet")) > 0.0


def test_kappa_scaling_is_exact(backend):
    lat = _lattice(8)
    f = sample(lat, "random", {"seed": 5})
    a = hcalc.sub_laplacian(f, OperatorConfig(0.25)).values
    b = hcalc.sub_laplacian(f, OperatorConfig(0.5)).values
    assert np.array_equal(b, 2.0 * a)


def test_operator_config_rejects_nonpositive_kappa():
    with pytest.raises(ValueError):
        OperatorConfig(0.0)


# -- inner product and norms ----------------------------------------------------
def test_inner_of_constant_vanishes():
    u = sample(_lattice(8), "constant", {"value": 4.0})
    assert np.all(hcalc.horizontal_inner(u, u).values == 0.0)


def test_gradient_energy_of_sine():
    # |grad sin(2 pi x)|^2 = kappa (2 pi)^2 cos^2 integrates to pi^2 * Vol / 2 = 8 pi^2
    vals = []
    for N in (16, 32):
        f = sample(_lattice(N), "sin")
        vals.append(hcalc.integrate(hcalc.horizontal_inner(f, f)))
    errs = [abs(v - 8 * PI2) for v in vals]
    assert errs[1] < errs[0] and errs[0] < 0.05 * 8 * PI2
    assert 1.8 <= _order(errs) <= 2.2


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_inner_is_bilinear(a, b, seed):
    lat = _lattice(8)
    f, g, h = (_random(lat, seed + i) for i in range(3))
    lhs = hcalc.horizontal_inner(a * f + b * g, h).values
    rhs = a * hcalc.horizontal_inner(f, h).values + b * hcalc.horizontal_inner(g, h).values
    scale = 1.0 + np.abs(hcalc.horizontal_inner(f, h).values).max() + np.abs(hcalc.horizontal_inner(g, h).values).max()
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale * (1 + abs(a) + abs(b))


def test_volume_and_l2_norms():
    lat = _lattice(8)
    assert hcalc.lp_norm(sample(lat, "constant"), 2) ** 2 == pytest.approx(16.0, rel=1e-14)
    assert hcalc.lp_norm(sample(_lattice(16), "sin"), 2) ** 2 == pytest.approx(8.0, rel=1e-12)
    zero = sample(lat, "constant", {"value": 0.0})
    assert hcalc.lp_norm(zero, 3) == 0.0
    with pytest.raises(ValueError):
        hcalc.lp_norm(zero, 0.5)


def test_sup_norm():
    f = sample(_lattice(8), "random", {"seed": 2})
    assert hcalc.lp_norm(f, math.inf) == np.abs(f.values).max()


def test_s12_norm_of_constant():
    assert hcalc.s12_norm(sample(_lattice(8), "constant")) == pytest.approx(4.0, rel=1e-14)


def test_mean_examples():
    lat = _lattice(16)
    assert hcalc.mean(sample(lat, "constant", {"value": 2.5})) == 2.5
    assert abs(hcalc.mean(sample(lat, "sin"))) < 1e-15
    assert hcalc.mean(1.0 + sample(lat, "sin", {"amplitude": 0.1})) == pytest.approx(1.0, abs=1e-15)


def test_centered_gradient_energy_matches_stencil_energy_to_second_order():
    errs = []
    for N in (16, 32):
        f = sample(_lattice(N), "random", {"seed": 4, "cutoff": 2})
        centered = hcalc.lp_norm(ScalarField(f.lattice, hcalc.grad_magnitude(f)), 2) ** 2
        errs.append(abs(centered - hcalc.dirichlet_energy(f)) / hcalc.dirichlet_energy(f))
    assert 1.6 <= _order(errs) <= 2.4


# -- Hessian ------------------------------------------------------------------
def test_hessian_of_sine():
    errs = []
    for N in (16, 32):
        lat = _lattice(N)
        f = sample(lat, "sin")
        H = hcalc.horizontal_hessian(f)
        errs.append(np.abs(H.component(0, 0).values + PI2 * f.values).max())
        for a, b in ((0, 1), (1, 0), (1, 1)):
            assert np.abs(H.component(a, b).values).max() <= 1e-12
    assert 1.8 <= _order(errs) <= 2.2


def test_hessian_of_constant_vanishes():
    H = hcalc.horizontal_hessian(sample(_lattice(8), "constant"))
    assert all(np.all(H.component(a, b).values == 0.0) for a in range(2) for b in range(2))


def test_hessian_trace_tracks_sub_laplacian():
    errs = []
    for N in (16, 32):
        f = sample(_lattice(N), "random", {"seed": 9, "cutoff": 2})
        tr = hcalc.horizontal_hessian(f).trace().values
        errs.append(np.abs(tr - hcalc.sub_laplacian(f).values).max())
    assert errs[1] < errs[0] / 3


def _commutator_residual(N, f_of):
    lat = _lattice(N)
    f = f_of(lat)
    cfg = hcalc.DEFAULT_CONFIG
    H = hcalc.horizontal_hessian(f, cfg)
    # component(a, b) = E_b E_a f, so E_X E_Y f - E_Y E_X f = comp(1, 0) - comp(0, 1)
    comm = H.component(1, 0).values - H.component(0, 1).values
    tf = hcalc.frame_derivative(f, "T").values
    return np.abs(comm + 4 * cfg.kappa * tf).max()


def test_commutator_is_second_order_away_from_seams():
    packet = lambda lat: sample(lat, "packet", {"m": 1, "width": 40.0, "center": (0.5, 0.5, 1.0)})  # noqa: E731
    errs = [_commutator_residual(N, packet) for N in (16, 32)]
    assert 1.8 <= _order(errs) <= 2.2


def test_commutator_is_first_order_across_seams():
    packet = lambda lat: sample(lat, "packet", {"m": 1, "center": (0.1, 0.9, 0.5)})  # noqa: E731
    errs = [_commutator_residual(N, packet) for N in (8, 16, 32)]
    assert errs[2] < errs[1] < errs[0]
    assert _order(errs[1:]) >= 0.8


def test_higher_order_magnitudes():
    lat = _lattice(16)
    f = sample(lat, "sin")
    assert np.array_equal(hcalc.derivative_magnitude(f, 0), np.abs(f.values))
    third = hcalc.derivative_magnitude(f, 3)
    # E_X^3 sin = -(pi)^3 cos up to O(h^2); other index words vanish
    exact = math.pi**3 * np.abs(np.cos(2 * math.pi * lat.coordinate(0)))
    assert np.abs(third - np.broadcast_to(exact, lat.shape)).max() < 0.1 * math.pi**3
    with pytest.raises(ValueError):
        hcalc.derivative_magnitude(f, -1)


def test_frame_names():
    assert hcalc.frame_names(1) == ["X", "Y"]
    assert hcalc.frame_names(2) == ["X_1", "X_2", "Y_1", "Y_2"]
