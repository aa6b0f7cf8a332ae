import numpy as np
import pytest

from cryamabe import _backend, _fallback
from cryamabe.lattice import make_lattice, sample

pytestmark = pytest.mark.skipif(not _backend.compiled_available(), reason="compiled kernels not built")


def _positive(lat, seed):
    rng = np.random.default_rng(seed)
    packet = sample(lat, "packet", {"m": 1, "center": tuple(rng.uniform(0, 1, 3))}).values
    return 1.0 + 0.1 * sample(lat, "random", {"seed": seed, "cutoff": 2}).values / 5 + 0.05 * packet


@pytest.mark.parametrize("counts", [(8, 8, 16), (8, 8, 32), (16, 16, 64), (4, 8, 16)])
def test_sublaplacian_backends_agree(counts):
    lat = make_lattice(1, counts)
    u = _positive(lat, 1)
    with _backend.use_backend("compiled"):
        a, sa = _backend.sublaplacian(u, lat, 0.25)
    b, sb = _fallback.sublaplacian(u, lat, 0.25)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-11 * np.abs(b).max())
    assert sa == pytest.approx(sb, rel=1e-13)


def test_flow_eval_backends_agree():
    lat = make_lattice(1, (16, 16, 64))
    u = _positive(lat, 2)
    with _backend.use_backend("compiled"):
        ra, la, sa = _backend.flow_eval(u, lat, 0.25, None, True)
    with _backend.use_backend("python"):
        rb, lb, sb = _backend.flow_eval(u, lat, 0.25, None, True)
    np.testing.assert_allclose(ra, rb, rtol=0, atol=1e-12 * np.abs(rb).max())
    np.testing.assert_allclose(sa, sb, rtol=1e-12)


def test_rk4_backends_agree():
    lat = make_lattice(1, (16, 16, 64))
    u = _positive(lat, 3)
    with _backend.use_backend("compiled"):
        a, sa, la = _backend.rk4_step(u, lat, 0.25, 1e-4)
    with _backend.use_backend("python"):
        b, sb, lb = _backend.rk4_step(u, lat, 0.25, 1e-4)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    assert la == pytest.approx(lb, rel=1e-14)
    np.testing.assert_allclose(sa, sb, rtol=1e-12)


def test_rk4_reports_lost_positivity():
    lat = make_lattice(1, (8, 8, 32))
    u = _positive(lat, 4)
    for name in ("compiled", "python"):
        with _backend.use_backend(name):
            _, _, lowest = _backend.rk4_step(u, lat, 0.25, 10.0)
        assert lowest <= 0.0


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _backend.set_backend("gpu")


def test_use_backend_restores_selection():
    before = _backend.get_backend()
    with _backend.use_backend("python"):
        assert _backend.get_backend() == "python"
    assert _backend.get_backend() == before


def test_general_n_runs_on_fallback():
    lat = make_lattice(2, Nx=4, Ny=4, Nt=8)
    u = np.ones(lat.shape)
    lap, s = _backend.sublaplacian(u, lat, 0.25)
    assert np.all(lap == 0.0) and s == 0.0
