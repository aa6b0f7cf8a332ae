import math
import struct
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryamabe.lattice import (
    LatticeSpec,
    ScalarField,
    make_lattice,
    read_snapshot,
    sample,
    wrap,
    write_snapshot,
)


# -- construction -----------------------------------------------------------
def test_standard_lattice_spacings():
    lat = make_lattice(1, (16, 16, 64))
    assert lat.hx == (1 / 16,) and lat.hy == (1 / 16,) and lat.ht == 1 / 16
    assert lat.shape == (16, 16, 64)


def test_incompatible_t_count_names_divisibility():
    with pytest.raises(ValueError, match=r"48.*32"):
        make_lattice(1, (16, 16, 48))


def test_small_lattice_site_count():
    assert make_lattice(1, (8, 8, 16)).size == 1024


def test_counts_below_four_rejected():
    with pytest.raises(ValueError, match="minimum"):
        make_lattice(1, (2, 4, 8))


def test_keyword_form_and_general_n():
    lat = make_lattice(2, Nx=4, Ny=4, Nt=8)
    assert lat.shape == (4, 4, 4, 4, 8)
    assert lat.density == 32.0  # 4^2 * 2!


def test_volume_and_density():
    lat = make_lattice(1, (8, 8, 16))
    assert lat.density == 4.0
    assert lat.volume == pytest.approx(16.0, rel=0, abs=1e-12)


@given(
    st.integers(4, 40), st.integers(4, 40), st.integers(4, 200)
)
def test_divisibility_rejection_is_exhaustive(nx, ny, nt):
    ok = nt % (2 * nx) == 0 and nt % (2 * ny) == 0
    if ok:
        make_lattice(1, (nx, ny, nt))
    else:
        with pytest.raises(ValueError, match="twist compatibility"):
            make_lattice(1, (nx, ny, nt))


# -- wraps --------------------------------------------------------------------
def _group_law_oracle(lat, raw):
    """Bring a raw node back to the fundamental domain with exact arithmetic.

    The lattice group is {(a, b, c) : c = -2ab mod 4}, and left translation
    by (a, b, c) maps (x, y, t) to (x + a, y + b, t + c + 2(b x - a y)).
    """
    i, j, k = raw
    x = Fraction(i, lat.Nx[0])
    y = Fraction(j, lat.Ny[0])
    t = Fraction(4 * k, lat.Nt)
    a = -math.floor(x)
    b = -math.floor(y)
    x2, y2, t2 = x + a, y + b, t - 2 * a * b + 2 * (b * x - a * y)
    t2 = t2 % 4
    idx = (x2 * lat.Nx[0], y2 * lat.Ny[0], t2 * lat.Nt / 4)
    assert all(v.denominator == 1 for v in idx)
    return tuple(int(v) for v in idx)


def test_x_wrap_shifts_t_by_twice_y():
    lat = make_lattice(1, (16, 16, 64))
    for j in range(16):
        for k in (0, 5, 63):
            expected = (0, j, (k + j * 64 // 32) % 64)
            assert wrap(lat, (16, j, k)) == expected == _group_law_oracle(lat, (16, j, k))


def test_t_wrap_is_plain():
    lat = make_lattice(1, (8, 8, 16))
    assert wrap(lat, (3, 5, 16)) == (3, 5, 0)


@given(st.integers(-40, 40), st.integers(-40, 40), st.integers(-200, 200))
def test_wrap_matches_group_law(i, j, k):
    lat = make_lattice(1, (8, 8, 32))
    assert wrap(lat, (i, j, k)) == _group_law_oracle(lat, (i, j, k))


@given(st.integers(0, 7), st.integers(0, 7), st.integers(0, 31), st.integers(-3, 3))
def test_double_x_wrap_then_unwrap(i, j, k, m):
    lat = make_lattice(1, (8, 8, 32))
    there = wrap(lat, (i + m * 8, j, k))
    # translating the wrapped point back by -m periods returns the start
    back = wrap(lat, (there[0] - m * 8, there[1], there[2]))
    assert back == (i, j, k)


@given(st.integers(0, 1023))
def test_flatten_roundtrip(flat):
    lat = make_lattice(1, (8, 8, 16))
    assert lat.flatten(lat.unflatten(flat)) == flat


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_neighbor_index_matches_wrap(axis):
    lat = make_lattice(1, (8, 8, 16))
    idx = lat.neighbor_index(axis, 1)
    for flat in range(0, lat.size, 37):
        site = list(lat.unflatten(flat))
        site[axis] += 1
        assert idx[flat] == lat.flatten(wrap(lat, site))


# -- fields -------------------------------------------------------------------
def test_constant_sample():
    lat = make_lattice(1, (8, 8, 16))
    assert np.all(sample(lat, "constant").values == 1.0)


def test_sine_depends_on_x_only():
    lat = make_lattice(1, (16, 16, 64))
    v = sample(lat, "sin").values
    assert np.all(v == v[:, :1, :1])
    assert np.ptp(v[:, 0, 0]) > 1.0


def test_random_sample_is_deterministic():
    lat = make_lattice(1, (8, 8, 16))
    a = sample(lat, "random", {"seed": 7, "cutoff": 3})
    b = sample(lat, "random", {"seed": 7, "cutoff": 3})
    assert np.array_equal(a.values, b.values)
    c = sample(lat, "random", {"seed": 8, "cutoff": 3})
    assert not np.array_equal(a.values, c.values)


def test_t_dependent_pure_mode_rejected():
    lat = make_lattice(1, (8, 8, 16))
    with pytest.raises(ValueError, match="t-dependent"):
        sample(lat, "sin", {"axis": "t"})


def test_product_sample():
    lat = make_lattice(1, (8, 8, 16))
    f = sample(lat, "product", {"factors": [{"func": "sin", "axis": "x"}, {"func": "cos", "axis": "y", "k": 2}]})
    x = lat.coordinate(0)
    y = lat.coordinate(1)
    np.testing.assert_allclose(f.values, np.broadcast_to(np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y), lat.shape))


@pytest.mark.parametrize("shift", [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 4.0), (1.0, 1.0, -2.0)])
def test_packet_is_invariant_under_the_lattice_group(shift):
    # moving the center by a lattice translation must not change the periodized packet
    lat = make_lattice(1, (8, 8, 32))
    base = sample(lat, "packet", {"m": 1, "center": (0.3, 0.6, 1.1)}).values
    a, b, c = shift
    x0, y0, t0 = 0.3, 0.6, 1.1
    moved = (x0 + a, y0 + b, t0 + c + 2 * (b * x0 - a * y0))
    other = sample(lat, "packet", {"m": 1, "center": moved}).values
    np.testing.assert_allclose(other, base, atol=1e-12)


def test_field_rejects_bad_values():
    lat = make_lattice(1, (8, 8, 16))
    with pytest.raises(ValueError, match="finite"):
        ScalarField(lat, np.full(lat.shape, np.nan))
    with pytest.raises(ValueError, match="values"):
        ScalarField(lat, np.zeros(10))


def test_field_is_read_only():
    lat = make_lattice(1, (8, 8, 16))
    f = sample(lat, "constant")
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 2.0


def test_field_arithmetic_checks_lattice():
    a = sample(make_lattice(1, (8, 8, 16)), "constant")
    b = sample(make_lattice(1, (8, 8, 32)), "constant")
    with pytest.raises(ValueError, match="different lattices"):
        a + b


# -- snapshots ----------------------------------------------------------------
def test_snapshot_roundtrip_and_layout(tmp_path):
    lat = make_lattice(1, (8, 8, 16))
    f = sample(lat, "random", {"seed": 3})
    path = tmp_path / "f.cryf"
    write_snapshot(path, f, time=1.25)
    raw = path.read_bytes()
    assert raw[:4] == b"CRYF"
    assert struct.unpack_from("<IIIIId", raw, 4) == (1, 1, 8, 8, 16, 1.25)
    body = np.frombuffer(raw, dtype="<f8", offset=4 + 4 * 5 + 8)
    np.testing.assert_array_equal(body, f.values.reshape(-1))
    g, t = read_snapshot(path)
    assert t == 1.25 and g.lattice == lat
    np.testing.assert_array_equal(g.values, f.values)


def test_snapshot_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(path)


def test_lattice_equality_is_structural():
    assert make_lattice(1, (8, 8, 16)) == LatticeSpec(1, (8,), (8,), 16)
