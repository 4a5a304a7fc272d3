import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctxflux.dt import euclidean_dt, euclidean_dt_with_labels, squared_edt_with_labels
from oracles import brute_edt, pixel


def test_single_site_corner():
    sites = np.zeros((3, 3), bool)
    sites[0, 0] = True
    dist, nearest = euclidean_dt_with_labels(sites)
    assert pixel(dist, 2, 2) == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    assert tuple(pixel(nearest, 2, 2)) == (0, 0)


def test_tie_prefers_smaller_x_on_same_row():
    sites = np.zeros((3, 5), bool)
    sites[1, 0] = sites[1, 4] = True  # (0,1) and (4,1)
    dist, nearest = euclidean_dt_with_labels(sites)
    assert pixel(dist, 2, 1) == 2.0
    assert tuple(pixel(nearest, 2, 1)) == (0, 1)


def test_tie_prefers_smaller_y():
    sites = np.zeros((5, 5), bool)
    sites[4, 0] = sites[0, 4] = True  # (0,4) and (4,0), both sqrt(8) from (2,2)
    _, nearest = euclidean_dt_with_labels(sites)
    assert tuple(pixel(nearest, 2, 2)) == (4, 0)


def test_no_sites():
    with pytest.raises(ValueError, match="no sites"):
        euclidean_dt_with_labels(np.zeros((4, 4), bool))
    assert np.all(np.isinf(euclidean_dt(np.zeros((2, 2), bool))))


@pytest.mark.parametrize("seed", range(12))
def test_matches_brute_force_48(seed):
    rng = np.random.default_rng(seed)
    sites = rng.random((48, 48)) < [0.001, 0.01, 0.05, 0.3][seed % 4]
    sites[rng.integers(48), rng.integers(48)] = True
    d2, labels = squared_edt_with_labels(sites)
    bd2, blabels = brute_edt(sites)
    np.testing.assert_array_equal(d2, bd2)
    np.testing.assert_array_equal(labels, blabels)


def test_symmetric_ties_lattice():
    # regularly spaced sites make many exact multi-way ties
    sites = np.zeros((21, 21), bool)
    sites[::4, ::4] = True
    sites[2::8, 2::8] = True
    d2, labels = squared_edt_with_labels(sites)
    bd2, blabels = brute_edt(sites)
    np.testing.assert_array_equal(d2, bd2)
    np.testing.assert_array_equal(labels, blabels)


site_maps = arrays(bool, st.tuples(st.integers(1, 20), st.integers(1, 20)))


@settings(max_examples=60, deadline=None)
@given(site_maps)
def test_label_validity(sites):
    if not sites.any():
        sites = sites.copy()
        sites[0, 0] = True
    dist, nearest = euclidean_dt_with_labels(sites)
    h, w = sites.shape
    yy, xx = np.mgrid[:h, :w]
    lx, ly = nearest[..., 0], nearest[..., 1]
    assert np.all(sites[ly, lx])
    np.testing.assert_allclose(dist, np.hypot(lx - xx, ly - yy), atol=1e-6)
    np.testing.assert_array_equal(dist == 0, sites)


@settings(max_examples=60, deadline=None)
@given(site_maps, st.data())
def test_adding_a_site_never_increases_distance(sites, data):
    if not sites.any():
        sites = sites.copy()
        sites[0, 0] = True
    h, w = sites.shape
    x = data.draw(st.integers(0, w - 1))
    y = data.draw(st.integers(0, h - 1))
    more = sites.copy()
    more[y, x] = True
    assert np.all(euclidean_dt(more) <= euclidean_dt(sites))


def test_lipschitz_on_random_pairs():
    rng = np.random.default_rng(3)
    sites = rng.random((40, 50)) < 0.01
    sites[5, 5] = True
    dist = euclidean_dt(sites)
    for _ in range(2000):
        x1, x2 = rng.integers(50, size=2)
        y1, y2 = rng.integers(40, size=2)
        assert abs(dist[y1, x1] - dist[y2, x2]) <= math.hypot(x1 - x2, y1 - y2) + 1e-9


def test_deterministic():
    rng = np.random.default_rng(9)
    sites = rng.random((64, 64)) < 0.02
    a = squared_edt_with_labels(sites)
    b = squared_edt_with_labels(sites.copy())
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
