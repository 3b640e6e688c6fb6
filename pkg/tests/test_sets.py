import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsp.sets import (box_set, full_space, inflate, intersect,
                           product_set, singleton, unit_circle_pairs)


def test_box_membership_and_distance():
    box = box_set([0.0, 0.0], [1.0, 2.0])
    assert box.membership(np.array([0.5, 1.0]))
    assert box.distance(np.array([0.5, 1.0])) == 0.0
    assert box.distance(np.array([2.0, 1.0])) == pytest.approx(1.0)
    assert box.distance(np.array([2.0, 3.0])) == pytest.approx(np.sqrt(2.0))


def test_box_with_infinite_bounds():
    box = box_set([-np.inf, 0.0], [np.inf, 1.0])
    assert box.membership(np.array([1e9, 0.5]))
    assert box.distance(np.array([-1e9, 2.0])) == pytest.approx(1.0)


def test_membership_implies_distance_below_tolerance():
    box = box_set([0.0], [1.0], tolerance=1e-9)
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.uniform(-2, 3, size=1)
        if box.membership(x):
            assert box.distance(x) <= box.tolerance + 1e-15 or \
                box.distance(x) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50),
       st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_box_distance_is_1_lipschitz(x0, x1, d0, d1):
    box = box_set([0.0, -1.0], [2.0, 1.0])
    a = np.array([x0, x1])
    step = np.array([d0, d1])
    gap = abs(box.distance(a) - box.distance(a + step))
    assert gap <= np.linalg.norm(step) + box.tolerance


def test_singleton_and_interval():
    pt = singleton([1.0, 2.0])
    assert pt.distance(np.array([1.0, 2.0])) == 0.0
    assert pt.distance(np.array([1.0, 3.0])) == pytest.approx(1.0)


def test_product_set_combines_in_quadrature():
    blocks = [((0,), box_set([0.0], [0.0])), ((1, 2), box_set([0, 0], [1, 1]))]
    prod = product_set(blocks)
    x = np.array([3.0, 0.5, 2.0])
    assert prod.distance(x) == pytest.approx(np.hypot(3.0, 1.0))
    assert not prod.membership(x)
    assert prod.membership(np.array([0.0, 0.3, 0.7]))


def test_intersect_lower_bounds_distance():
    a = box_set([0.0], [2.0])
    b = box_set([1.0], [3.0])
    both = intersect(a, b)
    assert both.membership(np.array([1.5]))
    # true distance from 5.0 to [1, 2] is 3.0; the max rule is exact here
    assert both.distance(np.array([5.0])) == pytest.approx(3.0)
    assert not both.membership(np.array([2.5]))


def test_inflate_grows_membership():
    base = singleton([0.0, 0.0])
    ball = inflate(base, 1.0)
    assert ball.membership(np.array([0.6, 0.8]))
    assert ball.distance(np.array([3.0, 0.0])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        inflate(base, -1.0)


def test_unit_circle_pairs():
    torus = unit_circle_pairs([(0, 1), (2, 3)])
    good = np.array([1.0, 0.0, np.cos(0.3), np.sin(0.3)])
    assert torus.membership(good)
    bad = np.array([2.0, 0.0, 1.0, 0.0])
    assert torus.distance(bad) == pytest.approx(1.0)
    assert full_space().membership(bad)
