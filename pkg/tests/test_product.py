from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.errors import InputError
from horolab.groups import GroupSpec, ball, growth_series, make_oracle
from horolab.product import (
    FactorBall,
    ProductMetric,
    ProductSpace,
    ball_slice_volume,
    check_triangle_inequality,
    perfect_diamond,
)

F2 = GroupSpec("free", rank=2)
Z1 = GroupSpec("integer_lattice", dim=1)


@pytest.fixture(scope="module")
def m_f2():
    return ProductMetric(make_oracle(F2), make_oracle(F2), 1)


@pytest.fixture(scope="module")
def g_f2():
    return growth_series(F2, 8)


def test_rho_examples(m_f2):
    o = m_f2.first
    x = (o.canon(["a"]), o.identity)
    assert m_f2.rho(x, x) == 0
    y = (o.identity, o.canon(["b"]))
    assert m_f2.rho((o.identity, o.identity), (o.canon(["a"]), o.canon(["b"]))) == 2
    m2 = ProductMetric(make_oracle(F2), make_oracle(F2), 2)
    a3 = o.canon(["a", "a", "a"])
    b4 = o.canon(["b", "a", "b", "a"])
    assert m2.rho((o.identity, o.identity), (a3, b4)) == 5


def test_rho_left_invariance(m_f2):
    o1, o2 = m_f2.first, m_f2.second
    pts = [el for el, _ in ball(o1, 2)]
    g = (o1.canon(["a", "b"]), o2.canon(["B"]))
    for x1 in pts[:5]:
        for y1 in pts[5:10]:
            x = (x1, o2.identity)
            y = (y1, o2.canon(["a"]))
            gx = m_f2.multiply(g, x)
            gy = m_f2.multiply(g, y)
            assert m_f2.rho(gx, gy) == m_f2.rho(x, y)


def test_perfect_diamond_counts(m_f2):
    assert len(perfect_diamond(m_f2, m_f2.origin, 0)) == 1
    assert len(perfect_diamond(m_f2, m_f2.origin, 2)) == 49


def test_perfect_diamond_lattice_cross():
    mz = ProductMetric(make_oracle(Z1), make_oracle(Z1), 1)
    assert len(perfect_diamond(mz, mz.origin, 1)) == 5


def test_slice_identity(m_f2, g_f2):
    for n in range(5):
        sl = ball_slice_volume(m_f2, g_f2, g_f2, n)
        assert sl.total == len(perfect_diamond(m_f2, m_f2.origin, n))
    assert ball_slice_volume(m_f2, g_f2, g_f2, 0).total == 1


def test_slice_identity_lattice():
    mz = ProductMetric(make_oracle(Z1), make_oracle(Z1), 1)
    gz = growth_series(Z1, 8)
    assert ball_slice_volume(mz, gz, gz, 2).total == 13
    for n in range(5):
        assert ball_slice_volume(mz, gz, gz, n).total == len(
            perfect_diamond(mz, mz.origin, n)
        )


def test_slice_identity_rational_slope():
    m = ProductMetric(make_oracle(F2), make_oracle(Z1), Fraction(2))
    g1 = growth_series(F2, 8)
    g2 = growth_series(Z1, 16)
    for n in range(4):
        assert ball_slice_volume(m, g1, g2, n).total == len(
            perfect_diamond(m, m.origin, n)
        )


def test_slice_horizon_error(m_f2):
    short = growth_series(F2, 2)
    with pytest.raises(InputError):
        ball_slice_volume(m_f2, short, short, 4)


def test_monotone_nesting(m_f2):
    inner = {p for p, _ in perfect_diamond(m_f2, m_f2.origin, 2)}
    outer = {p for p, _ in perfect_diamond(m_f2, m_f2.origin, 3)}
    assert inner <= outer


def test_triangle_spot_check(m_f2):
    o1, o2 = m_f2.first, m_f2.second
    pts = [
        (a, b)
        for a, _ in ball(o1, 2)
        for b, _ in ball(o2, 1)
    ]
    check_triangle_inequality(m_f2, pts, samples=150)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_rho_symmetry_random_words(data):
    m = ProductMetric(make_oracle(F2), make_oracle(F2), Fraction(3, 2))
    o = m.first
    labels = [lab for lab, _ in o.gen_pairs()]
    w = st.lists(st.sampled_from(labels), max_size=6)
    x = (o.canon(data.draw(w)), o.canon(data.draw(w)))
    y = (o.canon(data.draw(w)), o.canon(data.draw(w)))
    assert m.rho(x, y) == m.rho(y, x)
    assert (m.rho(x, y) == 0) == (x == y)


def test_factor_ball_prefix_structure():
    fb = FactorBall(make_oracle(F2), 3)
    assert fb.volume(0) == 1
    assert fb.volume(2) == 17
    assert all(fb.dist[i] <= fb.dist[i + 1] for i in range(len(fb) - 1))
    # the first v_r entries are the radius-r ball
    assert {fb.elements[i] for i in range(17)} == {el for el, _ in ball(fb.oracle, 2)}


def test_product_space_window(m_f2):
    sp = ProductSpace(m_f2, 3)
    assert len(sp) == len(perfect_diamond(m_f2, m_f2.origin, 3))
    ids = sp.ids_within(2)
    assert len(ids) == 49
    pid = sp.lookup_elements(m_f2.first.canon(["a"]), m_f2.second.identity)
    assert pid is not None
    assert sp.element(pid) == (m_f2.first.canon(["a"]), m_f2.second.identity)
    assert sp.word_str(pid) == "a|e"


def test_product_space_requires_rational():
    m = ProductMetric(make_oracle(F2), make_oracle(F2), 1.37)
    with pytest.raises(InputError):
        ProductSpace(m, 2)


def test_distance_matrix():
    fb = FactorBall(make_oracle(F2), 2)
    D = fb.distance_matrix()
    o = fb.oracle
    for i in range(0, len(fb), 3):
        for j in range(0, len(fb), 5):
            assert D[i, j] == o.distance(fb.elements[i], fb.elements[j])
