import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.errors import InputError, ResourceCapError
from horolab.groups import (
    GroupSpec,
    ball,
    ball_to_csv,
    generator_bound,
    growth_series,
    make_oracle,
)

F2 = GroupSpec("free", rank=2)
Z1 = GroupSpec("integer_lattice", dim=1)
Z2 = GroupSpec("integer_lattice", dim=2)
C2C3 = GroupSpec(
    "free_product", factors=(GroupSpec("cyclic", order=2), GroupSpec("cyclic", order=3))
)
F2xZ = GroupSpec("direct_product", factors=(F2, Z1))

ALL_SPECS = [F2, Z1, Z2, C2C3, F2xZ, GroupSpec("cyclic", order=6)]


def test_canon_free_reduction():
    o = make_oracle(F2)
    assert o.canon(["a", "A"]) == o.identity
    assert o.canon(["a", "b", "B", "a"]) == o.canon(["a", "a"])


def test_canon_lattice_commutes():
    o = make_oracle(Z2)
    assert o.canon(["x", "y", "X"]) == o.canon(["y"])


def test_canon_unknown_symbol():
    o = make_oracle(F2)
    with pytest.raises(InputError):
        o.canon(["a", "q"])


def words(spec, max_len=8):
    labels = [lab for lab, _ in make_oracle(spec).gen_pairs()]
    return st.lists(st.sampled_from(labels), max_size=max_len)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL_SPECS), st.data())
def test_canon_inverse_gives_identity(spec, data):
    o = make_oracle(spec)
    w = data.draw(words(spec))
    el = o.canon(w)
    assert o.multiply(el, o.inverse(el)) == o.identity


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL_SPECS), st.data())
def test_multiplication_associative(spec, data):
    o = make_oracle(spec)
    a = o.canon(data.draw(words(spec)))
    b = o.canon(data.draw(words(spec)))
    c = o.canon(data.draw(words(spec)))
    assert o.multiply(o.multiply(a, b), c) == o.multiply(a, o.multiply(b, c))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL_SPECS), st.data())
def test_length_is_word_metric(spec, data):
    # length(el) equals the BFS distance from the identity
    o = make_oracle(spec)
    el = o.canon(data.draw(words(spec, max_len=5)))
    n = o.length(el)
    dist = dict(ball(o, n))
    assert dist[el] == n


def test_ball_free_group_counts():
    o = make_oracle(F2)
    assert len(ball(o, 0)) == 1
    assert len(ball(o, 1)) == 5
    assert len(ball(o, 3)) == 53


def test_ball_deterministic_order():
    o = make_oracle(F2)
    b1 = ball(o, 3)
    b2 = ball(o, 3)
    assert b1 == b2
    dists = [d for _, d in b1]
    assert dists == sorted(dists)


def test_ball_cap():
    o = make_oracle(F2)
    with pytest.raises(ResourceCapError):
        ball(o, 6, cap=100)


def test_growth_series_f2_closed_form():
    g = growth_series(F2, 6, method="bfs")
    assert g.volumes == [2 * 3**n - 1 for n in range(7)]
    assert g.spheres == [1, 4, 12, 36, 108, 324, 972]
    g.check_invariants()


def test_growth_series_lattice():
    g = growth_series(Z1, 3, method="bfs")
    assert g.volumes == [1, 3, 5, 7]


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_series_counts_match_bfs(spec):
    bfs = growth_series(spec, 6, method="bfs")
    srs = growth_series(spec, 6, method="series")
    assert bfs.volumes == srs.volumes


def test_eps_nonamen_positive_for_free():
    g = growth_series(F2, 8)
    assert g.eps_nonamen > 0
    assert float(g.eps_nonamen) == pytest.approx(8748 / 13121)


def test_eps_nonamen_decays_for_lattice():
    # positive at any finite horizon (2/(2n+1) at the last radius), but
    # decaying, unlike the free-group case which is bounded below
    g = growth_series(Z1, 8)
    assert g.eps_nonamen == Fraction(2, 17)
    g16 = growth_series(Z1, 16)
    assert g16.eps_nonamen < g.eps_nonamen


def test_generator_growth_bound():
    g = growth_series(F2, 8)
    M = generator_bound(make_oracle(F2))
    assert M == 5
    for n in range(8):
        assert g.volumes[n + 1] <= M * g.volumes[n]


def test_element_order_total_and_deterministic():
    o = make_oracle(F2)
    els = [el for el, _ in ball(o, 3)]
    keys = [o.sort_key(el) for el in els]
    assert len(set(keys)) == len(keys)
    assert sorted(els, key=o.sort_key) == sorted(reversed(els), key=o.sort_key)


def test_spec_json_roundtrip():
    spec = GroupSpec.from_json(json.dumps(C2C3.to_dict()))
    assert spec == C2C3
    with pytest.raises(InputError):
        GroupSpec.from_dict({"rank": 2})
    with pytest.raises(InputError):
        GroupSpec.from_dict({"kind": "nonsense"})


def test_ball_csv_dump(tmp_path):
    path = tmp_path / "ball.csv"
    ball_to_csv(make_oracle(F2), 1, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "canonical_word,distance"
    assert len(lines) == 6
    assert lines[1] == "e,0"


def test_exact_rates():
    assert make_oracle(F2).exact_growth_rate() == 3
    assert make_oracle(GroupSpec("free", rank=3)).exact_growth_rate() == 5
    assert make_oracle(Z2).exact_growth_rate() == 1
    assert make_oracle(C2C3).exact_growth_rate() is None
