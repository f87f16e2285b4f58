import pytest

from planar_morse.bifurcation import morse_change_points, scan_crossings
from planar_morse.errors import InputError

from conftest import cached_shooting


def test_single_zone_has_no_crossings():
    res = scan_crossings(1, 0.0, 1, (1.05, 200.0), [1])
    assert len(res) == 0
    assert res.failures == []


def test_two_zone_first_branch_small_range():
    res = scan_crossings(2, 0.0, 1, (1.05, 10.0), [3, 4])
    assert [c.k for c in res] == [3, 4]
    for c in res:
        assert c.p_lo < c.p_star < c.p_hi
        assert c.residual <= 1e-6 * c.k**2
        assert c.direction == "down"
    assert [c.p_star for c in res] == sorted(c.p_star for c in res)


def test_refinement_keeps_crossings():
    coarse = scan_crossings(2, 0.0, 1, (1.05, 10.0), [3, 4])
    # shifting the sample grid must find the same roots
    shifted = scan_crossings(2, 0.0, 1, (1.1, 9.0), [3, 4])
    assert [c.k for c in shifted] == [3, 4]
    for a, b in zip(coarse, shifted):
        assert a.p_star == pytest.approx(b.p_star, rel=1e-8)


def test_crossing_is_a_degenerate_point():
    res = scan_crossings(2, 0.0, 1, (1.05, 3.0), [3])
    (c,) = res.crossings
    assert cached_shooting(c.p_lo, 2).eigenvalues[0] > -9 > cached_shooting(c.p_hi, 2).eigenvalues[0]


def test_henon_branch_uses_scaled_levels():
    res = scan_crossings(2, 1.0, 1, (1.05, 4.0), [4, 5])
    for c in res:
        assert c.residual <= 1e-6 * c.k**2
    assert [c.k for c in res] == [4, 5]


def test_transitions_two_zones():
    t = morse_change_points(2, 0.0, (1.05, 200.0))
    assert t.index_start == 6 and t.index_end == 12
    assert [c.k for c in t.crossings] == [3, 4, 5]
    assert all(c.j == 1 for c in t.crossings)
    assert t.endpoint_check["consistent"]
    assert [b - a for _, a, b in t.transitions] == [2, 2, 2]


def test_transitions_single_zone():
    t = morse_change_points(1, 0.0, (1.05, 200.0))
    assert t.transitions == [] and t.index_start == t.index_end == 1


@pytest.mark.parametrize("args", [(0, 0.0, 1, (1.05, 2.0), [1]), (2, 0.0, 3, (1.05, 2.0), [1]),
                                  (2, 0.0, 1, (0.9, 2.0), [1]), (2, 0.0, 1, (1.05, 300.0), [1]),
                                  (2, 0.0, 1, (1.05, 2.0), []), (2, 0.0, 1, (1.05, 2.0), [0]),
                                  (2, -1.0, 1, (1.05, 2.0), [1])])
def test_scan_input_errors(args):
    with pytest.raises(InputError):
        scan_crossings(*args)
