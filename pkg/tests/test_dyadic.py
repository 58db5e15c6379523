"""Dyadic lattice: closed forms, brute-force oracle, capacity errors."""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varifoldkit import (
    CapacityError,
    ConfigurationError,
    DyadicCube,
    SlabCell,
    Window,
    cell_geometry,
    count_cells,
    count_lattice_in_ball,
    count_window_cells,
    enumerate_cells,
)


def _brute_count(i, j, x, mode):
    """Direct per-axis interval test on every candidate index (exact)."""
    R = Fraction(1, 2 ** i)
    s, h = Fraction(1, 2 ** (j + 1)), Fraction(1, 2 ** (j + 2))
    slab = (Fraction(1, 2 ** (j + 1)), Fraction(1, 2 ** j))

    def meets(a, b, c, d):
        return a < d and b > c

    def inside(a, b, c, d):
        return a >= c and b <= d

    test = meets if mode == "intersecting" else inside
    if not test(*slab, -R, R):
        return 0
    per_axis = []
    for xc in x:
        kmin = int((xc - R - h) / s) - 2
        kmax = int((xc + R + h) / s) + 2
        per_axis.append(sum(1 for k in range(kmin, kmax + 1)
                            if test(k * s - h, k * s + h, xc - R, xc + R)))
    return int(np.prod(per_axis))


def test_window_counts_closed_form():
    w = Window.centered(2, 1)
    assert len(enumerate_cells(w, 0)) == 25 == (2 ** 2 + 1) ** 2
    assert len(enumerate_cells(w, 1)) == 81 == (2 ** 3 + 1) ** 2
    assert count_window_cells(w, 3) == (2 ** 5 + 1) ** 2


def test_enumeration_order_and_match_with_count():
    w = Window((0, Fraction(1, 4), -1), Fraction(1, 2))
    for j in range(5):
        cells = enumerate_cells(w, j)
        assert len(cells) == count_window_cells(w, j)
        idx = [c.cube.index for c in cells]
        assert idx == sorted(idx)


def test_slab_outside_window_is_empty():
    w = Window.centered(2, Fraction(1, 8))
    # level-1 slab ]1/4, 1/2[ lies above the window
    assert enumerate_cells(w, 1) == []
    assert count_window_cells(w, 1) == 0


def test_b_c_closed_forms():
    assert count_cells(0, 1, (0, 0), "intersecting") == 81
    assert count_cells(0, 1, (0, 0), "contained") == 49
    for i in range(0, 3):
        for j in range(i, i + 4):
            m = 2 ** (j - i + 2)
            assert count_cells(i, j, (0, 0), "intersecting") == (m + 1) ** 2
            assert count_cells(i, j, (0, 0), "contained") == (m - 1) ** 2


def test_sandwich_bounds():
    n = 2
    for i in range(3):
        for j in range(i, i + 4):
            b = count_cells(i, j, (0,) * n, "intersecting")
            c = count_cells(i, j, (0,) * n, "contained")
            assert (3 * 2 ** (j - i)) ** n <= c <= b <= (5 * 2 ** (j - i)) ** n


@given(j=st.integers(0, 6), d=st.integers(1, 6), mode=st.sampled_from(["intersecting", "contained"]))
def test_coarser_levels_are_empty(j, d, mode):
    assert count_cells(j + d, j, (0, 0), mode) == 0


dyadic_coord = st.builds(lambda k, e: Fraction(k, 2 ** e), st.integers(-40, 40), st.integers(0, 5))


@settings(max_examples=150, deadline=None)
@given(i=st.integers(0, 3), dj=st.integers(0, 3), x=st.tuples(dyadic_coord, dyadic_coord),
       mode=st.sampled_from(["intersecting", "contained"]))
def test_count_matches_brute_force(i, dj, x, mode):
    j = i + dj
    assert count_cells(i, j, x, mode) == _brute_count(i, j, x, mode)


@settings(max_examples=60, deadline=None)
@given(i=st.integers(0, 3), dj=st.integers(0, 3), shift=st.tuples(st.integers(-20, 20), st.integers(-20, 20)))
def test_translation_by_lattice_vector(i, dj, shift):
    """Shifting x by a multiple of the level-j spacing leaves the counts unchanged."""
    j = i + dj
    s = Fraction(1, 2 ** (j + 1))
    x = (Fraction(3, 16), Fraction(-5, 32))
    y = tuple(c + k * s for c, k in zip(x, shift))
    for mode in ("intersecting", "contained"):
        assert count_cells(i, j, x, mode) == count_cells(i, j, y, mode)


def test_point_on_T_form_accepted():
    assert count_cells(0, 1, (0, 0, 0), n=2) == 81
    with pytest.raises(ConfigurationError):
        count_cells(0, 1, (Fraction(1, 2), 0, 0), n=2)


def test_cell_geometry():
    cell = SlabCell(3, DyadicCube(3, (1, -2)))
    g = cell_geometry(cell)
    assert g.center[0] == Fraction(3, 2 ** 5)
    assert g.half_width == Fraction(1, 2 ** 5)
    assert g.slab == (Fraction(1, 16), Fraction(1, 8))
    assert g.center[1:] == (Fraction(1, 16), Fraction(-2, 16))


def test_window_validation():
    with pytest.raises(ConfigurationError):
        Window((Fraction(1, 2), 0, 0), 1)
    with pytest.raises(ConfigurationError):
        Window((0, 0, 0), 0)
    with pytest.raises(ConfigurationError):
        Window((0, 0, 0), 0.1)  # not dyadic


def test_capacity_errors():
    with pytest.raises(CapacityError):
        DyadicCube(100, (0, 0))
    with pytest.raises(CapacityError):
        enumerate_cells(Window.centered(2, 1), 20)


@settings(max_examples=40, deadline=None)
@given(cx=st.floats(-1, 1), cy=st.floats(-1, 1), r=st.floats(0.01, 0.6))
def test_lattice_ball_count_matches_brute(cx, cy, r):
    sp = 0.125
    ks = np.arange(-20, 21)
    K = np.stack(np.meshgrid(ks, ks, indexing="ij"), -1).reshape(-1, 2) * sp
    d = np.linalg.norm(K - [cx, cy], axis=1)
    # float semantics: exact ties may go either way
    lo, hi = int((d <= r * (1 - 1e-9)).sum()), int((d <= r * (1 + 1e-9)).sum())
    assert lo <= count_lattice_in_ball([cx, cy], sp, r) <= hi
    assert lo <= count_lattice_in_ball([cx, cy], sp, r, strict=True) <= hi
