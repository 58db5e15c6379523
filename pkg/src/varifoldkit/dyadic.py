"""Exact enumeration and counting of the dyadic cube families and slab cells.

Level ``i`` cubes in ``R^n`` have centers on the lattice ``2**(-i-1) * Z^n`` and
half-width ``2**(-i-2)``, so their closures tile ``R^n``.  A level ``j`` slab
cell is the open box ``]2**(-j-1), 2**(-j)[ x W`` with ``W`` a level ``j`` cube.
The first coordinate of ``R^(n+1)`` is the height above the plane
``T = {0} x R^n``.

All counting is done with :class:`~fractions.Fraction` and Python integers, so
boundary cases ("touching" cells) are decided exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from ._validation import check_dyadic, check_int
from .exceptions import CapacityError, ConfigurationError

__all__ = [
    "MAX_LEVEL",
    "DyadicCube",
    "SlabCell",
    "Window",
    "CellGeometry",
    "enumerate_cells",
    "count_window_cells",
    "count_cells",
    "cell_geometry",
    "count_lattice_in_ball",
]

#: Deepest supported level; indices stay well inside the signed 63-bit range.
MAX_LEVEL = 60
_INDEX_LIMIT = 2 ** 62
#: Default cap on the number of cells materialised by :func:`enumerate_cells`.
MAX_ENUMERATED_CELLS = 10_000_000


def _check_level(level, name="level"):
    level = check_int(level, name, minimum=0)
    if level > MAX_LEVEL:
        raise CapacityError(f"{name}={level} exceeds the supported maximum {MAX_LEVEL}")
    return level


def _pow2(e: int) -> Fraction:
    return Fraction(2) ** e


@dataclass(frozen=True)
class DyadicCube:
    """Closed cube of the level-``level`` family with integer index vector."""

    level: int
    index: tuple

    def __post_init__(self):
        _check_level(self.level)
        idx = tuple(int(k) for k in self.index)
        if not idx:
            raise ConfigurationError("cube index must have length >= 1")
        if any(abs(k) >= _INDEX_LIMIT for k in idx):
            raise CapacityError("cube index exceeds the 2**62 capacity")
        object.__setattr__(self, "index", idx)

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def spacing(self) -> Fraction:
        return _pow2(-self.level - 1)

    @property
    def half_width(self) -> Fraction:
        return _pow2(-self.level - 2)

    @property
    def center(self) -> tuple:
        s = self.spacing
        return tuple(k * s for k in self.index)


@dataclass(frozen=True)
class SlabCell:
    """Open cell ``]2**(-j-1), 2**(-j)[ x cube`` of the family at level ``j``."""

    level: int
    cube: DyadicCube

    def __post_init__(self):
        _check_level(self.level)
        if self.cube.level != self.level:
            raise ConfigurationError("slab level and cube level differ")

    @property
    def slab(self) -> tuple:
        return (_pow2(-self.level - 1), _pow2(-self.level))

    @property
    def dim(self) -> int:
        """Ambient dimension ``n + 1``."""
        return self.cube.dim + 1


@dataclass(frozen=True)
class Window:
    """Closed cube in ``R^(n+1)`` centred on the plane ``T``.

    ``center`` has first coordinate 0; all coordinates and the half-width must
    be dyadic rationals so that cell/window relations are decided exactly.
    """

    center: tuple
    half_width: Fraction

    def __post_init__(self):
        center = tuple(check_dyadic(c, "window center coordinate") for c in self.center)
        if len(center) < 2:
            raise ConfigurationError("window center needs at least 2 coordinates")
        if center[0] != 0:
            raise ConfigurationError("window center must lie on T (first coordinate 0)")
        hw = check_dyadic(self.half_width, "window half_width")
        if hw <= 0:
            raise ConfigurationError("window half_width must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", hw)

    @classmethod
    def centered(cls, n: int, half_width=1) -> "Window":
        return cls((0,) * (n + 1), half_width)

    @property
    def n(self) -> int:
        return len(self.center) - 1

    def as_floats(self):
        return np.array([float(c) for c in self.center]), float(self.half_width)


@dataclass(frozen=True)
class CellGeometry:
    center: tuple
    half_width: Fraction
    slab: tuple


def _axis_range(lo: Fraction, hi: Fraction, strict: bool):
    """Integer range ``[kmin, kmax]`` of ``lo <= k <= hi`` (``<`` if strict)."""
    if strict:
        kmin = math.floor(lo) + 1
        kmax = math.ceil(hi) - 1
    else:
        kmin = math.ceil(lo)
        kmax = math.floor(hi)
    return kmin, kmax


def _cross_section_ranges(center_z, radius, level, mode, strict):
    """Per-axis index ranges of level cubes meeting / inside a closed cube."""
    h = _pow2(-level - 2)
    step = 2 * h
    ranges = []
    for x in center_z:
        if mode == "intersecting":
            lo, hi = (x - radius - h) / step, (x + radius + h) / step
            ranges.append(_axis_range(lo, hi, strict))
        else:
            lo, hi = (x - radius + h) / step, (x + radius - h) / step
            ranges.append(_axis_range(lo, hi, False))
    for kmin, kmax in ranges:
        if max(abs(kmin), abs(kmax)) >= _INDEX_LIMIT:
            raise CapacityError("index range exceeds the 2**62 capacity")
    return ranges


def _range_size(ranges) -> int:
    total = 1
    for kmin, kmax in ranges:
        total *= max(kmax - kmin + 1, 0)
    return total


def enumerate_cells(window: Window, level: int, limit: int = MAX_ENUMERATED_CELLS):
    """Level-``level`` cells whose closure meets the closed window cube.

    Cells come back in lexicographic order of their cube index.  Closed cells
    are tested against the closed window, so touching cells are included.

    Raises
    ------
    CapacityError
        If more than ``limit`` cells would be produced.
    """
    j = _check_level(level)
    lo_slab, _ = _pow2(-j - 1), _pow2(-j)
    w = window.half_width
    if lo_slab > w:
        return []
    ranges = _cross_section_ranges(window.center[1:], w, j, "intersecting", strict=False)
    size = _range_size(ranges)
    if size > limit:
        raise CapacityError(f"{size} cells at level {j} exceed the enumeration limit {limit}")
    axes = [range(kmin, kmax + 1) for kmin, kmax in ranges]
    return [SlabCell(j, DyadicCube(j, idx)) for idx in product(*axes)]


def count_window_cells(window: Window, level: int) -> int:
    """Number of cells :func:`enumerate_cells` would return, without listing them."""
    j = _check_level(level)
    if _pow2(-j - 1) > window.half_width:
        return 0
    return _range_size(_cross_section_ranges(window.center[1:], window.half_width, j,
                                             "intersecting", strict=False))


def count_cells(i: int, j: int, x: Sequence, mode: str = "intersecting", n: int | None = None) -> int:
    """Exact ``b_{i,j}`` (``mode="intersecting"``) or ``c_{i,j}`` (``"contained"``).

    Counts the open level-``j`` cells meeting, resp. contained in, the closed
    cube of half-width ``2**-i`` about ``x``.  ``x`` holds the coordinates of
    the point within ``T``; if ``n`` is given, a length ``n + 1`` point with
    first coordinate 0 is accepted as well.  Coordinates must be dyadic.
    """
    i = _check_level(i, "i")
    j = _check_level(j, "j")
    if mode not in ("intersecting", "contained"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    coords = tuple(check_dyadic(c, "x coordinate") for c in x)
    if n is not None and len(coords) == n + 1:
        if coords[0] != 0:
            raise ConfigurationError("x must lie on T (first coordinate 0)")
        coords = coords[1:]
    if len(coords) < 1:
        raise ConfigurationError("x must have at least one coordinate")
    radius = _pow2(-i)
    slab_lo, slab_hi = _pow2(-j - 1), _pow2(-j)
    if mode == "intersecting":
        # open slab against the closed interval [-R, R]
        if not slab_lo < radius:
            return 0
        ranges = _cross_section_ranges(coords, radius, j, mode, strict=True)
    else:
        if not slab_hi <= radius:
            return 0
        ranges = _cross_section_ranges(coords, radius, j, mode, strict=False)
    return _range_size(ranges)


def cell_geometry(cell: SlabCell) -> CellGeometry:
    """Center, cross-section half-width and slab interval of a cell."""
    j = cell.level
    lo, hi = cell.slab
    center = ((lo + hi) / 2,) + cell.cube.center
    return CellGeometry(center=center, half_width=cell.cube.half_width, slab=(lo, hi))


def count_lattice_in_ball(center, spacing: float, radius: float, strict: bool = False,
                          max_rows: int = 50_000_000) -> int:
    """Number of ``k in Z^n`` with ``|k * spacing - center| <= radius``.

    With ``strict=True`` the inequality is strict.  Float arithmetic; intended
    for bracketing bounds where exact ties have measure zero.  The work is
    ``O((radius / spacing) ** (n - 1))``.
    """
    c = np.asarray(center, dtype=float).reshape(-1)
    if radius < 0 or (strict and radius == 0):
        return 0
    t2 = float(radius) ** 2
    budgets = np.array([t2])
    for ca in c[:-1]:
        lo = math.ceil((ca - radius) / spacing)
        hi = math.floor((ca + radius) / spacing)
        if hi < lo:
            return 0
        ks = np.arange(lo, hi + 1, dtype=float)
        d2 = (ks * spacing - ca) ** 2
        if budgets.size * ks.size > max_rows:
            raise CapacityError("lattice ball count exceeds the row capacity")
        nb = (budgets[:, None] - d2[None, :]).ravel()
        budgets = nb[nb > 0] if strict else nb[nb >= 0]
        if budgets.size == 0:
            return 0
    cl = c[-1]
    u = np.sqrt(budgets)
    if strict:
        hi = np.ceil((cl + u) / spacing) - 1
        lo = np.floor((cl - u) / spacing) + 1
    else:
        hi = np.floor((cl + u) / spacing)
        lo = np.ceil((cl - u) / spacing)
    return int(np.maximum(hi - lo + 1, 0).sum())
