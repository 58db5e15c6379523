"""The multiscale example: a plane plus dyadically placed bump surfaces.

Level ``j`` places one bump in every slab cell ``]2^(-j-1), 2^(-j)[ x W`` of the
window.  The bump is the unit revolved surface with neck ``tau_j`` dilated by
``2 rho_j`` and centred in its cell, so everything about a level reduces to
counts of cells times unit-surface integrals.

Scales are kept as exact base-2 exponents: ``log2 rho_j = -j a - 2`` and
``log2 sigma_j = -j b a - 2`` with ``a, b`` rational.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_fraction, check_int, check_point, check_positive
from .dyadic import (
    MAX_LEVEL,
    Window,
    count_lattice_in_ball,
    count_window_cells,
    enumerate_cells,
)
from .exceptions import (
    CapacityError,
    ConfigurationError,
    ExponentThresholdError,
    MarginError,
    ParameterOrderingError,
    WeightExponentError,
)
from .profile import (
    COMPONENTS,
    DEFAULT_ORDER,
    ProfileGeometry,
    component_regions,
    height_moment,
    sample_surface,
    unit_ball_volume,
    unit_integrals,
)
from .varifold import DiscreteVarifold

__all__ = [
    "ExampleConfig",
    "DerivedScales",
    "LevelAggregate",
    "ExampleVarifold",
    "MultiscaleExample",
    "derive_parameters",
    "build_example",
    "weight_value",
    "tail_bound",
    "ball_bracket",
    "sample_cloud",
    "build_manifest",
]

#: Default number of levels kept beyond the deepest report level.
DEFAULT_EXTRA_LEVELS = 10


def _pow2(e) -> float:
    return math.ldexp(1.0, int(e)) if Fraction(e).denominator == 1 else 2.0 ** float(e)


@dataclass(frozen=True)
class ExampleConfig:
    """Parameters of the example.

    ``window_half_width`` is the half-width of the closed cube about the origin
    inside which levels are placed; ``s`` and ``r`` are only needed for the
    weighted quantities.  Numbers may be given as ints, floats, strings such as
    ``"9/4"``, or :class:`~fractions.Fraction`.
    """

    n: int = 2
    p: object = 1
    alpha1: object = 1
    alpha2: object = 1
    q1: object = 3
    q2: object = 3
    max_level: int = 18
    window_half_width: object = 1
    s: object = None
    r: object = None

    @property
    def window(self) -> Window:
        return Window.centered(self.n, self.window_half_width)

    @property
    def kappa(self) -> Fraction:
        return as_fraction(self.alpha2, "alpha2") * as_fraction(self.q2, "q2")

    @property
    def lam(self) -> Fraction:
        return as_fraction(self.alpha1, "alpha1") * as_fraction(self.q1, "q1")

    def to_dict(self) -> dict:
        def enc(v):
            if v is None or isinstance(v, int):
                return v
            f = as_fraction(v)
            return int(f) if f.denominator == 1 else float(f) if float(f) == f else str(f)
        return {k: enc(getattr(self, k)) for k in
                ("n", "p", "alpha1", "alpha2", "q1", "q2", "max_level",
                 "window_half_width", "s", "r")}

    @classmethod
    def from_dict(cls, data: dict) -> "ExampleConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown example fields: {sorted(extra)}")
        return cls(**data)


@dataclass(frozen=True)
class DerivedScales:
    """``a``, ``b`` and the per-level scale exponents."""

    n: int
    a: Fraction
    b: Fraction
    kappa: Fraction
    lam: Fraction

    def log2_rho(self, j: int) -> Fraction:
        return -j * self.a - 2

    def log2_sigma(self, j: int) -> Fraction:
        return -j * self.b * self.a - 2

    def log2_tau(self, j: int) -> Fraction:
        return self.log2_sigma(j) - self.log2_rho(j)

    def rho(self, j: int) -> float:
        return _pow2(self.log2_rho(j))

    def sigma(self, j: int) -> float:
        return _pow2(self.log2_sigma(j))

    def tau(self, j: int) -> float:
        return _pow2(self.log2_tau(j))

    def is_dyadic(self, j: int) -> bool:
        """Whether ``rho_j`` and ``sigma_j`` are dyadic rationals."""
        return self.log2_rho(j).denominator == 1 and self.log2_sigma(j).denominator == 1

    @property
    def mass_ratio(self) -> float:
        """Per-level ratio ``2^(n(1-a))`` of the mass aggregates."""
        return _pow2(self.n * (1 - self.a))

    def as_dict(self) -> dict:
        return {"a": str(self.a), "b": str(self.b), "a_float": float(self.a),
                "b_float": float(self.b), "kappa": str(self.kappa), "lambda": str(self.lam)}


def derive_parameters(config: ExampleConfig) -> DerivedScales:
    """Validate ``config`` exactly and derive ``a`` and ``b``.

    Raises
    ------
    ParameterOrderingError
        If ``alpha2 q2 > alpha1 q1``.
    ExponentThresholdError
        If ``1/p > 1 + (alpha2 q2 / alpha1 q1)(1/n + 1/(alpha2 q2) - 1)`` fails.
    WeightExponentError
        If weights are requested with ``r <= 1`` or ``s <= n + (1 - 1/r) alpha2 q2``.
    """
    n = check_int(config.n, "n", minimum=2)
    p = as_fraction(config.p, "p")
    if not 1 <= p < n:
        raise ConfigurationError(f"p must satisfy 1 <= p < n, got p={p}, n={n}")
    for name in ("alpha1", "alpha2"):
        v = as_fraction(getattr(config, name), name)
        if not 0 < v <= 1:
            raise ConfigurationError(f"{name} must lie in (0, 1], got {v}")
    for name in ("q1", "q2"):
        if as_fraction(getattr(config, name), name) < 1:
            raise ConfigurationError(f"{name} must be >= 1")
    J = check_int(config.max_level, "max_level", minimum=0)
    if J > MAX_LEVEL:
        raise CapacityError(f"max_level={J} exceeds the supported maximum {MAX_LEVEL}")
    config.window  # validates the half-width
    kappa, lam = config.kappa, config.lam
    if kappa > lam:
        raise ParameterOrderingError(
            f"alpha2*q2 = {kappa} exceeds alpha1*q1 = {lam}; need alpha2*q2 <= alpha1*q1")
    if not 1 / p > 1 + (kappa / lam) * (Fraction(1, n) + 1 / kappa - 1):
        raise ExponentThresholdError(
            "need 1/p > 1 + (alpha2*q2/(alpha1*q1)) * (1/n + 1/(alpha2*q2) - 1)"
            f" (with equal products: alpha2*q2 > np/(n-p) = {n * p / (n - p)}), got alpha2*q2 = {kappa}")
    if config.s is not None or config.r is not None:
        if config.s is None or config.r is None:
            raise WeightExponentError("weights need both s and r")
        s, r = as_fraction(config.s, "s"), as_fraction(config.r, "r")
        if not r > 1:
            raise WeightExponentError(f"need r > 1, got r={r}")
        if not s > n + (1 - 1 / r) * kappa:
            raise WeightExponentError(
                f"need s > n + (1 - 1/r)*alpha2*q2 = {n + (1 - 1 / r) * kappa}, got s={s}")
    a = kappa / n + 1
    b = (lam - kappa) / a + 1
    return DerivedScales(n=n, a=a, b=b, kappa=kappa, lam=lam)


@dataclass(frozen=True)
class LevelAggregate:
    """Everything about one level that does not depend on the quantity."""

    level: int
    log2_rho: Fraction
    rho: float
    tau: float
    scale: float
    y_center: float
    cells: int
    unit_mass: float
    cell_mass: float

    @property
    def level_mass(self) -> float:
        return self.cells * self.cell_mass


@dataclass(frozen=True)
class ExampleVarifold:
    """The assembled (truncated) example; aggregates only, no samples."""

    config: ExampleConfig
    scales: DerivedScales
    window: Window
    levels: tuple
    order: int = DEFAULT_ORDER

    @property
    def n(self) -> int:
        return self.scales.n

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    @property
    def plane_mass(self) -> float:
        """``H^n(T)`` inside the window."""
        return float(2 * self.window.half_width) ** self.n

    def geometry(self, j: int) -> ProfileGeometry:
        return ProfileGeometry(self.levels[j].tau, self.n)

    def unit(self, j: int, p: float = 1.0, q: float = 1.0, norm: str = "frobenius",
             threshold: float = 1.0):
        return unit_integrals(self.geometry(j), p=p, q=q, norm=norm, threshold=threshold,
                              order=self.order)

    def surface_center(self, j: int, index) -> np.ndarray:
        """Centre of the bump in the level-``j`` cell with cube index ``index``."""
        idx = np.asarray(index, dtype=float).reshape(-1)
        if idx.size != self.n:
            raise ConfigurationError(f"index must have {self.n} entries")
        return np.concatenate([[self.levels[j].y_center], idx * _pow2(-j - 1)])

    def plateau_center(self, j: int, index, top: bool = True) -> np.ndarray:
        """Centre point of the upper (or lower) plateau of a level-``j`` bump."""
        c = self.surface_center(j, index)
        lev = self.levels[j]
        c[0] += (1 if top else -1) * lev.scale * lev.tau / 2
        return c

    def component_values(self, j: int, kind: str, **kw) -> dict:
        """Per-cell contribution of each surface component at level ``j``.

        ``kind`` is one of ``mass``, ``curvature`` (``p``), ``tilt``
        (``q``, ``norm``), ``height`` (``q``; summed over the whole bump).
        """
        lev = self.levels[j]
        k, n = lev.scale, self.n
        if kind == "mass":
            u = self.unit(j)
            return {c: k ** n * u.components[c].mass for c in COMPONENTS}
        if kind == "curvature":
            p = kw.get("p", 1.0)
            u = self.unit(j, p=p)
            return {c: k ** (n - p) * u.components[c].curvature_moment for c in COMPONENTS}
        if kind == "tilt":
            u = self.unit(j, q=kw.get("q", 1.0), norm=kw.get("norm", "frobenius"))
            return {c: k ** n * u.components[c].tilt_moment for c in COMPONENTS}
        if kind == "height":
            v = k ** n * height_moment(self.geometry(j), kw.get("q", 1.0), lev.y_center, k,
                                       order=self.order)
            return {"total": v}
        raise ConfigurationError(f"unknown component quantity {kind!r}")


def build_example(config: ExampleConfig, order: int = DEFAULT_ORDER) -> ExampleVarifold:
    """Assemble the per-level aggregates for levels ``0..max_level``.

    Raises
    ------
    CapacityError
        If ``max_level`` is beyond :data:`~varifoldkit.dyadic.MAX_LEVEL`.
    QuadratureError
        If a unit-surface integral fails its refinement check.
    """
    scales = derive_parameters(config)
    window = config.window
    n = scales.n
    levels = []
    for j in range(config.max_level + 1):
        # containment: rho_j <= 2^(-j-2), exact on the exponents
        if not scales.log2_rho(j) <= -j - 2:
            raise ConfigurationError(f"level {j} surface does not fit its cell")
        rho, tau = scales.rho(j), scales.tau(j)
        A = unit_integrals(ProfileGeometry(tau, n), order=order).mass
        scale = 2 * rho
        levels.append(LevelAggregate(
            level=j, log2_rho=scales.log2_rho(j), rho=rho, tau=tau, scale=scale,
            y_center=3 * _pow2(-j - 2), cells=count_window_cells(window, j), unit_mass=A,
            cell_mass=scale ** n * A))
    return ExampleVarifold(config, scales, window, tuple(levels), order)


def weight_value(scales: DerivedScales, j, s, r=1) -> float:
    """Weight ``2^((n a - s) j)`` on level ``j`` (raised to the power ``r``).

    ``j=None`` means a point of ``T``, where the weight is 0.
    """
    if j is None:
        return 0.0
    j = check_int(j, "j", minimum=0)
    e = (scales.n * scales.a - as_fraction(s, "s")) * j * as_fraction(r, "r")
    return _pow2(e)


def tail_bound(scales: DerivedScales, i: int, J: int, order: int = DEFAULT_ORDER) -> float:
    """Relative mass of levels ``> J`` in ``cube(x, 2^-i) \\ T`` (``x`` on ``T``).

    Bound ``(5/3)^n (A(tau_{J+1}) / A(tau_i)) r^(J+1-i) / (1 - r)`` with
    ``r = 2^(n(1-a))``; it uses that ``A`` is nondecreasing in ``tau``.
    """
    i = check_int(i, "i", minimum=0)
    J = check_int(J, "J", minimum=0)
    if J < i:
        raise ConfigurationError(f"need J >= i, got J={J}, i={i}")
    n, r = scales.n, scales.mass_ratio
    A_i = unit_integrals(ProfileGeometry(scales.tau(i), n), order=order).mass
    A_t = unit_integrals(ProfileGeometry(scales.tau(J + 1), n), order=order).mass
    return (5 / 3) ** n * (A_t / A_i) * r ** (J + 1 - i) / (1 - r)


# ------------------------------------------------------------------ balls

# Float lattice counts are widened or narrowed by a relative 1e-12 so that
# rounding at exact ties can only loosen a bracket, never invert it.
_SHRINK, _GROW = 1.0 - 1e-12, 1.0 + 1e-12

@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float
    capped_levels: tuple = ()


def _check_inside_window(ex: ExampleVarifold, x, R):
    c, w = ex.window.as_floats()
    if np.any(np.abs(x - c) + R > w):
        raise MarginError(f"ball of radius {R} about {x.tolist()} leaves the window")


def ball_bracket(ex: ExampleVarifold, x, radius: float, component_values,
                 include_plane: bool = False, plane_value: float = 1.0,
                 max_rows: int = 2_000_000, max_partial: int = 4096) -> Bracket:
    """Two-sided bracket of a level-additive quantity over the closed ball ``B(x, radius)``.

    ``component_values(j)`` returns the per-cell value of each surface
    component (key ``"total"`` stands for the whole bump).  A component counts towards the lower bracket when its
    enclosing region (a height interval times an annulus about the cell axis)
    lies in the ball, and towards the upper one when the region meets it.
    Levels whose lattice count would exceed ``max_rows`` rows are bounded by
    the number of cells whose centres lie near the ball (upper bracket only).
    Plateaus cut by the ball add the area of the largest disk inside the cut
    to the lower bracket, provided at most ``max_partial`` cells are involved.
    With ``include_plane`` the plane ``T`` adds ``plane_value`` times its
    ``H^n`` measure in the ball.
    """
    x = check_point(x, ex.n + 1, "x")
    R = check_positive(radius, "radius")
    _check_inside_window(ex, x, R)
    n = ex.n
    xy, xz = x[0], x[1:]
    lo = hi = 0.0
    capped = []
    R2 = R * R
    for lev in ex.levels:
        j = lev.level
        spacing = _pow2(-j - 1)
        slab_lo, slab_hi = spacing, 2 * spacing
        gap = max(slab_lo - xy, xy - slab_hi, 0.0)
        if gap > R:
            continue
        vals = component_values(j)
        if (2 * (R + spacing) / spacing + 1) ** (n - 1) > max_rows:
            capped.append(j)
            hi += sum(vals.values()) * math.floor(2 * R / spacing + 2) ** n
            continue
        geom = ex.geometry(j)
        k = lev.scale
        regions = component_regions(geom)
        regions["total"] = (-geom.tau / 2, geom.tau / 2, 0.0, 0.5)
        for comp, (y0, y1, r0, r1) in regions.items():
            v = vals.get(comp, 0.0)
            if v == 0:
                continue
            Y0, Y1 = lev.y_center + k * y0, lev.y_center + k * y1
            R0, R1 = k * r0, k * r1
            dmax2 = max((Y0 - xy) ** 2, (Y1 - xy) ** 2)
            dmin2 = 0.0 if Y0 <= xy <= Y1 else min((Y0 - xy) ** 2, (Y1 - xy) ** 2)
            if R2 >= dmax2:
                t = math.sqrt(R2 - dmax2) - R1
                if t >= 0:
                    lo += v * count_lattice_in_ball(xz, spacing, t * _SHRINK)
                if comp.endswith("plateau") and R1 > 0:
                    lo += v * _partial_plateaus(xz, spacing, math.sqrt(R2 - dmax2), R1, n,
                                                max_partial)
            if R2 >= dmin2:
                u = math.sqrt(R2 - dmin2)
                cnt = count_lattice_in_ball(xz, spacing, (R1 + u) * _GROW)
                if R0 - u > 0:
                    cnt -= count_lattice_in_ball(xz, spacing, (R0 - u) * _SHRINK, strict=True)
                hi += v * cnt
    if include_plane and abs(xy) <= R:
        plane = plane_value * unit_ball_volume(n) * (R2 - xy * xy) ** (n / 2)
        lo += plane
        hi += plane
    return Bracket(lo, hi, tuple(capped))


def _partial_plateaus(xz, spacing, t, Rp, n, limit):
    """Area fraction of plateau disks (radius ``Rp``) cut by a slice disk of radius ``t``.

    Counts only cells that are cut but not wholly inside; each contributes the
    largest disk inscribed in the intersection, divided by the plateau area.
    """
    reach = t + Rp
    lo_idx = np.ceil((xz - reach) / spacing).astype(int)
    hi_idx = np.floor((xz + reach) / spacing).astype(int)
    sizes = hi_idx - lo_idx + 1
    if np.any(sizes <= 0) or int(np.prod(sizes)) > limit:
        return 0.0
    axes = [np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n) * spacing
    d = np.linalg.norm(grid - xz, axis=1)
    cut = (d < reach) & (d + Rp > t)
    d = d[cut]
    inner = np.where(d + t <= Rp, t, (t + Rp - d) / 2)
    return float(((np.clip(inner * _SHRINK, 0.0, None) / Rp) ** n).sum())


def mass_values(ex: ExampleVarifold):
    """``component_values`` callable for the mass (cached per level)."""
    cache = {}

    def values(j):
        if j not in cache:
            cache[j] = ex.component_values(j, "mass")
        return cache[j]
    return values


def curvature_values(ex: ExampleVarifold, p: float):
    cache = {}

    def values(j):
        if j not in cache:
            cache[j] = ex.component_values(j, "curvature", p=p)
        return cache[j]
    return values


# ----------------------------------------------------------------- oracle

def sample_cloud(ex: ExampleVarifold, levels=None, per_cell: int = 64, seed: int = 0,
                 include_plane: bool = False, plane_resolution: int = 64,
                 max_samples: int = 5_000_000) -> DiscreteVarifold:
    """Monte-Carlo point cloud of the example (an oracle, never a report source).

    Each listed level draws ``per_cell`` stratified samples per window cell
    from the unit surface, assigned to cells round-robin and placed by the
    cell's dilation and centre.  With ``include_plane`` a midpoint grid of the
    plane is appended.
    """
    from .shapes import make_canonical

    levels = list(range(min(ex.max_level, 4) + 1)) if levels is None else list(levels)
    per_cell = check_int(per_cell, "per_cell", minimum=1)
    n = ex.n
    total = sum(ex.levels[j].cells for j in levels) * per_cell
    if total > max_samples:
        raise CapacityError(f"{total} samples exceed max_samples={max_samples}")
    seeds = np.random.SeedSequence(seed).spawn(len(levels))
    parts = []
    for j, ss in zip(levels, seeds):
        lev = ex.levels[j]
        cells = enumerate_cells(ex.window, j)
        centers = np.array([[lev.y_center] + [float(c) for c in cell.cube.center] for cell in cells])
        m = len(cells) * per_cell
        smp = sample_surface(ex.geometry(j), m, seed=int(ss.generate_state(1)[0]))
        owner = np.arange(len(smp)) % len(cells)
        X = centers[owner] + lev.scale * smp.positions
        w = smp.weights * len(cells) * lev.scale ** n
        H = smp.mean_curvature / lev.scale
        parts.append(DiscreteVarifold.from_normals(X, smp.normals, w, n=n, mean_curvature=H))
    if include_plane:
        hw = float(ex.window.half_width)
        parts.append(make_canonical("plane_window", n=n, half_width=hw,
                                    resolution=plane_resolution))
    return DiscreteVarifold.concatenate(parts)


# -------------------------------------------------------------- estimator

class MultiscaleExample(BaseEstimator):
    """Estimator-style wrapper: ``fit`` assembles the example aggregates.

    Parameters mirror :class:`ExampleConfig`; ``quadrature_order`` sets the
    Gauss-Legendre order of the unit-surface integrals.

    Attributes
    ----------
    example_ : ExampleVarifold
    scales_ : DerivedScales
    level_mass_ : ndarray of shape (max_level + 1,)
    """

    def __init__(self, n=2, p=1, alpha1=1, alpha2=1, q1=3, q2=3, max_level=18,
                 window_half_width=1, s=None, r=None, quadrature_order=DEFAULT_ORDER):
        self.n = n
        self.p = p
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.q1 = q1
        self.q2 = q2
        self.max_level = max_level
        self.window_half_width = window_half_width
        self.s = s
        self.r = r
        self.quadrature_order = quadrature_order

    def to_config(self) -> ExampleConfig:
        return ExampleConfig(self.n, self.p, self.alpha1, self.alpha2, self.q1, self.q2,
                             self.max_level, self.window_half_width, self.s, self.r)

    def fit(self, X=None, y=None):
        self.example_ = build_example(self.to_config(), order=self.quadrature_order)
        self.scales_ = self.example_.scales
        self.level_mass_ = np.array([lev.level_mass for lev in self.example_.levels])
        return self

    def transform(self, X):
        """Level index of each point (``-1`` on ``T`` or outside every slab)."""
        check_is_fitted(self, "example_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = X[:, 0]
        out = np.full(y.shape[0], -1, dtype=int)
        pos = y > 0
        j = np.floor(-np.log2(y[pos])).astype(int)
        ok = (j >= 0) & (j <= self.example_.max_level) & (y[pos] < 2.0 ** -j)
        out[np.flatnonzero(pos)[ok]] = j[ok]
        return out


def build_manifest(ex: ExampleVarifold, report_levels=None) -> dict:
    """JSON-ready description: derived scales, per-level counts, tail bounds."""
    sc = ex.scales
    J = ex.max_level
    report_levels = list(range(0, J + 1)) if report_levels is None else list(report_levels)
    return {
        "config": ex.config.to_dict(),
        "derived": sc.as_dict(),
        "quadrature_order": ex.order,
        "plane_mass": ex.plane_mass,
        "levels": [
            {"j": lev.level, "log2_rho": str(lev.log2_rho), "rho": lev.rho,
             "sigma": sc.sigma(lev.level), "tau": lev.tau, "y_center": lev.y_center,
             "cells": lev.cells, "unit_mass": lev.unit_mass, "cell_mass": lev.cell_mass,
             "level_mass": lev.level_mass, "dyadic": sc.is_dyadic(lev.level)}
            for lev in ex.levels
        ],
        "tail_bounds": {str(i): tail_bound(sc, i, J, ex.order) for i in report_levels if i <= J},
    }
