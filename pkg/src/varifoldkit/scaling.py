"""Dyadic-radius profiles of the example, power-law fits and excess-set scans.

Profiles are two-sided: for the cube ``C(x, 2^-i)`` the lower bracket sums
per-cell values over the cells contained in the cube, the upper one over the
cells meeting it.  Slopes are ordinary least squares of ``log2 value``
against ``log2 radius``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_fraction, check_int, check_point, check_points
from .dyadic import count_cells
from .example import (
    ExampleVarifold,
    ball_bracket,
    curvature_values,
    mass_values,
    tail_bound,
    weight_value,
)
from .exceptions import (
    ConfigurationError,
    LogDomainError,
    MarginError,
    TruncationError,
    WeightExponentError,
)
from .profile import unit_ball_volume
from .varifold import Ball, DiscreteVarifold, curvature_measure, mass_in

__all__ = [
    "QuantityKind",
    "ProfileRow",
    "PowerLawFit",
    "SlopeFit",
    "ScalingReport",
    "ScalingAnalyzer",
    "KIND_NAMES",
    "DEFAULT_TOLERANCES",
    "predicted_exponent",
    "predicted_level_ratio",
    "level_values",
    "level_ratios",
    "cube_bracket",
    "dyadic_profile",
    "fit_slope",
    "scaling_report",
    "ExcessScan",
    "excess_set_scan",
    "default_epsilon",
    "DichotomyResult",
    "dichotomy_ratio",
]

KIND_NAMES = ("mass", "height", "tilt", "curvature", "weighted", "weighted_power")
_ALIASES = {"mass_minus_plane": "mass", "curvature_mass": "curvature",
            "weighted_mass": "weighted", "weighted_power_mass": "weighted_power"}
DEFAULT_TOLERANCES = {"mass": 0.15, "weighted": 0.15, "weighted_power": 0.15,
                      "curvature": 0.15, "height": 0.2, "tilt": 0.2}
#: Largest admissible relative tail of omitted levels for a profile.
DEFAULT_TAIL_THRESHOLD = 1e-3


@dataclass(frozen=True)
class QuantityKind:
    """A level-additive quantity of the example.

    ``name`` is one of :data:`KIND_NAMES` (long aliases such as
    ``mass_minus_plane`` are accepted).  Missing exponents default to the
    example's: ``q2`` for height, ``q1`` for tilt, ``p`` for curvature,
    ``s``/``r`` for the weighted kinds.
    """

    name: str
    q: float | None = None
    norm: str = "frobenius"
    p: float | None = None
    s: float | None = None
    r: float | None = None

    def __post_init__(self):
        name = _ALIASES.get(self.name, self.name)
        if name not in KIND_NAMES:
            raise ConfigurationError(f"unknown quantity kind {self.name!r}; expected one of {KIND_NAMES}")
        object.__setattr__(self, "name", name)
        if self.norm not in ("frobenius", "operator"):
            raise ConfigurationError(f"unknown norm {self.norm!r}")

    def resolve(self, ex: ExampleVarifold) -> "QuantityKind":
        """Fill unset exponents from the example configuration and validate them."""
        cfg = ex.config
        q, p, s, r = self.q, self.p, self.s, self.r
        if self.name == "height" and q is None:
            q = float(as_fraction(cfg.q2))
        if self.name == "tilt" and q is None:
            q = float(as_fraction(cfg.q1))
        if self.name == "curvature" and p is None:
            p = float(as_fraction(cfg.p))
        if self.name in ("weighted", "weighted_power"):
            s = cfg.s if s is None else s
            r = cfg.r if r is None else r
            if s is None:
                raise WeightExponentError("weighted quantities need s")
            if self.name == "weighted_power" and r is None:
                raise WeightExponentError("weighted_power needs r")
            if r is not None:
                rr, ss = as_fraction(r, "r"), as_fraction(s, "s")
                if not rr > 1 or not ss > ex.n + (1 - 1 / rr) * ex.scales.kappa:
                    raise WeightExponentError(
                        f"need r > 1 and s > n + (1 - 1/r)*alpha2*q2, got s={s}, r={r}")
            s = float(as_fraction(s))
            r = None if r is None else float(as_fraction(r))
        if q is not None and q < 1:
            raise ConfigurationError(f"q must be >= 1, got {q}")
        if p is not None and not 1 <= p < ex.n:
            raise ConfigurationError(f"p must lie in [1, n), got {p}")
        return QuantityKind(self.name, q, self.norm, p, s, r)

    @property
    def label(self) -> str:
        extra = {"height": f"(q={self.q})", "tilt": f"(q={self.q}, {self.norm})",
                 "curvature": f"(p={self.p})", "weighted": f"(s={self.s})",
                 "weighted_power": f"(s={self.s}, r={self.r})"}.get(self.name, "")
        return self.name + extra

    def to_dict(self) -> dict:
        return {"name": self.name, "q": self.q, "norm": self.norm, "p": self.p,
                "s": self.s, "r": self.r}


def predicted_exponent(kind: QuantityKind, ex: ExampleVarifold) -> float:
    """Exponent ``e`` with ``value(C(x, rho)) ~ rho^e`` for ``x`` on ``T``."""
    k = kind.resolve(ex)
    n, a, b = ex.n, ex.scales.a, ex.scales.b
    na = float(n * a)
    if k.name == "mass":
        return na
    if k.name == "height":
        return k.q + na
    if k.name == "tilt":
        return float(a * b + a * (n - 1))
    if k.name == "curvature":
        return float(b * a) * (1 - k.p) + float(a * (n - 1))
    if k.name == "weighted":
        return k.s
    return (k.s - na) * k.r + na


def predicted_level_ratio(kind: QuantityKind, ex: ExampleVarifold) -> float:
    """Closed-form ratio of consecutive per-unit-area level aggregates.

    Exact when ``tau_j`` is constant (``b = 1``); asymptotic otherwise.
    """
    k = kind.resolve(ex)
    n, a, b = ex.n, float(ex.scales.a), float(ex.scales.b)
    if k.name == "curvature":
        return 2.0 ** (n - b * a * (1 - k.p) + (1 - n) * a)
    if k.name == "mass":
        return 2.0 ** (n * (1 - a))
    if k.name == "weighted":
        return 2.0 ** (n + (n * a - k.s) - n * a)
    if k.name == "weighted_power":
        return 2.0 ** (n + (n * a - k.s) * k.r - n * a)
    raise ConfigurationError(f"no closed-form level ratio for {k.name}")


def _weight_factor(kind, ex, j):
    if kind.name == "weighted":
        return weight_value(ex.scales, j, kind.s)
    if kind.name == "weighted_power":
        return weight_value(ex.scales, j, kind.s, kind.r)
    return 1.0


def component_values(ex: ExampleVarifold, kind: QuantityKind, j: int) -> dict:
    """Per-cell value of ``kind`` at level ``j``, split by surface component."""
    k = kind.resolve(ex)
    if k.name in ("mass", "weighted", "weighted_power"):
        w = _weight_factor(k, ex, j)
        return {c: w * v for c, v in ex.component_values(j, "mass").items()}
    if k.name == "curvature":
        return ex.component_values(j, "curvature", p=k.p)
    if k.name == "tilt":
        return ex.component_values(j, "tilt", q=k.q, norm=k.norm)
    return ex.component_values(j, "height", q=k.q)


def level_values(ex: ExampleVarifold, kind: QuantityKind) -> np.ndarray:
    """Per-cell value ``v_j`` for ``j = 0..J``."""
    k = kind.resolve(ex)
    return np.array([sum(component_values(ex, k, j).values()) for j in range(ex.max_level + 1)])


def level_ratios(ex: ExampleVarifold, kind: QuantityKind) -> np.ndarray:
    """Ratios ``2^n v_{j+1} / v_j`` of per-unit-area level aggregates.

    A level-``j`` cell has cross-section area ``2^(-(j+1) n)``, so the
    per-unit-area aggregate is ``2^((j+1) n) v_j``.
    """
    v = level_values(ex, kind)
    return 2.0 ** ex.n * v[1:] / v[:-1]


@dataclass(frozen=True)
class ProfileRow:
    i: int
    radius: float
    lower: float
    upper: float

    @property
    def log2_lower(self) -> float:
        return math.log2(self.lower) if self.lower > 0 else -math.inf

    @property
    def log2_upper(self) -> float:
        return math.log2(self.upper) if self.upper > 0 else -math.inf


def _x_on_T(ex, x):
    if x is None:
        return (0,) * ex.n
    x = tuple(x)
    if len(x) == ex.n + 1:
        if x[0] != 0:
            raise ConfigurationError("x must lie on T (first coordinate 0)")
        x = x[1:]
    if len(x) != ex.n:
        raise ConfigurationError(f"x must have {ex.n} or {ex.n + 1} coordinates")
    return x


def cube_bracket(ex: ExampleVarifold, i: int, values, x=None):
    """``(sum_j c_ij v_j, sum_j b_ij v_j)`` over the levels of ``ex``."""
    x = _x_on_T(ex, x)
    lo = hi = 0.0
    for j in range(ex.max_level + 1):
        b = count_cells(i, j, x, "intersecting")
        if b == 0:
            continue
        c = count_cells(i, j, x, "contained")
        lo += c * values[j]
        hi += b * values[j]
    return lo, hi


def _check_profile_range(ex, i_min, i_max, x, tail_threshold):
    i_min = check_int(i_min, "i_min", minimum=0)
    i_max = check_int(i_max, "i_max", minimum=0)
    if i_max < i_min:
        raise ConfigurationError(f"need i_min <= i_max, got [{i_min}, {i_max}]")
    if ex.max_level < i_max:
        raise TruncationError(f"max_level={ex.max_level} is below i_max={i_max}")
    tb = tail_bound(ex.scales, i_max, ex.max_level, ex.order)
    if tb > tail_threshold:
        raise TruncationError(
            f"tail bound {tb:.3g} at i={i_max} exceeds {tail_threshold:g}; raise max_level")
    c, w = ex.window.as_floats()
    xz = np.array([float(as_fraction(t)) for t in x], dtype=float)
    if np.any(np.abs(xz - c[1:]) + 2.0 ** -i_min > w) or 2.0 ** -i_min > w:
        raise MarginError(f"cube of radius 2^-{i_min} leaves the window")
    return i_min, i_max, tb


def dyadic_profile(ex: ExampleVarifold, kind: QuantityKind, i_min: int, i_max: int,
                   x=None, geometry: str = "cube",
                   tail_threshold: float = DEFAULT_TAIL_THRESHOLD):
    """Bracketed values of ``kind`` over ``C(x, 2^-i)`` (or the ball) for ``i`` in range.

    Raises
    ------
    TruncationError
        If the relative tail of omitted levels at ``i_max`` exceeds
        ``tail_threshold``.
    """
    k = kind.resolve(ex)
    x = _x_on_T(ex, x)
    _check_profile_range(ex, i_min, i_max, x, tail_threshold)
    rows = []
    if geometry == "cube":
        vals = level_values(ex, k)
        for i in range(i_min, i_max + 1):
            lo, hi = cube_bracket(ex, i, vals, x)
            rows.append(ProfileRow(i, 2.0 ** -i, lo, hi))
    elif geometry == "ball":
        cache = {}

        def comp(j):
            if j not in cache:
                cache[j] = component_values(ex, k, j)
            return cache[j]
        point = np.concatenate([[0.0], [float(as_fraction(t)) for t in x]])
        for i in range(i_min, i_max + 1):
            br = ball_bracket(ex, point, 2.0 ** -i, comp)
            rows.append(ProfileRow(i, 2.0 ** -i, br.lower, br.upper))
    else:
        raise ConfigurationError(f"unknown geometry {geometry!r}")
    return rows


class PowerLawFit(RegressorMixin, BaseEstimator):
    """Least-squares power law ``value = 2^intercept * radius^slope``.

    Attributes
    ----------
    slope_, intercept_ : float
    residual_ : float
        Largest absolute deviation of ``log2 value`` from the fitted line.
    """

    def fit(self, X, y):
        r = np.asarray(X, dtype=float).reshape(-1)
        v = np.asarray(y, dtype=float).reshape(-1)
        if r.shape != v.shape:
            raise ConfigurationError("radii and values differ in length")
        if r.size < 3:
            raise ConfigurationError("a slope fit needs at least 3 radii")
        if np.any(~(v > 0)) or np.any(~(r > 0)) or not np.all(np.isfinite(v)):
            raise LogDomainError("all radii and values must be finite and > 0")
        lx, ly = np.log2(r), np.log2(v)
        A = np.column_stack([lx, np.ones_like(lx)])
        (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
        self.slope_ = float(slope)
        self.intercept_ = float(intercept)
        self.residual_ = float(np.abs(ly - A @ np.array([slope, intercept])).max())
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        r = np.asarray(X, dtype=float).reshape(-1)
        return 2.0 ** self.intercept_ * r ** self.slope_

    def score(self, X, y, sample_weight=None):
        """Coefficient of determination in log-log coordinates."""
        check_is_fitted(self, "slope_")
        ly = np.log2(np.asarray(y, dtype=float).reshape(-1))
        pred = np.log2(self.predict(X))
        ss_res = float(((ly - pred) ** 2).sum())
        ss_tot = float(((ly - ly.mean()) ** 2).sum())
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


@dataclass(frozen=True)
class SlopeFit:
    slope_lower: float
    slope_upper: float
    residual_lower: float
    residual_upper: float
    intercept_lower: float
    intercept_upper: float

    @property
    def residuals(self):
        return (self.residual_lower, self.residual_upper)


def fit_slope(rows) -> SlopeFit:
    """Fit both brackets of profile rows.

    Raises
    ------
    LogDomainError
        If a bracket value is not positive.
    """
    rows = list(rows)
    r = [row.radius for row in rows]
    lo = PowerLawFit().fit(r, [row.lower for row in rows])
    hi = PowerLawFit().fit(r, [row.upper for row in rows])
    return SlopeFit(lo.slope_, hi.slope_, lo.residual_, hi.residual_, lo.intercept_, hi.intercept_)


@dataclass(frozen=True)
class ScalingReport:
    kind: QuantityKind
    geometry: str
    rows: tuple
    fit: SlopeFit
    predicted: float
    tolerance: float
    tail_bound: float
    x: tuple = ()
    level_ratio: float | None = None
    predicted_level_ratio: float | None = None
    notes: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return (abs(self.fit.slope_lower - self.predicted) <= self.tolerance
                and abs(self.fit.slope_upper - self.predicted) <= self.tolerance)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def i_range(self):
        return (self.rows[0].i, self.rows[-1].i)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.to_dict(),
            "label": self.kind.label,
            "geometry": self.geometry,
            "x": [str(as_fraction(t)) for t in self.x],
            "rows": [{"i": r.i, "radius": r.radius, "lower": r.lower, "upper": r.upper,
                      "log2_lower": r.log2_lower, "log2_upper": r.log2_upper} for r in self.rows],
            "slope_lower": self.fit.slope_lower,
            "slope_upper": self.fit.slope_upper,
            "residual_lower": self.fit.residual_lower,
            "residual_upper": self.fit.residual_upper,
            "predicted_exponent": self.predicted,
            "tolerance": self.tolerance,
            "tail_bound": self.tail_bound,
            "level_ratio": self.level_ratio,
            "predicted_level_ratio": self.predicted_level_ratio,
            "verdict": self.verdict,
        }


def scaling_report(ex: ExampleVarifold, kind: QuantityKind, i_min: int = 2, i_max: int = 8,
                   x=None, geometry: str = "cube", tolerance: float | None = None,
                   tail_threshold: float = DEFAULT_TAIL_THRESHOLD) -> ScalingReport:
    """Profile, fit and verdict for one quantity."""
    k = kind.resolve(ex)
    rows = dyadic_profile(ex, k, i_min, i_max, x, geometry, tail_threshold)
    fit = fit_slope(rows)
    tol = DEFAULT_TOLERANCES[k.name] if tolerance is None else float(tolerance)
    ratio = pred_ratio = None
    if k.name in ("curvature", "mass", "weighted", "weighted_power"):
        ratios = level_ratios(ex, k)
        ratio = float(ratios[-1])
        pred_ratio = predicted_level_ratio(k, ex)
    return ScalingReport(
        kind=k, geometry=geometry, rows=tuple(rows), fit=fit,
        predicted=predicted_exponent(k, ex), tolerance=tol,
        tail_bound=tail_bound(ex.scales, i_max, ex.max_level, ex.order),
        x=_x_on_T(ex, x), level_ratio=ratio, predicted_level_ratio=pred_ratio)


class ScalingAnalyzer(BaseEstimator):
    """Estimator wrapper around :func:`scaling_report`.

    ``fit(example)`` stores ``report_``, ``slope_`` (mean of both brackets)
    and ``passed_``; ``predict(radii)`` evaluates the upper-bracket power law.
    """

    def __init__(self, kind="mass", q=None, norm="frobenius", p=None, s=None, r=None,
                 i_min=2, i_max=8, geometry="cube", tolerance=None):
        self.kind = kind
        self.q = q
        self.norm = norm
        self.p = p
        self.s = s
        self.r = r
        self.i_min = i_min
        self.i_max = i_max
        self.geometry = geometry
        self.tolerance = tolerance

    def fit(self, X, y=None):
        if not isinstance(X, ExampleVarifold):
            raise ConfigurationError("ScalingAnalyzer.fit expects an ExampleVarifold")
        kind = QuantityKind(self.kind, self.q, self.norm, self.p, self.s, self.r)
        self.report_ = scaling_report(X, kind, self.i_min, self.i_max, geometry=self.geometry,
                                      tolerance=self.tolerance)
        self.slope_ = 0.5 * (self.report_.fit.slope_lower + self.report_.fit.slope_upper)
        self.passed_ = self.report_.passed
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        f = self.report_.fit
        r = np.asarray(X, dtype=float).reshape(-1)
        return 2.0 ** f.intercept_upper * r ** f.slope_upper


# ---------------------------------------------------------- excess scans

def default_epsilon(n: int, p: float, gamma: float | None = None) -> float:
    """``(2 gamma)^(-p/(n-p))``; ``gamma`` defaults to ``omega_n^(-1/n) / n``."""
    if not 1 <= p < n:
        raise ConfigurationError(f"need 1 <= p < n, got p={p}, n={n}")
    if gamma is None:
        gamma = unit_ball_volume(n) ** (-1.0 / n) / n
    return (2.0 * gamma) ** (-p / (n - p))


@dataclass(frozen=True)
class ExcessScan:
    """Membership of probes in the sets for each tested ``i``.

    ``membership[k, t]`` is ``True`` (in), ``False`` (out) or ``None``
    (brackets too wide to decide) for probe ``k`` and ``i = i_values[t]``.
    """

    mode: str
    i_values: tuple
    radii: tuple
    membership: tuple
    epsilon: float
    decay: dict | None = None

    def all_in(self) -> bool:
        return all(m is True for row in self.membership for m in row)

    def none_in(self) -> bool:
        return all(m is False for row in self.membership for m in row)

    def nested(self) -> bool:
        """``B_{i+1} subset B_i`` on the probe set (undecided counts as either)."""
        order = np.argsort(self.i_values)
        for row in self.membership:
            seq = [row[t] for t in order]
            for a, b in zip(seq[:-1], seq[1:]):
                if b is True and a is False:
                    return False
        return True

    def to_dict(self) -> dict:
        return {"mode": self.mode, "i_values": list(self.i_values), "radii": list(self.radii),
                "membership": [[m for m in row] for row in self.membership],
                "epsilon": self.epsilon, "decay": self.decay}


def _radii_for(i_values, k_max):
    """Dyadic radii ``2^-k`` below ``1/i_min`` down to ``2^-k_max``."""
    i0 = min(i_values)
    k0 = 0
    while 2.0 ** -k0 >= 1.0 / i0:
        k0 += 1
    if k_max < k0:
        raise ConfigurationError(f"k_max={k_max} leaves no radius below 1/{i0}")
    return list(range(k0, k_max + 1))


def _check_margin(x, i, domain):
    if domain is None:
        return
    c, w = domain
    if np.any(np.abs(x - c) + 1.0 / i >= w):
        raise MarginError(f"probe {x.tolist()} is within 1/{i} of the domain boundary")


def _combine(status_by_k, ks, i_values):
    """Per ``i``: in if some radius below ``1/i`` is in, out if all are out."""
    out = []
    for i in i_values:
        sel = [status_by_k[k] for k in ks if 2.0 ** -k < 1.0 / i]
        if any(s is True for s in sel):
            out.append(True)
        elif all(s is False for s in sel):
            out.append(False)
        else:
            out.append(None)
    return tuple(out)


def excess_set_scan(v, probes, i_values, mode: str = "B", epsilon: float | None = None,
                    p: float | None = None, gamma: float | None = None, k_max: int | None = None,
                    domain=None, include_plane: bool = False, a=None, f=None, q: float = 1.0,
                    alpha: float = 1.0, decay_radii=None) -> ExcessScan:
    """Scan probes for membership in ``B_i`` (``mode="B"``) or ``D_i(a)`` (``mode="D"``).

    B mode: ``x`` is in ``B_i`` when ``psi(B(x, r)) > eps^(n-p) mu(B(x, r))^(1-p/n)``
    for a dyadic ``r < 1/i`` (radii ``2^-k`` down to ``2^-k_max``).  On an
    :class:`ExampleVarifold` both sides are bracketed and ``mu`` excludes the
    plane unless ``include_plane``; the window interior is the domain.  On a
    :class:`DiscreteVarifold` values are exact sums and ``domain`` is an
    optional :class:`Cube` whose interior plays the role of the open set.

    D mode (``DiscreteVarifold`` only): probes are sample indices (default all),
    ``f`` is sample-indexed, ``a`` a sample index, and ``x`` is in ``D_i(a)``
    when ``int_{B(x, r)} |f - f(a)|^q > eps * mu(B(x, r))``.  Decay ratios
    ``mu(D_i(a) cap B(a, r)) / r^(n + alpha q)`` are returned for
    ``decay_radii`` (default the scan radii).

    Raises
    ------
    MarginError
        If a probe lies within ``1/i`` of the domain boundary.
    """
    i_values = tuple(check_int(i, "i", minimum=1) for i in i_values)
    if not i_values:
        raise ConfigurationError("at least one i is required")
    k_max = (max(int(math.ceil(math.log2(max(i_values)))) + 6, 8) if k_max is None
             else check_int(k_max, "k_max", minimum=0))
    ks = _radii_for(i_values, k_max)
    if mode == "B":
        return _scan_B(v, probes, i_values, ks, epsilon, p, gamma, domain, include_plane)
    if mode == "D":
        return _scan_D(v, probes, i_values, ks, epsilon, a, f, q, alpha, domain, decay_radii)
    raise ConfigurationError(f"unknown scan mode {mode!r}")


def _scan_B(v, probes, i_values, ks, epsilon, p, gamma, domain, include_plane):
    n = v.n
    if isinstance(v, ExampleVarifold):
        p = float(as_fraction(v.config.p)) if p is None else float(p)
        c, w = v.window.as_floats()
        dom = (c, w)
    elif isinstance(v, DiscreteVarifold):
        p = v.p if p is None else float(p)
        dom = None if domain is None else (np.asarray(domain.center), domain.half_width)
    else:
        raise ConfigurationError("B mode needs an ExampleVarifold or a DiscreteVarifold")
    eps = default_epsilon(n, p, gamma) if epsilon is None else float(epsilon)
    X = check_points(probes, n + 1, "probes")
    for x in X:
        for i in i_values:
            _check_margin(x, i, dom)
    coeff = eps ** (n - p)
    expo = 1.0 - p / n
    rows = []
    if isinstance(v, ExampleVarifold):
        mv, cv = mass_values(v), curvature_values(v, p)
        for x in X:
            status = {}
            for k in ks:
                R = 2.0 ** -k
                mu = ball_bracket(v, x, R, mv, include_plane=include_plane)
                psi = ball_bracket(v, x, R, cv)
                if psi.lower > coeff * mu.upper ** expo:
                    status[k] = True
                elif psi.upper <= coeff * mu.lower ** expo:
                    status[k] = False
                else:
                    status[k] = None
            rows.append(_combine(status, ks, i_values))
    else:
        for x in X:
            status = {}
            for k in ks:
                ball = Ball(x, 2.0 ** -k)
                status[k] = bool(curvature_measure(v, ball, p) > coeff * mass_in(v, ball) ** expo)
            rows.append(_combine(status, ks, i_values))
    return ExcessScan("B", i_values, tuple(2.0 ** -k for k in ks), tuple(rows), eps)


def _scan_D(v, probes, i_values, ks, epsilon, a, f, q, alpha, domain, decay_radii):
    if not isinstance(v, DiscreteVarifold):
        raise ConfigurationError("D mode needs a DiscreteVarifold (e.g. from sample_cloud)")
    if f is None or a is None:
        raise ConfigurationError("D mode needs f (sample-indexed) and a (sample index)")
    N = len(v)
    fv = np.asarray(f(v.positions) if callable(f) else f, dtype=float)
    if fv.shape[0] != N:
        raise ConfigurationError("f must have one value per sample")
    fv = fv.reshape(N, -1)
    a = check_int(a, "a", minimum=0)
    if a >= N:
        raise ConfigurationError("a is not a sample index")
    eps = 1.0 if epsilon is None else float(epsilon)
    idx = np.arange(N) if probes is None else np.asarray(probes, dtype=int).reshape(-1)
    dom = None if domain is None else (np.asarray(domain.center), domain.half_width)
    for x in v.positions[idx]:
        for i in i_values:
            _check_margin(x, i, dom)
    g = np.linalg.norm(fv - fv[a], axis=1) ** q * v.weights
    tree = cKDTree(v.positions)
    stat = np.zeros((idx.size, len(ks)), dtype=bool)
    for t, k in enumerate(ks):
        nbrs = tree.query_ball_point(v.positions[idx], 2.0 ** -k)
        for u, nb in enumerate(nbrs):
            nb = np.asarray(nb, dtype=int)
            stat[u, t] = g[nb].sum() > eps * v.weights[nb].sum()
    rows = []
    for u in range(idx.size):
        status = {k: bool(stat[u, t]) for t, k in enumerate(ks)}
        rows.append(_combine(status, ks, i_values))
    decay = {}
    radii = [2.0 ** -k for k in ks] if decay_radii is None else list(decay_radii)
    e = v.n + alpha * q
    pa = v.positions[a]
    for t, i in enumerate(i_values):
        member = np.zeros(N, dtype=bool)
        member[idx[[r[t] is True for r in rows]]] = True
        decay[str(i)] = [float(v.weights[member & Ball(pa, r).contains(v.positions)].sum()) / r ** e
                         for r in radii]
    return ExcessScan("D", i_values, tuple(2.0 ** -k for k in ks), tuple(rows), eps,
                      {"radii": radii, "exponent": e, "ratios": decay})


# -------------------------------------------------------------- dichotomy

@dataclass(frozen=True)
class DichotomyResult:
    i_values: tuple
    exponent: float
    predicted_exponent: float
    ball_lower: tuple
    ball_upper: tuple
    cube_lower: tuple
    cube_upper: tuple
    verdict: str
    predicted_verdict: str
    bracket: tuple
    slope_per_level: float
    nu: str

    @property
    def passed(self) -> bool:
        return self.verdict == self.predicted_verdict

    def to_dict(self) -> dict:
        return {"i_values": list(self.i_values), "exponent": self.exponent,
                "predicted_exponent": self.predicted_exponent, "nu": self.nu,
                "ball_lower": list(self.ball_lower), "ball_upper": list(self.ball_upper),
                "cube_lower": list(self.cube_lower), "cube_upper": list(self.cube_upper),
                "bracket_L": self.bracket[0], "bracket_U": self.bracket[1],
                "slope_per_level": self.slope_per_level, "verdict": self.verdict,
                "predicted_verdict": self.predicted_verdict,
                "passed": self.passed}


#: Minimum |log2 ratio| change per level for a trend verdict.
TREND_SLOPE = 0.25
#: Largest ``U / L`` accepted for a bounded-positive verdict.
BOUNDED_SPREAD = 10.0


def _classify(lower, upper):
    lo, hi = np.log2(lower), np.log2(upper)
    steps = np.arange(len(lo), dtype=float)
    slope = 0.5 * (np.polyfit(steps, lo, 1)[0] + np.polyfit(steps, hi, 1)[0])
    inc = np.all(np.diff(lo) > 0) and np.all(np.diff(hi) > 0)
    dec = np.all(np.diff(lo) < 0) and np.all(np.diff(hi) < 0)
    L, U = float(np.min(lower)), float(np.max(upper))
    if inc and slope > TREND_SLOPE:
        return "tends to infinity", (L, U), float(slope)
    if dec and slope < -TREND_SLOPE:
        return "tends to 0", (L, U), float(slope)
    if U / L <= BOUNDED_SPREAD:
        return "bounded-positive", (L, U), float(slope)
    return "indeterminate", (L, U), float(slope)


def dichotomy_ratio(ex: ExampleVarifold, q: float, nu: str = "complement_of_T", a=None,
                    i_min: int = 2, i_max: int = 8, s=None, r=None) -> DichotomyResult:
    """Ratios ``nu(B(a, 2^-i)) / 2^(-i n q)`` with bracket verdict.

    ``nu="complement_of_T"`` is ``mu`` restricted to the complement of ``T``
    (decay exponent ``n + alpha2 q2``); ``nu="weighted"`` is ``f mu`` with the
    level weights, requiring ``1 < r < inf`` and ``s = n q`` with
    ``s > n + (1 - 1/r) alpha2 q2`` (decay exponent ``s``).  The cube variant
    is reported alongside.

    Raises
    ------
    ConfigurationError
        If ``a`` is not on ``T`` or the exponents match neither regime.
    """
    n = ex.n
    a = np.zeros(n + 1) if a is None else check_point(a, n + 1, "a")
    if a[0] != 0:
        raise ConfigurationError("a must lie on T (first coordinate 0)")
    q = float(q)
    if q < 1:
        raise ConfigurationError(f"q must be >= 1, got {q}")
    if nu == "complement_of_T":
        kind = QuantityKind("mass")
        pred = float(n + ex.scales.kappa)
    elif nu == "weighted":
        s = ex.config.s if s is None else s
        r = ex.config.r if r is None else r
        if s is None or r is None:
            raise ConfigurationError("weighted nu needs s and r")
        if not (1 < float(r) < math.inf):
            raise ConfigurationError("weighted nu needs 1 < r < inf")
        if abs(float(s) - n * q) > 1e-12:
            raise ConfigurationError(f"weighted nu needs s = n q, got s={s}, n q={n * q}")
        kind = QuantityKind("weighted", s=s, r=r)
        pred = float(s)
    else:
        raise ConfigurationError(f"unknown nu {nu!r}")
    k = kind.resolve(ex)
    _check_profile_range(ex, i_min, i_max, tuple(a[1:]), DEFAULT_TAIL_THRESHOLD)
    cache = {}

    def comp(j):
        if j not in cache:
            cache[j] = component_values(ex, k, j)
        return cache[j]
    vals = level_values(ex, k)
    i_values = tuple(range(i_min, i_max + 1))
    bl, bu, cl, cu = [], [], [], []
    for i in i_values:
        norm = 2.0 ** (-i * n * q)
        br = ball_bracket(ex, a, 2.0 ** -i, comp)
        bl.append(br.lower / norm)
        bu.append(br.upper / norm)
        lo, hi = cube_bracket(ex, i, vals, tuple(a[1:]))
        cl.append(lo / norm)
        cu.append(hi / norm)
    verdict, bracket, slope = _classify(np.array(bl), np.array(bu))
    e = n * q
    if abs(e - pred) <= 1e-12:
        predicted = "bounded-positive"
    elif e > pred:
        predicted = "tends to infinity"
    else:
        predicted = "tends to 0"
    return DichotomyResult(i_values, e, pred, tuple(bl), tuple(bu), tuple(cl), tuple(cu),
                           verdict, predicted, bracket, slope, nu)

