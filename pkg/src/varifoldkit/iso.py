"""Isoperimetric quotients and the local density checks that follow from them.

The quotient of a varifold is ``mu({theta >= 1}) / (mu(R^d)^(1/n) ||delta mu||(R^d))``;
any admissible isoperimetric constant bounds it from above, and the
Lebesgue ball shows the best constant is at least ``omega_n^(-1/n) / n``.
Nothing here asserts an upper bound for the best constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_point, check_positive
from .example import ExampleVarifold, ball_bracket, curvature_values, mass_values
from .exceptions import ConfigurationError, DegenerateRegionError, SupportError
from .profile import ProfileGeometry, sample_surface, unit_ball_volume, unit_integrals
from .varifold import Ball, DiscreteVarifold, curvature_measure, mass_in

__all__ = [
    "IsoResult",
    "lebesgue_quotient",
    "iso_quotient",
    "iso_quotient_profile",
    "iso_quotient_mc",
    "GoodPointRecord",
    "good_point_check",
    "DensityVerdict",
    "density_lower_bound_check",
    "SweepRow",
    "profile_sweep",
]


def lebesgue_quotient(n) -> float:
    """``omega_n^(-1/n) / n``, the quotient of a Lebesgue ball in ``R^n``."""
    return unit_ball_volume(n) ** (-1.0 / n) / n


@dataclass(frozen=True)
class IsoResult:
    n: int
    mass: float
    variation: float
    density_mass: float

    @property
    def quotient(self) -> float:
        return self.density_mass / (self.mass ** (1.0 / self.n) * self.variation)

    def satisfies(self, gamma: float) -> bool:
        """Whether the isoperimetric inequality holds with constant ``gamma``."""
        return self.density_mass <= gamma * self.mass ** (1.0 / self.n) * self.variation

    def to_dict(self) -> dict:
        return {"n": self.n, "mass": self.mass, "variation": self.variation,
                "density_mass": self.density_mass, "quotient": self.quotient}


def _iso(n, mass, variation, density_mass):
    if not (mass > 0 and math.isfinite(mass)):
        raise DegenerateRegionError(f"mass must be positive and finite, got {mass}")
    if not (variation > 0 and math.isfinite(variation)):
        raise DegenerateRegionError(f"variation must be positive and finite, got {variation}")
    return IsoResult(n, float(mass), float(variation), float(density_mass))


def iso_quotient(v: DiscreteVarifold) -> IsoResult:
    """Quotient of a discrete varifold, exact on attached patches.

    ``mu({theta >= 1})`` is the total mass minus the weight of samples
    flagged with density below 1; patches always have density 1.
    """
    mass = v.total_mass()
    low = np.asarray(v.density) < 1
    low[~v._loose] = False
    density_mass = mass - float(np.asarray(v.weights)[low].sum())
    return _iso(v.n, mass, v.total_variation(), density_mass)


def iso_quotient_profile(tau: float, n: int = 2, order: int = 64) -> IsoResult:
    """Quotient of the closed unit bump with neck ``tau`` (quadrature)."""
    u = unit_integrals(ProfileGeometry(tau, n), p=1.0, order=order)
    return _iso(n, u.mass, u.curvature_moment, u.mass)


def iso_quotient_mc(tau: float, n: int = 2, count: int = 1_000_000, seed: int = 0) -> IsoResult:
    """Monte-Carlo estimate of :func:`iso_quotient_profile`."""
    smp = sample_surface(ProfileGeometry(tau, n), count, seed)
    mass = float(smp.weights.sum())
    return _iso(n, mass, float((smp.weights * smp.curvature_norm).sum()), mass)


# ----------------------------------------------------------- local checks

def _measures(v, a, radius):
    """``(mu_lo, mu_hi, var_lo, var_hi)`` on the closed ball."""
    if isinstance(v, ExampleVarifold):
        mu = ball_bracket(v, a, radius, mass_values(v), include_plane=True)
        var = ball_bracket(v, a, radius, curvature_values(v, 1.0))
        return mu.lower, mu.upper, var.lower, var.upper
    ball = Ball(a, radius)
    m = mass_in(v, ball)
    d = curvature_measure(v, ball, p=1)
    return m, m, d, d


def _in_support(v, a) -> bool:
    if isinstance(v, ExampleVarifold):
        return example_in_support(v, a)
    return v.in_support(a)


def example_in_support(ex: ExampleVarifold, a, rtol: float = 1e-9) -> bool:
    """Whether ``a`` lies on ``T`` (inside the window) or on a placed bump."""
    a = check_point(a, ex.n + 1, "a")
    c, w = ex.window.as_floats()
    if np.any(np.abs(a[1:] - c[1:]) > w):
        return False
    y = a[0]
    if y == 0:
        return True
    if y < 0 or y >= 1:
        return False
    j = int(math.floor(-math.log2(y)))
    if j > ex.max_level:
        return False
    lev = ex.levels[j]
    spacing = 2.0 ** (-j - 1)
    zc = np.round(a[1:] / spacing) * spacing
    k = lev.scale
    yl = (y - lev.y_center) / k
    s = float(np.linalg.norm(a[1:] - zc)) / k
    geom = ex.geometry(j)
    tol = rtol * max(1.0, 1.0 / k)
    s0, R = geom.plateau_radius, geom.arc_radius
    if s <= s0 + tol and abs(abs(yl) - geom.plateau_height) <= tol:
        return True
    if abs(s - 0.5) <= tol and abs(yl) <= geom.rim_height + tol:
        return True
    if s >= s0 - tol:
        d = math.hypot(s - s0, abs(yl) - R)
        return abs(d - R) <= tol and abs(yl) >= R - tol
    return False


@dataclass(frozen=True)
class GoodPointRecord:
    """Per-radius outcome of the good-point density bound.

    ``hypothesis[k]`` tells whether the variation bound holds at ``radii[k]``;
    ``valid[k]`` whether it holds at every scanned radius up to ``radii[k]``,
    in which case ``conclusion[k]`` must be true.  ``margin`` is
    ``mu(B(a, r)) / ((2 n gamma)^(-n) r^n)``.
    """

    radii: tuple
    mass: tuple
    variation: tuple
    hypothesis: tuple
    valid: tuple
    conclusion: tuple
    margin: tuple
    first_failure: float | None

    @property
    def holds(self) -> bool:
        return all(c for c, v in zip(self.conclusion, self.valid) if v)

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) if isinstance(getattr(self, k), tuple) else getattr(self, k)
                for k in ("radii", "mass", "variation", "hypothesis", "valid", "conclusion",
                          "margin", "first_failure")} | {"holds": self.holds}


def _scan_radii(r_max, levels):
    return [r_max * 2.0 ** -k for k in range(levels, 0, -1)]


def good_point_check(v, a, r_max: float, gamma: float | None = None,
                     levels: int = 20) -> GoodPointRecord:
    """Check ``mu(B(a, r)) >= (2 n gamma)^(-n) r^n`` where the variation bound holds.

    Radii are ``r_max 2^-k`` for ``k = 1..levels`` (all below ``r_max``).  The
    hypothesis ``||delta mu||(B(a, r)) <= (2 gamma)^(-1) mu(B(a, r))^(1-1/n)``
    is evaluated at each; radii below the first failure (scanning upward)
    form the valid chain.  ``gamma`` defaults to ``omega_n^(-1/n) / n``.

    Raises
    ------
    SupportError
        If ``a`` is not in the support.
    """
    n = v.n
    a = check_point(a, (v.n + 1) if isinstance(v, ExampleVarifold) else v.ambient_dim, "a")
    check_positive(r_max, "r_max")
    levels = check_int(levels, "levels", minimum=1)
    gamma = lebesgue_quotient(n) if gamma is None else check_positive(gamma, "gamma")
    if not _in_support(v, a):
        raise SupportError(f"a={a.tolist()} is not in the support")
    radii = _scan_radii(r_max, levels)
    out = {k: [] for k in ("mass", "variation", "hypothesis", "conclusion", "margin")}
    for r in radii:
        mu_lo, mu_hi, var_lo, var_hi = _measures(v, a, r)
        out["mass"].append(mu_lo)
        out["variation"].append(var_hi)
        out["hypothesis"].append(bool(var_hi <= mu_lo ** (1 - 1 / n) / (2 * gamma)))
        bound = (2 * n * gamma) ** (-n) * r ** n
        out["conclusion"].append(bool(mu_lo >= bound))
        out["margin"].append(mu_lo / bound)
    valid, first = [], None
    for r, h in zip(radii, out["hypothesis"]):
        if not h and first is None:
            first = r
        valid.append(first is None)
    return GoodPointRecord(tuple(radii), tuple(out["mass"]), tuple(out["variation"]),
                           tuple(out["hypothesis"]), tuple(valid), tuple(out["conclusion"]),
                           tuple(out["margin"]), first)


@dataclass(frozen=True)
class DensityVerdict:
    verdict: str
    mass: float
    target: float
    details: dict

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "mass": self.mass, "target": self.target,
                "details": self.details}


def density_lower_bound_check(v, a, r: float, epsilon: float, delta: float,
                              gamma: float | None = None, levels: int = 20) -> DensityVerdict:
    """Run the density lower-bound check with a user-supplied ``epsilon``.

    Hypotheses: the variation bound of :func:`good_point_check` at every
    scanned radius below ``r``, and ``||delta mu||(B(a, r)) <= epsilon mu(B(a, r))^(1-1/n)``.
    If both hold the conclusion ``mu(B(a, r)) >= (1 - delta) omega_n r^n``
    is tested; closed balls stand in for open ones.

    Returns a verdict of ``"conclusion holds"``, ``"conclusion violated"`` or
    ``"hypotheses not established"``.
    """
    n = v.n
    check_positive(r, "r")
    check_positive(epsilon, "epsilon")
    check_positive(delta, "delta")
    target = (1 - delta) * unit_ball_volume(n) * r ** n
    dim = (v.n + 1) if isinstance(v, ExampleVarifold) else v.ambient_dim
    a = check_point(a, dim, "a")
    if not _in_support(v, a):
        return DensityVerdict("hypotheses not established", 0.0, target,
                              {"reason": "a is not in the support"})
    rec = good_point_check(v, a, r, gamma, levels)
    mu_lo, mu_hi, var_lo, var_hi = _measures(v, a, r)
    chain = all(rec.hypothesis)
    local = var_hi <= epsilon * mu_lo ** (1 - 1 / n)
    details = {"chain": chain, "local": bool(local), "variation": var_hi}
    if not (chain and local):
        return DensityVerdict("hypotheses not established", mu_lo, target, details)
    verdict = "conclusion holds" if mu_lo >= target else "conclusion violated"
    return DensityVerdict(verdict, mu_lo, target, details)


@dataclass(frozen=True)
class SweepRow:
    tau: float
    mass: float
    variation: float
    quotient: float
    running_max: float


def profile_sweep(tau_grid, n: int = 2, order: int = 64):
    """Quotients of the closed bumps over a grid of necks.

    Returns the rows and a summary with the largest quotient and the
    Lebesgue-ball value; the comparison is an observation, not a claim.
    """
    rows, best = [], -math.inf
    for tau in tau_grid:
        res = iso_quotient_profile(float(tau), n, order)
        best = max(best, res.quotient)
        rows.append(SweepRow(float(tau), res.mass, res.variation, res.quotient, best))
    if not rows:
        raise ConfigurationError("empty tau grid")
    ref = lebesgue_quotient(n)
    return rows, {"max_quotient": best, "lebesgue_quotient": ref,
                  "all_below_lebesgue": bool(best <= ref)}
