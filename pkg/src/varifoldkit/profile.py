"""Unit-scale bump surface: a profile curve revolved about the normal axis of ``T``.

The profile over the radial coordinate ``s in [0, 1/2]`` is a plateau at
height ``tau/2`` followed by a quarter circle of radius ``tau/4`` that meets the
rim cylinder ``s = 1/2`` with a vertical tangent.  Reflecting in ``y = 0`` and
revolving about the ``y`` axis gives a closed ``C^{1,1}`` hypersurface of
``R^(n+1)`` inside the cube of half-width ``1/2``.  Points are stored as
``(y, z_1, ..., z_n)`` with ``y`` the height above ``T``.

The surface splits into five pieces (two plateau disks, two arc bands, the
cylinder).  Every surface integral reduces to a one-dimensional integral over
the profile: plateaus in closed form, arcs in the turning angle ``phi`` (this
keeps the integrand bounded at the vertical tangent), the cylinder in ``y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn

from ._validation import check_int, check_positive
from .exceptions import ConfigurationError, DomainError, QuadratureError

__all__ = [
    "COMPONENTS",
    "ProfileGeometry",
    "ProfilePoint",
    "ComponentIntegrals",
    "UnitSurfaceIntegrals",
    "SurfaceSamples",
    "unit_ball_volume",
    "sphere_area",
    "tilt_constant",
    "curvature_bound",
    "profile_eval",
    "unit_integrals",
    "component_regions",
    "height_moment",
    "sample_surface",
]

COMPONENTS = ("top_plateau", "bottom_plateau", "top_arc", "bottom_arc", "cylinder")
NORMS = ("frobenius", "operator")
DEFAULT_ORDER = 64


def unit_ball_volume(n) -> float:
    """Lebesgue measure of the unit ball in ``R^n`` (Gamma extension for real n)."""
    return math.pi ** (n / 2) / gamma_fn(n / 2 + 1)


def sphere_area(n) -> float:
    """``H^(n-1)`` measure of the unit sphere in ``R^n``, i.e. ``n * omega_n``."""
    return n * unit_ball_volume(n)


def tilt_constant(norm: str) -> float:
    """``|P_S - P_T|`` for hyperplanes with orthogonal normals."""
    if norm == "frobenius":
        return math.sqrt(2.0)
    if norm == "operator":
        return 1.0
    raise ConfigurationError(f"unknown norm {norm!r}; expected one of {NORMS}")


@dataclass(frozen=True)
class ProfileGeometry:
    """Unit-scale bump with neck parameter ``tau`` in ``(0, 1]``."""

    tau: float
    n: int = 2

    def __post_init__(self):
        tau = float(self.tau)
        if not (0.0 < tau <= 1.0):
            raise DomainError(f"tau must lie in (0, 1], got {self.tau!r}")
        n = check_int(self.n, "n", minimum=2)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "n", n)

    @property
    def plateau_height(self) -> float:
        return self.tau / 2

    @property
    def rim_height(self) -> float:
        return self.tau / 4

    @property
    def arc_radius(self) -> float:
        return self.tau / 4

    @property
    def plateau_radius(self) -> float:
        return 0.5 - self.tau / 4


@dataclass(frozen=True)
class ProfilePoint:
    f: float
    f_prime: float
    curvature: float


def curvature_bound(geom: ProfileGeometry) -> float:
    """Explicit pointwise bound ``4/tau + 4(n-1)`` on ``|H|`` of the unit surface."""
    return 4.0 / geom.tau + 4.0 * (geom.n - 1)


def profile_eval(geom: ProfileGeometry, s: float) -> ProfilePoint:
    """Profile height, slope and curvature at radial coordinate ``s``.

    >>> profile_eval(ProfileGeometry(0.25), 0.0)
    ProfilePoint(f=0.125, f_prime=0.0, curvature=0.0)
    """
    s = float(s)
    if not (0.0 <= s <= 0.5):
        raise DomainError(f"s must lie in [0, 1/2], got {s}")
    s0, R = geom.plateau_radius, geom.arc_radius
    if s <= s0:
        return ProfilePoint(geom.plateau_height, 0.0, 0.0)
    u = s - s0
    root = math.sqrt(max(R * R - u * u, 0.0))
    f = R + root
    fp = -u / root if root > 0 else -math.inf
    return ProfilePoint(f, fp, 1.0 / R)


@dataclass(frozen=True)
class ComponentIntegrals:
    mass: float
    curvature_moment: float
    tilt_moment: float
    tilt_superlevel: float


@dataclass(frozen=True)
class UnitSurfaceIntegrals:
    """Surface integrals of the unit bump; per-component values in ``components``."""

    tau: float
    n: int
    p: float
    q: float
    norm: str
    threshold: float
    mass: float
    curvature_moment: float
    tilt_moment: float
    tilt_superlevel: float
    components: dict = field(default_factory=dict, compare=False)


@lru_cache(maxsize=64)
def _gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def _gl(a: float, b: float, order: int):
    x, w = _gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _arc_nodes(geom: ProfileGeometry, order: int, phi0: float = 0.0):
    """Nodes/weights on one arc band: ``dH^n = n*omega_n * s^(n-1) * R dphi``."""
    phi, w = _gl(phi0, math.pi / 2, order)
    s = geom.plateau_radius + geom.arc_radius * np.sin(phi)
    dA = sphere_area(geom.n) * s ** (geom.n - 1) * geom.arc_radius * w
    return phi, s, dA


def _cylinder_area(geom: ProfileGeometry) -> float:
    return sphere_area(geom.n) * 0.5 ** (geom.n - 1) * (geom.tau / 2)


def _plateau_area(geom: ProfileGeometry) -> float:
    return unit_ball_volume(geom.n) * geom.plateau_radius ** geom.n


def _components_at(geom, p, q, norm, threshold, order):
    n, R = geom.n, geom.arc_radius
    c = tilt_constant(norm)
    phi, s, dA = _arc_nodes(geom, order)
    sin = np.sin(phi)
    H = 1.0 / R + (n - 1) * sin / s
    arc_mass = float(dA.sum())
    arc_curv = float((H ** p * dA).sum())
    arc_tilt = float(((c * sin) ** q * dA).sum())
    if threshold <= 0:
        arc_super = arc_mass
    elif threshold > c:
        arc_super = 0.0
    else:
        phi_t = math.asin(threshold / c)
        arc_super = float(_arc_nodes(geom, order, phi_t)[2].sum())
    cyl = _cylinder_area(geom)
    cyl_H = 2.0 * (n - 1)
    plat = _plateau_area(geom)
    plateau = ComponentIntegrals(plat, 0.0, 0.0, plat if threshold <= 0 else 0.0)
    arc = ComponentIntegrals(arc_mass, arc_curv, arc_tilt, arc_super)
    cylinder = ComponentIntegrals(cyl, cyl_H ** p * cyl, c ** q * cyl,
                                  cyl if c >= threshold else 0.0)
    return {"top_plateau": plateau, "bottom_plateau": plateau,
            "top_arc": arc, "bottom_arc": arc, "cylinder": cylinder}


def _totals(parts):
    return tuple(sum(getattr(parts[k], attr) for k in COMPONENTS)
                 for attr in ("mass", "curvature_moment", "tilt_moment", "tilt_superlevel"))


@lru_cache(maxsize=4096)
def _unit_integrals_cached(tau, n, p, q, norm, threshold, order, rtol):
    geom = ProfileGeometry(tau, n)
    parts = _components_at(geom, p, q, norm, threshold, order)
    fine = _components_at(geom, p, q, norm, threshold, 2 * order)
    coarse_t, fine_t = _totals(parts), _totals(fine)
    for name, a, b in zip(("mass", "curvature_moment", "tilt_moment", "tilt_superlevel"),
                          coarse_t, fine_t):
        if abs(a - b) > rtol * max(abs(b), 1e-300):
            raise QuadratureError(
                f"{name} not converged at order {order}",
                {"quantity": name, "order": order, "coarse": a, "fine": b,
                 "tau": tau, "n": n, "p": p, "q": q},
            )
    mass, curv, tilt, superlevel = fine_t
    return UnitSurfaceIntegrals(tau, n, p, q, norm, threshold, mass, curv, tilt,
                                superlevel, fine)


def unit_integrals(geom: ProfileGeometry, p: float = 1.0, q: float = 1.0,
                   norm: str = "frobenius", threshold: float = 1.0,
                   order: int = DEFAULT_ORDER, rtol: float = 1e-9) -> UnitSurfaceIntegrals:
    """Mass, ``int |H|^p``, ``int |P_S - P_T|^q`` and ``H^n{tilt >= threshold}``.

    Arc integrals use Gauss-Legendre with ``order`` nodes and are accepted only
    if doubling the order changes every total by less than ``rtol`` (relative).
    Results are memoised per parameter tuple.

    Raises
    ------
    QuadratureError
        If the refinement check fails; ``exc.diagnostics`` has both values.
    """
    if p < 1 or q < 1:
        raise DomainError(f"exponents must satisfy p >= 1 and q >= 1, got p={p}, q={q}")
    tilt_constant(norm)
    order = check_int(order, "order", minimum=2)
    return _unit_integrals_cached(geom.tau, geom.n, float(p), float(q), norm,
                                  float(threshold), order, float(rtol))


def component_regions(geom: ProfileGeometry) -> dict:
    """Per component ``(y_min, y_max, r_min, r_max)`` enclosing it (local coordinates).

    ``r`` is the distance from the revolution axis.
    """
    t, s0 = geom.tau, geom.plateau_radius
    return {
        "top_plateau": (t / 2, t / 2, 0.0, s0),
        "bottom_plateau": (-t / 2, -t / 2, 0.0, s0),
        "top_arc": (t / 4, t / 2, s0, 0.5),
        "bottom_arc": (-t / 2, -t / 4, s0, 0.5),
        "cylinder": (-t / 4, t / 4, 0.5, 0.5),
    }


def _abs_pow(x, q):
    return np.abs(x) ** q


def height_moment(geom: ProfileGeometry, q: float, y_center: float, scale: float,
                  order: int = DEFAULT_ORDER) -> float:
    """``int_M |y_center + scale * y|^q dH^n`` over the unit surface ``M``.

    With ``y_center`` the height of a placed copy and ``scale`` its dilation
    factor, multiplying by ``scale**n`` gives that copy's contribution to
    ``int dist(xi, T)^q``.
    """
    if q < 0:
        raise DomainError(f"q must be >= 0, got {q}")
    check_positive(scale, "scale")
    yc, k = float(y_center), float(scale)
    plat = _plateau_area(geom)
    total = plat * (_abs_pow(yc + k * geom.tau / 2, q) + _abs_pow(yc - k * geom.tau / 2, q))
    phi, _, dA = _arc_nodes(geom, order)
    y = geom.arc_radius * (1.0 + np.cos(phi))
    total += float(((_abs_pow(yc + k * y, q) + _abs_pow(yc - k * y, q)) * dA).sum())
    # cylinder: split where the integrand's kink sits, if inside
    lo, hi = -geom.tau / 4, geom.tau / 4
    cuts = [lo, hi]
    y0 = -yc / k
    if lo < y0 < hi:
        cuts = [lo, y0, hi]
    dens = sphere_area(geom.n) * 0.5 ** (geom.n - 1)
    for a, b in zip(cuts[:-1], cuts[1:]):
        yy, ww = _gl(a, b, order)
        total += dens * float((_abs_pow(yc + k * yy, q) * ww).sum())
    return float(total)


@dataclass(frozen=True)
class SurfaceSamples:
    """Structure-of-arrays sample set; rows are ``(y, z_1, ..., z_n)``."""

    positions: np.ndarray
    normals: np.ndarray
    mean_curvature: np.ndarray
    weights: np.ndarray
    component: np.ndarray

    def __len__(self):
        return self.weights.shape[0]

    @property
    def curvature_norm(self) -> np.ndarray:
        return np.linalg.norm(self.mean_curvature, axis=1)

    def tilt(self, norm: str = "frobenius") -> np.ndarray:
        """``|P_S - P_T|`` per sample; ``T`` has normal ``e_0``."""
        sin = np.sqrt(np.clip(1.0 - self.normals[:, 0] ** 2, 0.0, 1.0))
        return tilt_constant(norm) * sin


def _random_directions(rng, count, n):
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _allocate(count, shares):
    shares = np.asarray(shares, dtype=float)
    raw = count * shares / shares.sum()
    alloc = np.maximum(np.floor(raw).astype(int), 1)
    rem = count - alloc.sum()
    order = np.argsort(-(raw - np.floor(raw)), kind="stable")
    i = 0
    while rem > 0:
        alloc[order[i % len(order)]] += 1
        rem -= 1
        i += 1
    while rem < 0:
        j = int(np.argmax(alloc))
        alloc[j] -= 1
        rem += 1
    return alloc


def sample_surface(geom: ProfileGeometry, count: int, seed: int = 0) -> SurfaceSamples:
    """Stratified Monte-Carlo sample of the unit surface.

    Each piece is sampled uniformly (and stratified) in its profile parameter,
    with a uniform random direction for the revolution; the weight of a sample
    is the area Jacobian divided by the sampling density.  Weight sums are thus
    an unbiased area estimate that shares no nodes with :func:`unit_integrals`.
    """
    count = check_int(count, "count", minimum=1)
    if count < len(COMPONENTS):
        count_eff = len(COMPONENTS)
    else:
        count_eff = count
    rng = np.random.default_rng(seed)
    n, tau = geom.n, geom.tau
    R, s0 = geom.arc_radius, geom.plateau_radius
    omega, area_s = unit_ball_volume(n), sphere_area(n)
    # allocation from closed-form upper bounds only
    shares = [omega * 0.5 ** n, omega * 0.5 ** n,
              area_s * 0.5 ** (n - 1) * R * math.pi / 2,
              area_s * 0.5 ** (n - 1) * R * math.pi / 2,
              area_s * 0.5 ** (n - 1) * tau / 2]
    alloc = _allocate(count_eff, shares)
    pos, nor, hv, wts, comp = [], [], [], [], []
    for label, (name, m) in enumerate(zip(COMPONENTS, alloc)):
        u = (np.arange(m) + rng.random(m)) / m
        d = _random_directions(rng, m, n)
        if name.endswith("plateau"):
            sign = 1.0 if name.startswith("top") else -1.0
            s = s0 * u
            y = np.full(m, sign * tau / 2)
            normal = np.zeros((m, n + 1))
            normal[:, 0] = sign
            hn = np.zeros(m)
            w = area_s * s ** (n - 1) * s0 / m
        elif name.endswith("arc"):
            sign = 1.0 if name.startswith("top") else -1.0
            phi = (math.pi / 2) * u
            s = s0 + R * np.sin(phi)
            y = sign * R * (1.0 + np.cos(phi))
            normal = np.empty((m, n + 1))
            normal[:, 0] = sign * np.cos(phi)
            normal[:, 1:] = np.sin(phi)[:, None] * d
            hn = 1.0 / R + (n - 1) * np.sin(phi) / s
            w = area_s * s ** (n - 1) * R * (math.pi / 2) / m
        else:
            s = np.full(m, 0.5)
            y = -tau / 4 + (tau / 2) * u
            normal = np.zeros((m, n + 1))
            normal[:, 1:] = d
            hn = np.full(m, 2.0 * (n - 1))
            w = np.full(m, area_s * 0.5 ** (n - 1) * (tau / 2) / m)
        p = np.empty((m, n + 1))
        p[:, 0] = y
        p[:, 1:] = s[:, None] * d
        pos.append(p)
        nor.append(normal)
        hv.append(-hn[:, None] * normal)
        wts.append(np.broadcast_to(w, (m,)).astype(float))
        comp.append(np.full(m, label))
    return SurfaceSamples(np.concatenate(pos), np.concatenate(nor), np.concatenate(hv),
                          np.concatenate(wts), np.concatenate(comp))
