"""Canonical test varifolds built from deterministic midpoint quadrature.

Every construction attaches an exact :class:`~varifoldkit.varifold.Patch`, so
totals are closed-form while sample-based functionals (first variation,
excess) converge at second order in the mesh width.
"""
from __future__ import annotations

import math

import numpy as np

from ._validation import check_int, check_point, check_positive
from .exceptions import ConfigurationError
from .profile import ProfileGeometry
from .varifold import (
    DiscreteVarifold,
    FlatDiskPatch,
    LebesgueBallPatch,
    PlaneWindowPatch,
    SpherePatch,
)

__all__ = ["sphere_rule", "make_canonical", "make_revolved", "CANONICAL_KINDS"]

CANONICAL_KINDS = ("sphere", "flat_disk", "lebesgue_ball", "plane_window")


def _midpoints(a, b, k):
    h = (b - a) / k
    return a + h * (np.arange(k) + 0.5), h


def sphere_rule(k: int, resolution: int):
    """Midpoint rule on the unit sphere ``S^k`` in ``R^(k+1)``.

    Uses hyperspherical angles with ``resolution`` cells per polar angle and
    ``2 * resolution`` for the azimuth.  The first coordinate is ``cos`` of the
    first polar angle, so ``e_0`` is the pole.

    Returns
    -------
    points : ndarray of shape (N, k + 1)
    weights : ndarray of shape (N,)
        Sum to the area of ``S^k`` up to ``O(resolution**-2)``.
    """
    k = check_int(k, "k", minimum=0)
    resolution = check_int(resolution, "resolution", minimum=1)
    if k == 0:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    az, haz = _midpoints(0.0, 2 * math.pi, 2 * resolution)
    if k == 1:
        return np.column_stack([np.cos(az), np.sin(az)]), np.full(az.size, haz)
    th, hth = _midpoints(0.0, math.pi, resolution)
    grids = np.meshgrid(*([th] * (k - 1) + [az]), indexing="ij")
    angles = [g.ravel() for g in grids]
    N = angles[0].size
    pts = np.empty((N, k + 1))
    sin_prod = np.ones(N)
    jac = np.ones(N)
    for a in range(k - 1):
        pts[:, a] = sin_prod * np.cos(angles[a])
        jac *= np.sin(angles[a]) ** (k - 1 - a)
        sin_prod = sin_prod * np.sin(angles[a])
    pts[:, k - 1] = sin_prod * np.cos(angles[k - 1])
    pts[:, k] = sin_prod * np.sin(angles[k - 1])
    return pts, jac * hth ** (k - 1) * haz


def _hyperplane_projections(N, d):
    P = np.eye(d)
    P[0, 0] = 0.0
    return np.broadcast_to(P, (N, d, d)).copy()


def _disk_rule(n, radius, resolution):
    """Polar midpoint rule on the ``n``-disk (points in ``R^n``)."""
    r, hr = _midpoints(0.0, radius, resolution)
    dirs, dw = sphere_rule(n - 1, resolution)
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = (r[:, None] ** (n - 1) * hr * dw[None, :]).ravel()
    return pts, w


def _sphere(n, radius, center, resolution, p):
    dirs, dw = sphere_rule(n, resolution)
    X = center + radius * dirs
    w = radius ** n * dw
    H = -(n / radius) * dirs
    patch = SpherePatch(0, X.shape[0], n=n, radius=radius, center=center)
    return DiscreteVarifold.from_normals(X, dirs, w, n=n, mean_curvature=H, p=p,
                                         patches=[patch])


def _flat_disk(n, radius, center, resolution, p):
    if p != 1:
        raise ConfigurationError("flat_disk has singular first variation; only p = 1 applies")
    pts, w = _disk_rule(n, radius, resolution)
    d = n + 1
    X = np.zeros((pts.shape[0], d))
    X[:, 1:] = pts
    X += center
    bdirs, bw = sphere_rule(n - 1, resolution)
    bX = np.zeros((bdirs.shape[0], d))
    bX[:, 1:] = radius * bdirs
    bX += center
    bnu = np.zeros_like(bX)
    bnu[:, 1:] = bdirs
    patch = FlatDiskPatch(0, X.shape[0], 0, bX.shape[0], n=n, radius=radius, center=center)
    return DiscreteVarifold(
        X, _hyperplane_projections(X.shape[0], d), w, n=n,
        mean_curvature=np.zeros_like(X), boundary_positions=bX,
        boundary_weights=radius ** (n - 1) * bw, boundary_conormals=bnu, patches=[patch])


def _lebesgue_ball(n, radius, center, resolution, p):
    if p != 1:
        raise ConfigurationError("lebesgue_ball has singular first variation; only p = 1 applies")
    pts, w = _disk_rule(n, radius, resolution)
    X = pts + center
    bdirs, bw = sphere_rule(n - 1, resolution)
    bX = center + radius * bdirs
    patch = LebesgueBallPatch(0, X.shape[0], 0, bX.shape[0], n=n, radius=radius, center=center)
    return DiscreteVarifold(
        X, np.broadcast_to(np.eye(n), (X.shape[0], n, n)).copy(), w, n=n,
        mean_curvature=np.zeros_like(X), boundary_positions=bX,
        boundary_weights=radius ** (n - 1) * bw, boundary_conormals=bdirs, patches=[patch])


def _plane_window(n, half_width, center, resolution, p):
    ax, h = _midpoints(-half_width, half_width, resolution)
    grids = np.meshgrid(*([ax] * n), indexing="ij")
    d = n + 1
    X = np.zeros((grids[0].size, d))
    for a, g in enumerate(grids):
        X[:, a + 1] = g.ravel()
    X += center
    w = np.full(X.shape[0], h ** n)
    patch = PlaneWindowPatch(0, X.shape[0], n=n, half_width=half_width, center=center)
    return DiscreteVarifold(X, _hyperplane_projections(X.shape[0], d), w, n=n,
                            mean_curvature=np.zeros_like(X), p=p, patches=[patch])


def make_canonical(kind: str, params: dict | None = None, **kwargs) -> DiscreteVarifold:
    """Build a canonical varifold.

    Parameters
    ----------
    kind : {"sphere", "flat_disk", "lebesgue_ball", "plane_window"}
    params : dict, optional
        Keys ``n`` (default 2), ``radius`` (default 1; ``half_width`` for the
        plane window), ``center`` (default the origin), ``resolution``
        (default 32) and ``p`` (default 1).  Keyword arguments are merged in.

    Notes
    -----
    ``sphere`` is ``S^n`` in ``R^(n+1)``; ``flat_disk`` the ``n``-disk in
    ``{x_0 = 0}`` with its rim as boundary variation; ``lebesgue_ball`` the
    codimension-zero ball in ``R^n``; ``plane_window`` the square
    ``[-w, w]^n`` in ``T`` with no boundary.
    """
    opts = dict(params or {})
    opts.update(kwargs)
    n = check_int(opts.pop("n", 2), "n", minimum=1)
    resolution = check_int(opts.pop("resolution", 32), "resolution", minimum=1)
    p = float(opts.pop("p", 1.0))
    if kind == "plane_window":
        size = check_positive(opts.pop("half_width", opts.pop("radius", 1.0)), "half_width")
    else:
        size = check_positive(opts.pop("radius", 1.0), "radius")
    d = n if kind == "lebesgue_ball" else n + 1
    center = opts.pop("center", None)
    center = np.zeros(d) if center is None else check_point(center, d, "center")
    if opts:
        raise ConfigurationError(f"unknown parameters for {kind!r}: {sorted(opts)}")
    if kind in ("flat_disk", "lebesgue_ball") and n < 1:
        raise ConfigurationError(f"{kind} needs n >= 1")
    builders = {"sphere": _sphere, "flat_disk": _flat_disk,
                "lebesgue_ball": _lebesgue_ball, "plane_window": _plane_window}
    if kind not in builders:
        raise ConfigurationError(f"unknown canonical kind {kind!r}; expected one of {CANONICAL_KINDS}")
    return builders[kind](n, size, center, resolution, p)


def make_revolved(tau: float, n: int = 2, resolution: int = 32, scale: float = 1.0,
                  center=None, p: float = 1.0) -> DiscreteVarifold:
    """Midpoint-rule samples of the closed revolved surface (unit cell scaled by ``scale``).

    The surface is centred at ``center`` (default the origin, where ``y = 0`` is
    its mid-height) and carries its exact mean curvature.  No patch is
    attached; totals converge to the revolved-profile integrals.
    """
    geom = ProfileGeometry(tau, n)
    resolution = check_int(resolution, "resolution", minimum=2)
    d = n + 1
    center = np.zeros(d) if center is None else check_point(center, d, "center")
    dirs, dw = sphere_rule(n - 1, resolution)
    s0, ra = geom.plateau_radius, geom.arc_radius
    parts = []  # (radius s, height y, normal (ny, ns), |H| sign-carrying curvature, weight in s/arc)
    # plateaus: radial midpoint rule
    s, hs = _midpoints(0.0, s0, resolution)
    for sign in (1.0, -1.0):
        parts.append((s, np.full_like(s, sign * geom.plateau_height),
                      np.full_like(s, sign), np.zeros_like(s), np.zeros_like(s), np.full_like(s, hs)))
    # arcs: angle midpoint rule, phi from 0 (plateau edge) to pi/2 (rim)
    phi, hphi = _midpoints(0.0, math.pi / 2, resolution)
    sa = s0 + ra * np.sin(phi)
    ya = ra * (1 + np.cos(phi))
    Ha = 1.0 / ra + (n - 1) * np.sin(phi) / sa
    for sign in (1.0, -1.0):
        parts.append((sa, sign * ya, sign * np.cos(phi), np.sin(phi), Ha, np.full_like(sa, ra * hphi)))
    # cylinder
    yc, hy = _midpoints(-geom.rim_height, geom.rim_height, resolution)
    parts.append((np.full_like(yc, 0.5), yc, np.zeros_like(yc), np.ones_like(yc),
                  np.full_like(yc, (n - 1) / 0.5), np.full_like(yc, hy)))
    X, nu, H, w = [], [], [], []
    for s_, y_, ny, ns, Hn, dl in parts:
        k = s_.size
        pos = np.zeros((k, dirs.shape[0], d))
        pos[:, :, 0] = y_[:, None]
        pos[:, :, 1:] = s_[:, None, None] * dirs[None]
        nrm = np.zeros_like(pos)
        nrm[:, :, 0] = ny[:, None]
        nrm[:, :, 1:] = ns[:, None, None] * dirs[None]
        X.append(pos.reshape(-1, d))
        nu.append(nrm.reshape(-1, d))
        # outward normal; the surface is mean-convex so H points inward
        H.append((-Hn[:, None, None] * nrm).reshape(-1, d))
        w.append((s_[:, None] ** (n - 1) * dl[:, None] * dw[None, :]).ravel())
    X = np.concatenate(X) * scale + center
    H = np.concatenate(H) / scale
    w = np.concatenate(w) * scale ** n
    return DiscreteVarifold.from_normals(X, np.concatenate(nu), w, n=n, mean_curvature=H, p=p)

