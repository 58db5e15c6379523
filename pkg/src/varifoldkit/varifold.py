"""Discrete rectifiable varifolds and their basic functionals.

A :class:`DiscreteVarifold` is a weighted sample of an ``n``-dimensional
varifold in ``R^(n+m)``: positions, tangent-plane projections, ``H^n``
quadrature weights, optional generalised mean curvature vectors, densities,
and an optional boundary sample carrying the singular part of the first
variation.  Exact descriptors (:class:`Patch` subclasses) may be attached to
index ranges of the samples; region queries use them whenever a patch lies
wholly inside or outside the region, or has a closed form for the overlap.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc

from ._validation import check_int, check_point, check_points, check_positive
from .exceptions import (
    ConfigurationError,
    ContractViolation,
    DegenerateRegionError,
)
from .profile import sphere_area, unit_ball_volume

__all__ = [
    "TangentPlane",
    "Ball",
    "Cube",
    "Patch",
    "SpherePatch",
    "FlatDiskPatch",
    "LebesgueBallPatch",
    "PlaneWindowPatch",
    "VarifoldSample",
    "DiscreteVarifold",
    "plane_distance",
    "mass_in",
    "first_variation",
    "curvature_pairing",
    "curvature_measure",
    "excess",
    "density_ratio",
    "fint_average",
    "FORMAT_NAME",
]

FORMAT_NAME = "varifoldkit.discrete-varifold"
_ORTHO_TOL = 1e-12
_PROJ_TOL = 1e-10


class TangentPlane:
    """An unoriented ``n``-plane in ``R^d`` given by an orthonormal basis.

    Parameters
    ----------
    basis : array-like of shape (n, d)
        Rows spanning the plane.  With ``orthonormalize=True`` (default) the
        rows are orthonormalised first; otherwise they must already be
        orthonormal to within ``1e-12``.
    """

    def __init__(self, basis, orthonormalize=True):
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        if B.shape[0] > B.shape[1]:
            raise ConfigurationError("basis has more rows than the ambient dimension")
        if orthonormalize and B.shape[0] > 0:
            q, r = np.linalg.qr(B.T)
            if np.any(np.abs(np.diag(r)) < 1e-12):
                raise ConfigurationError("basis rows are linearly dependent")
            B = q.T
        if B.shape[0] and np.abs(B @ B.T - np.eye(B.shape[0])).max() > _ORTHO_TOL:
            raise ConfigurationError("basis is not orthonormal to within 1e-12")
        self._basis = B
        self._basis.setflags(write=False)

    @classmethod
    def from_normal(cls, normal) -> "TangentPlane":
        """Hyperplane with the given normal."""
        v = np.asarray(normal, dtype=float).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ConfigurationError("normal must be nonzero")
        v = v / norm
        # complete v to an orthonormal basis; drop the first column
        q, _ = np.linalg.qr(np.column_stack([v, np.eye(v.size)]))
        return cls(q[:, 1:v.size].T, orthonormalize=False)

    @classmethod
    def coordinate(cls, d: int, skip: int = 0) -> "TangentPlane":
        """The coordinate hyperplane ``{x_skip = 0}``; ``skip=0`` is ``T``."""
        return cls(np.delete(np.eye(d), skip, axis=0), orthonormalize=False)

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def dim(self) -> int:
        return self._basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self._basis.shape[1]

    @property
    def projection(self) -> np.ndarray:
        return self._basis.T @ self._basis

    def __repr__(self):
        return f"TangentPlane(dim={self.dim}, ambient_dim={self.ambient_dim})"


def _as_projection(plane) -> np.ndarray:
    if isinstance(plane, TangentPlane):
        return plane.projection
    P = np.asarray(plane, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ConfigurationError("plane must be a TangentPlane or a square projection matrix")
    return P


def _norm_of_symmetric(D: np.ndarray, norm: str) -> np.ndarray:
    if norm == "frobenius":
        return np.sqrt(np.einsum("...ij,...ij->...", D, D))
    if norm == "operator":
        return np.abs(np.linalg.eigvalsh(D)).max(axis=-1)
    raise ConfigurationError(f"unknown norm {norm!r}")


def plane_distance(S, T, norm: str = "frobenius") -> float:
    """``|P_S - P_T|`` in the Frobenius or operator norm."""
    PS, PT = _as_projection(S), _as_projection(T)
    if PS.shape != PT.shape:
        raise ConfigurationError(f"dimension mismatch: {PS.shape} vs {PT.shape}")
    return float(_norm_of_symmetric(PS - PT, norm))


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", check_point(self.center, name="center"))
        object.__setattr__(self, "radius", check_positive(self.radius, "radius"))

    def contains(self, X) -> np.ndarray:
        d2 = ((np.asarray(X) - self.center) ** 2).sum(axis=1)
        return d2 <= self.radius ** 2

    def contains_ball(self, c, r) -> bool:
        return float(np.linalg.norm(np.asarray(c) - self.center)) + r <= self.radius

    def disjoint_from_ball(self, c, r) -> bool:
        return float(np.linalg.norm(np.asarray(c) - self.center)) > self.radius + r


@dataclass(frozen=True)
class Cube:
    """Closed cube ``{y : |y_k - c_k| <= h for all k}``."""

    center: np.ndarray
    half_width: float

    def __post_init__(self):
        object.__setattr__(self, "center", check_point(self.center, name="center"))
        object.__setattr__(self, "half_width", check_positive(self.half_width, "half_width"))

    def contains(self, X) -> np.ndarray:
        return (np.abs(np.asarray(X) - self.center) <= self.half_width).all(axis=1)

    def contains_ball(self, c, r) -> bool:
        return bool((np.abs(np.asarray(c) - self.center) + r <= self.half_width).all())

    def disjoint_from_ball(self, c, r) -> bool:
        return bool((np.abs(np.asarray(c) - self.center) > self.half_width + r).any())


def _region_mask(region, X):
    if region is None:
        return np.ones(X.shape[0], dtype=bool)
    return region.contains(X)


# ---------------------------------------------------------------- patches

class Patch:
    """Exact description of the varifold carried by a range of samples.

    Subclasses set ``kind``, ``n``, ``ambient_dim``, ``mass``, the boundary
    variation ``boundary_mass``, a bounding ball, and a constant ``|H|``
    (``None`` when it is not constant).
    """

    kind = "patch"
    mean_curvature_norm = 0.0
    boundary_mass = 0.0

    def __init__(self, start, stop, bstart=0, bstop=0):
        self.start, self.stop = int(start), int(stop)
        self.bstart, self.bstop = int(bstart), int(bstop)

    # overridden
    def params(self) -> dict:
        raise NotImplementedError

    def mass_in_ball(self, center, radius):
        """Exact ``mu(B(center, radius))`` for this patch, or ``None``."""
        return None

    def curvature_moment(self, p: float) -> float:
        return self.mean_curvature_norm ** p * self.mass

    def variation(self) -> float:
        return self.mean_curvature_norm * self.mass + self.boundary_mass

    def psi(self, p: float) -> float:
        return self.variation() if p == 1 else self.curvature_moment(p)

    def psi_in_ball(self, center, radius, p):
        """Exact ``psi(B(center, radius))`` or ``None``."""
        return None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "start": self.start, "stop": self.stop,
             "boundary_start": self.bstart, "boundary_stop": self.bstop}
        d.update(self.params())
        return d

    @staticmethod
    def from_dict(d: dict) -> "Patch":
        d = dict(d)
        kind = d.pop("kind")
        ranges = (d.pop("start"), d.pop("stop"), d.pop("boundary_start", 0),
                  d.pop("boundary_stop", 0))
        cls = _PATCH_KINDS.get(kind)
        if cls is None:
            raise ConfigurationError(f"unknown patch kind {kind!r}")
        return cls(*ranges, **d)


def _cap_fraction(n: int, theta: float) -> float:
    """``int_0^theta sin^(n-1) / int_0^pi sin^(n-1)`` for ``theta`` in ``[0, pi]``."""
    if theta <= 0:
        return 0.0
    if theta >= math.pi:
        return 1.0
    half = 0.5 * betainc(n / 2, 0.5, math.sin(theta) ** 2)
    return half if theta <= math.pi / 2 else 1.0 - half


class SpherePatch(Patch):
    """Round ``n``-sphere of radius ``radius`` in ``R^(n+1)``."""

    kind = "sphere"

    def __init__(self, start, stop, bstart=0, bstop=0, *, n, radius, center):
        super().__init__(start, stop, bstart, bstop)
        self.n = int(n)
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)
        self.ambient_dim = self.n + 1
        self.mass = sphere_area(self.n + 1) * self.radius ** self.n
        self.mean_curvature_norm = self.n / self.radius

    @property
    def bounding_ball(self):
        return self.center, self.radius

    def params(self):
        return {"n": self.n, "radius": self.radius, "center": self.center.tolist()}

    def contains_point(self, x, tol=1e-9):
        return abs(np.linalg.norm(np.asarray(x) - self.center) - self.radius) <= tol * max(self.radius, 1)

    def mass_in_ball(self, center, radius):
        d = float(np.linalg.norm(np.asarray(center, dtype=float) - self.center))
        r = self.radius
        if d == 0:
            return self.mass if radius >= r else 0.0
        kappa = (r * r + d * d - radius * radius) / (2 * r * d)
        if kappa <= -1:
            return self.mass
        if kappa >= 1:
            return 0.0
        theta = math.acos(kappa)
        return self.mass * _cap_fraction(self.n, theta)

    def psi_in_ball(self, center, radius, p):
        m = self.mass_in_ball(center, radius)
        return self.mean_curvature_norm ** p * m


class FlatDiskPatch(Patch):
    """Flat ``n``-disk in the hyperplane ``{x_0 = center_0}`` of ``R^(n+1)``.

    Its first variation is the boundary measure ``H^(n-1)`` of the rim.
    """

    kind = "flat_disk"

    def __init__(self, start, stop, bstart=0, bstop=0, *, n, radius, center):
        super().__init__(start, stop, bstart, bstop)
        self.n = int(n)
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)
        self.ambient_dim = self.n + 1
        self.mass = unit_ball_volume(self.n) * self.radius ** self.n
        self.boundary_mass = sphere_area(self.n) * self.radius ** (self.n - 1)

    @property
    def bounding_ball(self):
        return self.center, self.radius

    def params(self):
        return {"n": self.n, "radius": self.radius, "center": self.center.tolist()}

    def contains_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return (abs(x[0] - self.center[0]) <= tol
                and np.linalg.norm(x[1:] - self.center[1:]) <= self.radius * (1 + tol))

    def mass_in_ball(self, center, radius):
        c = np.asarray(center, dtype=float)
        dy = c[0] - self.center[0]
        if abs(dy) > radius:
            return 0.0
        rr = math.sqrt(radius * radius - dy * dy)
        dz = float(np.linalg.norm(c[1:] - self.center[1:]))
        if dz + rr <= self.radius:
            return unit_ball_volume(self.n) * rr ** self.n
        if dz + self.radius <= rr:
            return self.mass
        if dz >= rr + self.radius:
            return 0.0
        return None


class LebesgueBallPatch(Patch):
    """``L^n`` restricted to a ball of ``R^n`` (codimension 0)."""

    kind = "lebesgue_ball"

    def __init__(self, start, stop, bstart=0, bstop=0, *, n, radius, center):
        super().__init__(start, stop, bstart, bstop)
        self.n = int(n)
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)
        self.ambient_dim = self.n
        self.mass = unit_ball_volume(self.n) * self.radius ** self.n
        self.boundary_mass = sphere_area(self.n) * self.radius ** (self.n - 1)

    @property
    def bounding_ball(self):
        return self.center, self.radius

    def params(self):
        return {"n": self.n, "radius": self.radius, "center": self.center.tolist()}

    def contains_point(self, x, tol=1e-9):
        return np.linalg.norm(np.asarray(x) - self.center) <= self.radius * (1 + tol)


class PlaneWindowPatch(Patch):
    """Square piece ``[-w, w]^n`` of a hyperplane ``{x_0 = c_0}``.

    Treated as a window onto an unbounded plane: no boundary variation.
    """

    kind = "plane_window"

    def __init__(self, start, stop, bstart=0, bstop=0, *, n, half_width, center):
        super().__init__(start, stop, bstart, bstop)
        self.n = int(n)
        self.half_width = float(half_width)
        self.center = np.asarray(center, dtype=float)
        self.ambient_dim = self.n + 1
        self.mass = (2 * self.half_width) ** self.n

    @property
    def bounding_ball(self):
        return self.center, self.half_width * math.sqrt(self.n)

    def params(self):
        return {"n": self.n, "half_width": self.half_width, "center": self.center.tolist()}

    def contains_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return (abs(x[0] - self.center[0]) <= tol
                and bool((np.abs(x[1:] - self.center[1:]) <= self.half_width * (1 + tol)).all()))

    def mass_in_ball(self, center, radius):
        c = np.asarray(center, dtype=float)
        dy = c[0] - self.center[0]
        if abs(dy) > radius:
            return 0.0
        rr = math.sqrt(radius * radius - dy * dy)
        if bool((np.abs(c[1:] - self.center[1:]) + rr <= self.half_width).all()):
            return unit_ball_volume(self.n) * rr ** self.n
        return None

    def psi_in_ball(self, center, radius, p):
        return 0.0


_PATCH_KINDS = {cls.kind: cls for cls in
                (SpherePatch, FlatDiskPatch, LebesgueBallPatch, PlaneWindowPatch)}


# ------------------------------------------------------------ the varifold

@dataclass(frozen=True)
class VarifoldSample:
    """One weighted sample, as returned by :meth:`DiscreteVarifold.sample`."""

    position: np.ndarray
    plane: TangentPlane
    weight: float
    mean_curvature: np.ndarray | None = None
    density: float = 1.0


def _readonly(a):
    if a is None:
        return None
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


class DiscreteVarifold:
    """Weighted sample of an ``n``-varifold in ``R^(n+m)``.

    Parameters
    ----------
    positions : array of shape (N, d)
    projections : array of shape (N, d, d)
        Orthogonal projections onto the approximate tangent planes.
    weights : array of shape (N,)
        Positive ``H^n`` quadrature weights (multiplicity included).
    n : int
        Dimension of the varifold.
    mean_curvature : array of shape (N, d), optional
        Generalised mean curvature vectors; required when ``p > 1``.
    density : array of shape (N,), optional
        ``theta^n`` at the samples, default 1.
    variation : array of shape (N,), optional
        Absolutely continuous part of ``||delta mu||`` carried by each sample;
        defaults to ``weights * |H|`` when curvature is given.
    boundary_positions, boundary_weights, boundary_conormals : arrays, optional
        Singular part of the first variation: ``(delta mu)(eta)`` picks up
        ``sum w_b eta(x_b) . nu_b``.
    p : float
        Curvature exponent in ``[1, n]`` selecting ``psi``.
    patches : sequence of Patch
        Exact descriptors of sample ranges.
    """

    def __init__(self, positions, projections, weights, *, n, mean_curvature=None,
                 density=None, variation=None, boundary_positions=None,
                 boundary_weights=None, boundary_conormals=None, p=1.0, patches=()):
        X = check_points(positions, name="positions")
        N, d = X.shape
        self.n = check_int(n, "n", minimum=1)
        if self.n > d:
            raise ConfigurationError(f"n={n} exceeds the ambient dimension {d}")
        P = np.asarray(projections, dtype=float)
        if P.shape != (N, d, d):
            raise ConfigurationError(f"projections must have shape {(N, d, d)}, got {P.shape}")
        if N:
            sym = np.abs(P - P.transpose(0, 2, 1)).max()
            idem = np.abs(P @ P - P).max()
            tr = np.abs(np.einsum("kii->k", P) - self.n).max()
            if max(sym, idem, tr) > _PROJ_TOL:
                raise ConfigurationError("projections are not rank-n orthogonal projections")
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape != (N,) or (N and not np.all(w > 0)):
            raise ConfigurationError("weights must be a positive vector of length N")
        self.p = float(p)
        if not 1 <= self.p <= self.n:
            raise ConfigurationError(f"p must lie in [1, n], got {p}")
        H = None if mean_curvature is None else np.asarray(mean_curvature, dtype=float)
        if H is not None and H.shape != (N, d):
            raise ConfigurationError("mean_curvature must have shape (N, d)")
        if self.p > 1 and H is None:
            raise ContractViolation("p > 1 requires a mean curvature vector on every sample")
        dens = np.ones(N) if density is None else np.asarray(density, dtype=float).reshape(-1)
        if dens.shape != (N,) or np.any(dens < 0):
            raise ConfigurationError("density must be a nonnegative vector of length N")
        var = None if variation is None else np.asarray(variation, dtype=float).reshape(-1)
        if var is not None and (var.shape != (N,) or np.any(var < 0)):
            raise ConfigurationError("variation must be a nonnegative vector of length N")
        if boundary_positions is None:
            bX, bw, bnu = np.zeros((0, d)), np.zeros(0), np.zeros((0, d))
        else:
            bX = check_points(boundary_positions, d, "boundary_positions")
            bw = np.asarray(boundary_weights, dtype=float).reshape(-1)
            bnu = np.zeros_like(bX) if boundary_conormals is None else np.asarray(
                boundary_conormals, dtype=float)
            if bw.shape != (bX.shape[0],) or bnu.shape != bX.shape or np.any(bw <= 0):
                raise ConfigurationError("boundary arrays are inconsistent")
        self.positions = _readonly(X)
        self.projections = _readonly(P)
        self.weights = _readonly(w)
        self.mean_curvature = _readonly(H)
        self.density = _readonly(dens)
        self.variation = _readonly(var)
        self.boundary_positions = _readonly(bX)
        self.boundary_weights = _readonly(bw)
        self.boundary_conormals = _readonly(bnu)
        self.patches = tuple(patches)
        covered = np.zeros(N, dtype=bool)
        bcovered = np.zeros(bX.shape[0], dtype=bool)
        for patch in self.patches:
            covered[patch.start:patch.stop] = True
            bcovered[patch.bstart:patch.bstop] = True
        self._loose = ~covered
        self._bloose = ~bcovered

    # ----------------------------------------------------------- builders
    @classmethod
    def from_normals(cls, positions, normals, weights, **kwargs) -> "DiscreteVarifold":
        """Hypersurface samples given unit normals (codimension one)."""
        X = check_points(positions, name="positions")
        nu = check_points(normals, X.shape[1], "normals")
        nu = nu / np.linalg.norm(nu, axis=1, keepdims=True)
        d = X.shape[1]
        P = np.eye(d)[None, :, :] - nu[:, :, None] * nu[:, None, :]
        kwargs.setdefault("n", d - 1)
        return cls(X, P, weights, **kwargs)

    @classmethod
    def from_samples(cls, samples, *, n, p=1.0) -> "DiscreteVarifold":
        samples = list(samples)
        if not samples:
            raise ConfigurationError("at least one sample is required")
        X = np.array([s.position for s in samples], dtype=float)
        P = np.array([s.plane.projection for s in samples])
        w = np.array([s.weight for s in samples], dtype=float)
        H = None
        if all(s.mean_curvature is not None for s in samples):
            H = np.array([s.mean_curvature for s in samples], dtype=float)
        dens = np.array([s.density for s in samples], dtype=float)
        return cls(X, P, w, n=n, mean_curvature=H, density=dens, p=p)

    @classmethod
    def concatenate(cls, parts, p=None) -> "DiscreteVarifold":
        """Union of varifolds with the same ``n`` and ambient dimension."""
        parts = list(parts)
        if not parts:
            raise ConfigurationError("nothing to concatenate")
        n, d = parts[0].n, parts[0].ambient_dim
        if any(v.n != n or v.ambient_dim != d for v in parts):
            raise ConfigurationError("dimension mismatch in concatenate")
        want_H = all(v.mean_curvature is not None for v in parts)
        offset = boffset = 0
        patches = []
        for v in parts:
            for patch in v.patches:
                q = Patch.from_dict(patch.to_dict())
                q.start += offset
                q.stop += offset
                q.bstart += boffset
                q.bstop += boffset
                patches.append(q)
            offset += len(v)
            boffset += v.boundary_weights.shape[0]
        var = None
        if any(v.variation is not None for v in parts):
            var = np.concatenate([v.variation if v.variation is not None else v._abs_variation()
                                  for v in parts])
        return cls(
            np.concatenate([v.positions for v in parts]),
            np.concatenate([v.projections for v in parts]),
            np.concatenate([v.weights for v in parts]),
            n=n,
            mean_curvature=np.concatenate([v.mean_curvature for v in parts]) if want_H else None,
            density=np.concatenate([v.density for v in parts]),
            variation=var,
            boundary_positions=np.concatenate([v.boundary_positions for v in parts]),
            boundary_weights=np.concatenate([v.boundary_weights for v in parts]),
            boundary_conormals=np.concatenate([v.boundary_conormals for v in parts]),
            p=parts[0].p if p is None else p,
            patches=patches,
        )

    # --------------------------------------------------------- properties
    def __len__(self):
        return self.weights.shape[0]

    def __repr__(self):
        return (f"DiscreteVarifold(n={self.n}, ambient_dim={self.ambient_dim}, "
                f"samples={len(self)}, p={self.p})")

    @property
    def ambient_dim(self) -> int:
        return self.positions.shape[1]

    @property
    def m(self) -> int:
        return self.ambient_dim - self.n

    def sample(self, k: int) -> VarifoldSample:
        P = self.projections[k]
        vals, vecs = np.linalg.eigh(P)
        plane = TangentPlane(vecs[:, vals > 0.5].T)
        H = None if self.mean_curvature is None else self.mean_curvature[k].copy()
        return VarifoldSample(self.positions[k].copy(), plane, float(self.weights[k]), H,
                              float(self.density[k]))

    def _abs_variation(self) -> np.ndarray:
        if self.variation is not None:
            return np.asarray(self.variation)
        if self.mean_curvature is None:
            raise ContractViolation("no mean curvature and no variation weights")
        return self.weights * np.linalg.norm(self.mean_curvature, axis=1)

    def _psi_density(self, p: float) -> np.ndarray:
        """Absolutely continuous part of ``psi`` per sample."""
        if p == 1:
            return self._abs_variation()
        if self.mean_curvature is None:
            raise ContractViolation(f"p={p} > 1 needs mean curvature on every sample")
        return self.weights * np.linalg.norm(self.mean_curvature, axis=1) ** p

    def total_mass(self) -> float:
        """``mu(R^d)``, exact on patches."""
        return mass_in(self, None)

    def total_variation(self) -> float:
        """``||delta mu||(R^d)``, exact on patches."""
        return curvature_measure(self, None, p=1)

    def in_support(self, x, tol=None) -> bool:
        """Whether ``x`` lies on the support (exact for patches, nearest sample otherwise)."""
        x = check_point(x, self.ambient_dim, "x")
        for patch in self.patches:
            if patch.contains_point(x):
                return True
        if not len(self):
            return False
        d2 = ((self.positions - x) ** 2).sum(axis=1)
        if tol is None:
            tol = 2.0 * float(np.max(self.weights)) ** (1.0 / self.n)
        return bool(d2.min() <= tol * tol)

    # -------------------------------------------------------- serialisation
    def to_dict(self) -> dict:
        """JSON-ready layout (see ``docs/varifold_format.md``)."""
        has_b = self.boundary_weights.shape[0] > 0
        return {
            "format": FORMAT_NAME,
            "version": 1,
            "n": self.n,
            "m": self.m,
            "p": self.p,
            "positions": self.positions.tolist(),
            "projections": self.projections.tolist(),
            "weights": self.weights.tolist(),
            "mean_curvature": None if self.mean_curvature is None else self.mean_curvature.tolist(),
            "density": self.density.tolist(),
            "variation": None if self.variation is None else self.variation.tolist(),
            "boundary": None if not has_b else {
                "positions": self.boundary_positions.tolist(),
                "weights": self.boundary_weights.tolist(),
                "conormals": self.boundary_conormals.tolist(),
            },
            "patches": [patch.to_dict() for patch in self.patches],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteVarifold":
        if data.get("format") != FORMAT_NAME:
            raise ConfigurationError(f"not a {FORMAT_NAME} document")
        n, m = int(data["n"]), int(data["m"])
        d = n + m
        X = np.asarray(data["positions"], dtype=float).reshape(-1, d)
        P = np.asarray(data["projections"], dtype=float).reshape(-1, d, d)
        b = data.get("boundary") or {}
        return cls(
            X, P, data["weights"], n=n, p=data.get("p", 1.0),
            mean_curvature=data.get("mean_curvature"),
            density=data.get("density"),
            variation=data.get("variation"),
            boundary_positions=np.asarray(b["positions"], dtype=float).reshape(-1, d) if b else None,
            boundary_weights=b.get("weights") if b else None,
            boundary_conormals=np.asarray(b["conormals"], dtype=float).reshape(-1, d) if b else None,
            patches=[Patch.from_dict(pd) for pd in data.get("patches", [])],
        )

    def to_json(self, path=None, indent=None):
        text = json.dumps(self.to_dict(), indent=indent, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")
        return text

    @classmethod
    def from_json(cls, source) -> "DiscreteVarifold":
        if isinstance(source, (str, bytes)) and str(source).lstrip().startswith("{"):
            return cls.from_dict(json.loads(source))
        return cls.from_dict(json.loads(Path(source).read_text(encoding="utf-8")))


# ------------------------------------------------------------ functionals

def _patch_relation(region, patch):
    if region is None:
        return "inside"
    c, r = patch.bounding_ball
    if region.contains_ball(c, r):
        return "inside"
    if region.disjoint_from_ball(c, r):
        return "outside"
    return "partial"


def mass_in(v: DiscreteVarifold, region) -> float:
    """``mu(region)`` for a :class:`Ball`, :class:`Cube` or ``None`` (everything)."""
    total = 0.0
    X, w = v.positions, v.weights
    loose = v._loose
    total += float(w[loose & _region_mask(region, X)].sum()) if region is not None else float(w[loose].sum())
    for patch in v.patches:
        rel = _patch_relation(region, patch)
        if rel == "inside":
            total += patch.mass
        elif rel == "partial":
            exact = patch.mass_in_ball(region.center, region.radius) if isinstance(region, Ball) else None
            if exact is None:
                sl = slice(patch.start, patch.stop)
                exact = float(w[sl][region.contains(X[sl])].sum())
            total += exact
    return total


def curvature_measure(v: DiscreteVarifold, region=None, p=None) -> float:
    """``psi(region)``: ``||delta mu||`` for ``p = 1``, ``|H|^p mu`` for ``p > 1``.

    Raises
    ------
    ContractViolation
        If ``p > 1`` and the samples carry no mean curvature.
    """
    p = v.p if p is None else float(p)
    dens = v._psi_density(p) if len(v) else np.zeros(0)
    X = v.positions
    mask = _region_mask(region, X)
    total = float(dens[v._loose & mask].sum())
    if p == 1:
        bmask = _region_mask(region, v.boundary_positions)
        total += float(v.boundary_weights[v._bloose & bmask].sum())
    for patch in v.patches:
        rel = _patch_relation(region, patch)
        if rel == "inside":
            total += patch.psi(p)
        elif rel == "partial":
            exact = patch.psi_in_ball(region.center, region.radius, p) if isinstance(region, Ball) else None
            if exact is None:
                sl = slice(patch.start, patch.stop)
                exact = float(dens[sl][mask[sl]].sum())
                if p == 1:
                    bsl = slice(patch.bstart, patch.bstop)
                    bm = _region_mask(region, v.boundary_positions[bsl])
                    exact += float(v.boundary_weights[bsl][bm].sum())
            total += exact
    return total


def _split_field(eta, deta):
    if deta is None:
        if isinstance(eta, tuple) and len(eta) == 2:
            return eta
        raise ConfigurationError("pass the test field as (value, derivative) callables")
    return eta, deta


def first_variation(v: DiscreteVarifold, eta: Callable, deta: Callable | None = None) -> float:
    """``(delta mu)(eta) = int tr(P_x D eta(x)) d mu(x)`` by sample quadrature.

    ``eta`` maps an ``(k, d)`` array of points to ``(k, d)`` vectors and
    ``deta`` to ``(k, d, d)`` Jacobians with ``J[k, i, j] = d eta_i / d x_j``.
    The pair may also be passed as a single tuple.
    """
    value, deriv = _split_field(eta, deta)
    J = np.asarray(deriv(v.positions), dtype=float)
    div = np.einsum("kij,kji->k", v.projections, J)
    return float((v.weights * div).sum())


def curvature_pairing(v: DiscreteVarifold, eta: Callable, deta: Callable | None = None) -> float:
    """``-int H . eta d mu + sum_b w_b eta(x_b) . nu_b``.

    Equals :func:`first_variation` when the samples represent the varifold
    exactly; the difference is the integration-by-parts residual.
    """
    value, _ = _split_field(eta, deta)
    total = 0.0
    if len(v):
        if v.mean_curvature is None:
            raise ContractViolation("curvature pairing needs mean curvature vectors")
        E = np.asarray(value(v.positions), dtype=float)
        total -= float((v.weights * (v.mean_curvature * E).sum(axis=1)).sum())
    if v.boundary_weights.shape[0]:
        Eb = np.asarray(value(v.boundary_positions), dtype=float)
        total += float((v.boundary_weights * (v.boundary_conormals * Eb).sum(axis=1)).sum())
    return total


def excess(v: DiscreteVarifold, x, rho: float, plane, q: float = 2.0,
           kind: str = "height", norm: str = "frobenius", region: str = "ball") -> float:
    """Unnormalised height or tilt excess about ``x`` at scale ``rho``.

    ``height``: ``int dist(xi - x, plane)^q``; ``tilt``: ``int |P_xi - P_plane|^q``,
    both over the closed ball (or cube, ``region="cube"``) of radius ``rho``.
    """
    x = check_point(x, v.ambient_dim, "x")
    check_positive(rho, "rho")
    if q < 1:
        raise ConfigurationError(f"q must be >= 1, got {q}")
    reg = Ball(x, rho) if region == "ball" else Cube(x, rho)
    mask = reg.contains(v.positions)
    P = _as_projection(plane)
    if kind == "height":
        diff = v.positions[mask] - x
        perp = diff - diff @ P.T
        vals = np.linalg.norm(perp, axis=1)
    elif kind == "tilt":
        vals = _norm_of_symmetric(v.projections[mask] - P[None], norm)
    else:
        raise ConfigurationError(f"unknown excess kind {kind!r}")
    return float((v.weights[mask] * vals ** q).sum())


def density_ratio(v: DiscreteVarifold, x, rho: float) -> float:
    """``mu(B(x, rho)) / (omega_n rho^n)``."""
    x = check_point(x, v.ambient_dim, "x")
    check_positive(rho, "rho")
    return mass_in(v, Ball(x, rho)) / (unit_ball_volume(v.n) * rho ** v.n)


def fint_average(v: DiscreteVarifold, region, f) -> float:
    """Mass-weighted mean of ``f`` over ``region``.

    ``f`` is an array indexed like the samples or a callable on positions.

    Raises
    ------
    DegenerateRegionError
        If the region carries no sample mass.
    """
    vals = f(v.positions) if callable(f) else f
    vals = np.asarray(vals, dtype=float).reshape(-1)
    if vals.shape[0] != len(v):
        raise ConfigurationError("f must have one value per sample")
    mask = _region_mask(region, v.positions)
    mass = float(v.weights[mask].sum())
    if not mass > 0 or not math.isfinite(mass):
        raise DegenerateRegionError("region has zero mass")
    return float((v.weights[mask] * vals[mask]).sum()) / mass
