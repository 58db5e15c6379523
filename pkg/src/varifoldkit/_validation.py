"""Input validation helpers."""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Integral, Rational, Real

import numpy as np
from sklearn.utils import check_array

from .exceptions import ConfigurationError, DomainError


def as_fraction(value, name="value"):
    """Convert ``value`` to an exact :class:`~fractions.Fraction`.

    Floats go through their shortest decimal repr, so ``0.75`` becomes ``3/4``
    and ``0.1`` becomes ``1/10`` rather than the binary expansion.
    """
    if isinstance(value, bool):
        raise ConfigurationError(f"{name} must be numeric, got bool")
    if isinstance(value, (Fraction, Integral)):
        return Fraction(value)
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as exc:
            raise ConfigurationError(f"{name}: cannot parse {value!r}") from exc
    if isinstance(value, Real):
        x = float(value)
        if not math.isfinite(x):
            raise ConfigurationError(f"{name} must be finite, got {x}")
        return Fraction(repr(x))
    raise ConfigurationError(f"{name} must be numeric, got {type(value).__name__}")


def is_dyadic(value: Fraction) -> bool:
    den = value.denominator
    return den & (den - 1) == 0


def check_dyadic(value, name="value"):
    frac = as_fraction(value, name)
    if not is_dyadic(frac):
        raise ConfigurationError(f"{name}={frac} is not a dyadic rational p*2**-q")
    return frac


def check_positive(value, name="value", strict=True):
    x = float(value)
    if not math.isfinite(x) or (x <= 0 if strict else x < 0):
        bound = "> 0" if strict else ">= 0"
        raise DomainError(f"{name} must be finite and {bound}, got {value!r}")
    return x


def check_int(value, name="value", minimum=None):
    if isinstance(value, bool) or not isinstance(value, (Integral, np.integer)):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_points(X, dim=None, name="points"):
    """Return ``X`` as a C-contiguous float64 array of shape ``(k, dim)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=0,
                    input_name=name)
    if dim is not None and X.shape[1] != dim:
        raise ConfigurationError(f"{name} must have {dim} columns, got {X.shape[1]}")
    return np.ascontiguousarray(X)


def check_point(x, dim=None, name="point"):
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ConfigurationError(f"{name} must be finite")
    if dim is not None and x.shape[0] != dim:
        raise ConfigurationError(f"{name} must have length {dim}, got {x.shape[0]}")
    return x
