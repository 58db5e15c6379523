"""Isoperimetric quotients, good-point and density lower-bound checks."""
import math

import numpy as np
import pytest

from varifoldkit import (
    DiscreteVarifold,
    ExampleConfig,
    SupportError,
    build_example,
    density_lower_bound_check,
    good_point_check,
    iso_quotient,
    iso_quotient_mc,
    iso_quotient_profile,
    lebesgue_quotient,
    make_canonical,
    profile_sweep,
    unit_ball_volume,
)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lebesgue_ball_quotient(n):
    # mass omega_n, variation n omega_n: quotient omega_n / (omega_n^(1/n) n omega_n)
    ref = unit_ball_volume(n) ** (-1 / n) / n
    assert lebesgue_quotient(n) == pytest.approx(ref, rel=1e-15)
    for radius in (1.0, 0.3):
        res = iso_quotient(make_canonical("lebesgue_ball", n=n, radius=radius, resolution=8))
        assert abs(res.quotient - ref) <= 1e-9
        assert res.satisfies(ref * (1 + 1e-12))


def test_sphere_quotient_and_dilation():
    q1 = iso_quotient(make_canonical("sphere", n=2, radius=1.0)).quotient
    assert abs(q1 - 1 / (2 * math.sqrt(4 * math.pi))) <= 1e-6
    for lam in (0.1, 7.0, 123.0):
        q = iso_quotient(make_canonical("sphere", n=2, radius=lam)).quotient
        assert abs(q - q1) <= 1e-10


def test_profile_quotient_against_monte_carlo():
    qq = iso_quotient_profile(0.25).quotient
    qm = iso_quotient_mc(0.25, count=200_000, seed=4).quotient
    assert qm == pytest.approx(qq, rel=1e-2)


def test_profile_sweep_summary():
    rows, summ = profile_sweep([0.1, 0.5, 1.0])
    assert [r.tau for r in rows] == [0.1, 0.5, 1.0]
    assert summ["max_quotient"] == max(r.quotient for r in rows)
    assert rows[-1].running_max == summ["max_quotient"]
    assert summ["lebesgue_quotient"] == lebesgue_quotient(2)


def test_good_point_on_plane():
    v = make_canonical("plane_window", n=2, half_width=1.0, resolution=16)
    rec = good_point_check(v, [0, 0, 0], 0.5)
    assert all(rec.hypothesis) and rec.holds and rec.first_failure is None
    # mu(B_r) = pi r^2 against (2 n gamma)^-n r^n with gamma = pi^(-1/2)/2
    assert rec.margin[0] == pytest.approx(4.0, rel=1e-12)


def test_good_point_sphere_large_gamma_fails_at_large_radius():
    v = make_canonical("sphere", n=2, radius=1.0)
    rec = good_point_check(v, [1, 0, 0], 1.0, gamma=2.0, levels=12)
    assert rec.first_failure is not None
    # valid chain is an initial segment of radii
    k = rec.valid.index(False)
    assert all(rec.valid[:k]) and not any(rec.valid[k:])
    assert rec.holds


def test_good_point_support_error():
    v = make_canonical("plane_window", n=2, half_width=1.0, resolution=16)
    with pytest.raises(SupportError):
        good_point_check(v, [0.5, 0, 0], 0.1)


def test_example_good_point_and_density():
    ex = build_example(ExampleConfig(max_level=10))
    x = ex.plateau_center(3, [1, 2], top=True)
    rec = good_point_check(ex, x, 2.0 ** -8, levels=6)
    assert rec.holds
    # at 0.05 the local variation bound fails; at 2^-6 both hypotheses hold
    d = density_lower_bound_check(ex, [0, 0, 0], 0.05, epsilon=0.5, delta=0.5, levels=6)
    assert d.verdict == "hypotheses not established" and not d.details["local"]
    d = density_lower_bound_check(ex, [0, 0, 0], 2.0 ** -6, epsilon=0.5, delta=0.5, levels=6)
    assert d.verdict == "conclusion holds" and d.mass >= d.target


def test_density_lower_bound_verdicts():
    plane = make_canonical("plane_window", n=2, half_width=1.0, resolution=16)
    assert density_lower_bound_check(plane, [0, 0, 0], 0.2, epsilon=0.1, delta=0.01).verdict \
        == "conclusion holds"
    sphere = make_canonical("sphere", n=2, radius=1.0)
    assert density_lower_bound_check(sphere, [1, 0, 0], 0.01, epsilon=1.0, delta=0.01).verdict \
        == "conclusion holds"
    off = density_lower_bound_check(plane, [0.5, 0, 0], 0.2, epsilon=0.1, delta=0.01)
    assert off.verdict == "hypotheses not established"


def test_density_mass_excludes_low_density_samples():
    v = make_canonical("sphere", n=2, radius=1.0, resolution=8)
    dens = np.full(len(v), 0.5)
    w = DiscreteVarifold(v.positions, v.projections, v.weights, n=2,
                         mean_curvature=v.mean_curvature, density=dens)
    res = iso_quotient(w)
    assert res.density_mass == pytest.approx(0.0, abs=1e-12)
