"""Scaling profiles, slope fits, excess-set scans and the dichotomy ratio."""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from varifoldkit import (
    ConfigurationError,
    Cube,
    ExampleConfig,
    LogDomainError,
    MarginError,
    PowerLawFit,
    ProfileRow,
    QuantityKind,
    ScalingAnalyzer,
    TruncationError,
    build_example,
    dichotomy_ratio,
    dyadic_profile,
    excess_set_scan,
    fit_slope,
    level_ratios,
    make_canonical,
    predicted_exponent,
    predicted_level_ratio,
    sample_cloud,
)

KINDS = [QuantityKind("mass"), QuantityKind("height"), QuantityKind("tilt"),
         QuantityKind("tilt", norm="operator"), QuantityKind("curvature"),
         QuantityKind("weighted", s=6), QuantityKind("weighted_power", s=6, r=1.5)]


@pytest.fixture(scope="module")
def ex():
    return build_example(ExampleConfig(max_level=18))


# ------------------------------------------------------------ slope fits

def test_fit_exact_power_law():
    r = [2.0 ** -i for i in range(2, 9)]
    est = PowerLawFit().fit(r, [x ** 5 for x in r])
    assert est.slope_ == pytest.approx(5.0, abs=1e-12)
    assert est.residual_ == pytest.approx(0.0, abs=1e-9)
    assert est.predict([0.5])[0] == pytest.approx(0.5 ** 5)
    assert PowerLawFit().fit(r, np.full(7, 3.0)).slope_ == pytest.approx(0.0, abs=1e-12)
    assert clone(est).get_params() == {}


def test_fit_rejects_nonpositive():
    with pytest.raises(LogDomainError):
        PowerLawFit().fit([0.5, 0.25, 0.125], [1.0, 0.0, 1.0])
    with pytest.raises(ConfigurationError):
        PowerLawFit().fit([0.5, 0.25], [1.0, 2.0])


@settings(max_examples=200, deadline=None)
@given(wobble=st.lists(st.floats(0.0, 1.0), min_size=3, max_size=12))
def test_bracket_wobble_perturbation_bound(wobble):
    """A factor-2 per-level gap moves the slope by at most 2 / (i_max - i_min)."""
    i = np.arange(len(wobble))
    rows = [ProfileRow(int(k), 2.0 ** -k, 2.0 ** (-5 * k), 2.0 ** (-5 * k + w))
            for k, w in zip(i, wobble)]
    fit = fit_slope(rows)
    assert abs(fit.slope_upper - fit.slope_lower) <= 2.0 / (len(wobble) - 1) + 1e-12


def test_single_over_span_bound_can_fail():
    """The tighter 1/(i_max - i_min) bound is exceeded by a step wobble."""
    rows = [ProfileRow(k, 2.0 ** -k, 2.0 ** (-5 * k), 2.0 ** (-5 * k + (k > 5)))
            for k in range(2, 9)]
    fit = fit_slope(rows)
    assert abs(fit.slope_upper - fit.slope_lower) > 1 / 6


# ----------------------------------------------------------- profiles

def test_predicted_exponents(ex):
    expected = [5, 8, 5, 5, 2.5, 6, 6.5]
    for kind, e in zip(KINDS, expected):
        assert predicted_exponent(kind, ex) == pytest.approx(e)


@pytest.mark.parametrize("geometry", ["cube", "ball"])
def test_brackets_ordered_and_nested(ex, geometry):
    for kind in KINDS:
        rows = dyadic_profile(ex, kind, 2, 8, geometry=geometry)
        for row in rows:
            assert 0 < row.lower <= row.upper
        # smaller windows are nested inside larger ones
        assert all(a.lower >= b.lower and a.upper >= b.upper for a, b in zip(rows, rows[1:]))
        fit = fit_slope(rows)
        assert abs(fit.slope_upper - fit.slope_lower) <= 2.0 / 6


def test_mass_upper_ratio_tends_to_closed_form(ex):
    rows = dyadic_profile(ex, QuantityKind("mass"), 2, 8)
    ratios = [b.upper / a.upper for a, b in zip(rows, rows[1:])]
    assert ratios[-1] == pytest.approx(2.0 ** -5, rel=1e-6)


def test_weighted_bracket_contains_power(ex):
    s = 6
    rows = dyadic_profile(ex, QuantityKind("weighted", s=s), 2, 8)
    lo = [r.lower * 2.0 ** (r.i * s) for r in rows]
    hi = [r.upper * 2.0 ** (r.i * s) for r in rows]
    # one constant c with c 2^(-i s) inside every bracket
    assert max(lo) <= min(hi)


def test_level_ratio_closed_forms(ex):
    for name, kind in [("mass", QuantityKind("mass")), ("curvature", QuantityKind("curvature")),
                       ("weighted", QuantityKind("weighted", s=6)),
                       ("weighted_power", QuantityKind("weighted_power", s=6, r=1.5))]:
        ratios = level_ratios(ex, kind)
        assert np.allclose(ratios, predicted_level_ratio(kind, ex), rtol=1e-9, atol=0), name


def test_truncation_errors(ex):
    with pytest.raises(TruncationError):
        dyadic_profile(build_example(ExampleConfig(max_level=6)), QuantityKind("mass"), 2, 8)
    with pytest.raises(TruncationError):
        dyadic_profile(build_example(ExampleConfig(max_level=9)), QuantityKind("mass"), 2, 8,
                       tail_threshold=1e-12)


def test_scaling_analyzer(ex):
    est = ScalingAnalyzer(kind="mass").fit(ex)
    assert est.passed_
    assert est.slope_ == pytest.approx(5.0, abs=0.05)
    with pytest.raises(ConfigurationError):
        ScalingAnalyzer().fit(np.zeros(3))


# ---------------------------------------------------------- excess scans

def test_probes_on_T_are_in_every_B_i(ex):
    probes = [[0, 0, 0], [0, 0.25, -0.125]]
    scan = excess_set_scan(ex, probes, [2, 4, 8])
    assert scan.all_in() and scan.nested()


def test_plateau_center_leaves_B_i_for_large_i(ex):
    x = ex.plateau_center(3, [1, 2], top=True)
    scan = excess_set_scan(ex, [x], [2, 8, 2048, 4096], k_max=14)
    row = scan.membership[0]
    assert row[-1] is False and row[-2] is False
    assert scan.nested()


def test_flat_plane_is_in_no_B_i():
    v = make_canonical("plane_window", n=2, half_width=1.0, resolution=16)
    scan = excess_set_scan(v, [[0, 0, 0], [0, 0.3, -0.2]], [2, 4, 8], domain=Cube([0, 0, 0], 1.0))
    assert scan.none_in()


def test_sphere_membership_is_nested():
    v = make_canonical("sphere", n=2, radius=0.4, resolution=16)
    probes = [[0.4, 0, 0], [0, 0.4, 0]]
    scan = excess_set_scan(v, probes, [1, 2, 4, 8, 16, 64], domain=Cube([0, 0, 0], 2.0))
    assert scan.nested()


def test_margin_error(ex):
    with pytest.raises(MarginError):
        excess_set_scan(ex, [[0, 0.9, 0]], [2])


def test_D_mode_on_sample_cloud(ex):
    shallow = build_example(ExampleConfig(max_level=3))
    cloud = sample_cloud(shallow, levels=range(3), per_cell=8, seed=0)
    f = cloud.positions[:, 0]
    scan = excess_set_scan(cloud, list(range(0, len(cloud), 97)), [1, 2], mode="D", a=0,
                           f=f, epsilon=1e-3)
    assert scan.nested()
    assert set(scan.decay["ratios"]) == {"1", "2"}
    with pytest.raises(ConfigurationError):
        excess_set_scan(ex, [[0, 0, 0]], [2], mode="D")


# ------------------------------------------------------------ dichotomy

@pytest.fixture(scope="module")
def sharp():
    return build_example(ExampleConfig(alpha1=Fraction(3, 4), alpha2=Fraction(3, 4), max_level=18))


def test_dichotomy_threshold_regime(sharp):
    res = dichotomy_ratio(sharp, 2.125)
    assert res.verdict == "bounded-positive" == res.predicted_verdict
    L, U = res.bracket
    assert 0 < L <= U and U / L <= 10


@pytest.mark.parametrize("shift,verdict", [(0.25, "tends to infinity"), (-0.25, "tends to 0")])
def test_dichotomy_off_threshold(sharp, shift, verdict):
    res = dichotomy_ratio(sharp, 2.125 + shift)
    assert res.verdict == verdict == res.predicted_verdict


def test_dichotomy_configuration_errors(sharp):
    with pytest.raises(ConfigurationError):
        dichotomy_ratio(sharp, 2.125, nu="weighted")
    with pytest.raises(ConfigurationError):
        dichotomy_ratio(sharp, 2.125, a=[0.1, 0, 0])
    with pytest.raises(ConfigurationError):
        dichotomy_ratio(sharp, 2.125, nu="weighted", s=5, r=2)


def test_dichotomy_weighted_regime(ex):
    # r = 2, s = n q = 4 > n + (1 - 1/r) kappa = 3.5
    res = dichotomy_ratio(ex, 2.0, nu="weighted", s=4, r=2)
    assert res.verdict == "bounded-positive" == res.predicted_verdict
