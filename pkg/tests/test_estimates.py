"""Decay-rate fits, scaling windows, and the operator-constant studies."""

import math

import numpy as np
import pytest

from fracks.besov import derived_exponents
from fracks.duhamel import History, TimeMesh
from fracks.errors import (HypothesisError, InsufficientRangeError,
                           ParameterError, SeriesRangeError)
from fracks.estimates import (DecaySpec, RatioReport, bilinear_constant_study,
                              critical_degree, decay_fit_heat, decay_fit_ml,
                              linear_operator_study, log_times,
                              operator_B_study, paired_ensemble,
                              power_law_data, seeded_ensemble)
from fracks.specfun import MLParams, ml_eval
from fracks.spectral import Grid, ModelParams, SpectralField, ml_operator
from fracks.wellposed import DEFAULT_CONSTANTS

GRID512 = Grid(1, 512, math.pi)
GRID256 = Grid(1, 256, math.pi)
PARAMS = ModelParams(alpha=0.8, theta=1.1, theta1=0.5, gamma=0.5)
MESH16 = TimeMesh.graded(1.0, 16, 2.5)
TIMES = log_times(1.0e-5, 3.0, 90)
CRIT_DEG_ETA = critical_degree(-0.2, 2.0, 1)
CRIT_DEG_V = critical_degree(0.9, 2.0, 1)


def flat_spec(**kw):
    args = dict(zeta=0.0, theta=1.1, alpha=0.8, s1=0.0, s2=0.0,
                p1=2.0, p2=2.0, times=TIMES)
    args.update(kw)
    return DecaySpec(**args)


def single_mode(grid, k, amp=1.0):
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[k] = 0.5 * amp
    coeffs[-k] = 0.5 * amp
    return SpectralField(grid, coeffs)


def zero_field(grid):
    return SpectralField(grid, np.zeros(grid.shape, dtype=complex))


def constant_history(grid, mesh, f):
    hist = History(grid, mesh)
    for _ in mesh.nodes:
        hist.append(f)
    return hist


# ---------------------------------------------------------------------------
# DecaySpec arithmetic and validation.

@pytest.mark.parametrize("bad", [
    dict(zeta=-0.1),
    dict(theta=0.0),
    dict(alpha=0.0),
    dict(alpha=1.2),
    dict(s1=0.5, s2=0.0),
    dict(p1=0.5),
    dict(p1=3.0, p2=2.0),
    dict(times=(0.1, 0.2, 0.3)),
    dict(times=(0.0, 0.1, 0.2, 0.3)),
    dict(times=(0.1, 0.3, 0.2, 0.4)),
])
def test_decay_spec_rejects_bad_fields(bad):
    with pytest.raises(ParameterError):
        flat_spec(**bad)


@pytest.mark.parametrize("kw, n, expected", [
    (dict(), 1, 0.0),
    (dict(zeta=1.1), 1, 1.0),
    (dict(theta=1.5, s2=0.5), 1, 1.0 / 3.0),
    (dict(theta=1.0, p1=1.0, p2=2.0), 1, 0.5),
    (dict(zeta=0.5, theta=1.3, s1=-0.2, s2=0.4), 1, 1.1 / 1.3),
])
def test_heat_exponent_examples(kw, n, expected):
    assert flat_spec(**kw).heat_exponent(n) == pytest.approx(expected)


def test_ml_exponent_scales_by_alpha():
    spec = flat_spec(zeta=1.1, alpha=0.8)
    assert spec.ml_exponent(1) == pytest.approx(0.8 * spec.heat_exponent(1))


def test_family_windows():
    edge = flat_spec(zeta=1.1)                 # exponent exactly 1
    with pytest.raises(HypothesisError) as info:
        edge.check_family(1, "E_alpha")
    assert "< 1" in info.value.inequality
    edge.check_family(1, "E_alpha_alpha")      # still inside the < 2 window
    with pytest.raises(HypothesisError) as info:
        flat_spec(zeta=2.2).check_family(1, "E_alpha_alpha")
    assert "< 2" in info.value.inequality


def test_ratio_report_rel_dev():
    rep = RatioReport.build(0.9, 1.0, 5, "1d-n64")
    assert rep.rel_dev == pytest.approx(0.1)
    flat = RatioReport.build(0.02, 0.0, 1, "1d-n64")
    assert flat.rel_dev == pytest.approx(0.02)


def test_log_times_validation():
    t = log_times(0.1, 10.0, 5)
    assert t[0] == pytest.approx(0.1) and t[-1] == pytest.approx(10.0)
    with pytest.raises(ParameterError):
        log_times(1.0, 0.5)


# ---------------------------------------------------------------------------
# Data builders.

@pytest.mark.parametrize("s, p, expected", [
    (0.0, 2.0, -0.5),
    (-0.2, 2.0, -0.3),
    (0.9, 2.0, -1.4),
])
def test_critical_degree_reference_values(s, p, expected):
    assert critical_degree(s, p, 1) == pytest.approx(expected)


def test_power_law_data_is_clean():
    f = power_law_data(GRID256, -0.5)
    assert f.is_real()
    assert f.mean() == 0.0
    assert f.coeffs[GRID256.nyquist] == 0.0


def test_power_law_data_band_respected():
    f = power_law_data(GRID256, -0.5, band=(2.0, 8.0))
    r = GRID256.xi_norm()
    outside = (r < 2.0) | (r > 8.0)
    assert np.all(f.coeffs[outside] == 0.0)
    inside = (r >= 2.0) & (r <= 8.0) & (np.abs(GRID256.axis_wavenumbers()) != GRID256.nyquist)
    assert np.all(np.abs(f.coeffs[inside]) > 0.0)


def test_power_law_data_bad_band():
    with pytest.raises(ParameterError):
        power_law_data(GRID256, -0.5, band=(3.0, 2.0))


def test_seeded_ensemble_is_deterministic_and_real():
    a = [f.coeffs.copy() for f in seeded_ensemble(GRID256, 3, 42)]
    b = [f.coeffs.copy() for f in seeded_ensemble(GRID256, 3, 42)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    f = next(seeded_ensemble(GRID256, 1, 42))
    assert f.is_real() and f.mean() == 0.0


def test_seeded_ensemble_validation():
    with pytest.raises(ParameterError):
        list(seeded_ensemble(GRID256, 0, 1))
    with pytest.raises(ParameterError):
        list(seeded_ensemble(GRID256, 1, 1, band=(5.0, 2.0)))


# ---------------------------------------------------------------------------
# Heat-flow decay fits.  All data sits at the critical degree of the
# source norm so the leading shell marches down the band.

def test_heat_flat_spec_has_zero_slope():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    rep = decay_fit_heat(f, flat_spec(times=log_times(5.0e-4, 0.1, 60)))
    assert rep.predicted == 0.0
    assert rep.rel_dev <= 0.05


def test_heat_slope_minus_one():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    rep = decay_fit_heat(f, flat_spec(zeta=1.1))
    assert rep.predicted == pytest.approx(-1.0)
    assert rep.rel_dev <= 0.05


def test_heat_slope_minus_third():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    rep = decay_fit_heat(f, flat_spec(theta=1.5, s2=0.5))
    assert rep.predicted == pytest.approx(-1.0 / 3.0)
    assert rep.rel_dev <= 0.05


def test_heat_slope_with_offset_exponents():
    f = power_law_data(GRID512, CRIT_DEG_ETA)
    rep = decay_fit_heat(f, flat_spec(zeta=0.5, theta=1.3, s1=-0.2, s2=0.4))
    assert rep.predicted == pytest.approx(-1.1 / 1.3)
    assert rep.rel_dev <= 0.05


def test_zero_field_has_no_rate():
    with pytest.raises(ParameterError):
        decay_fit_heat(zero_field(GRID512), flat_spec(zeta=1.1))


def test_insufficient_range_reported():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    with pytest.raises(InsufficientRangeError):
        decay_fit_heat(f, flat_spec(zeta=1.1, times=log_times(0.02, 0.05, 8)))


# ---------------------------------------------------------------------------
# Mittag-Leffler decay fits.

def test_ml_alpha_one_matches_heat():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    spec = flat_spec(theta=1.5, s2=0.5, alpha=1.0)
    heat = decay_fit_heat(f, spec)
    ml = decay_fit_ml(f, spec)
    assert abs(ml.measured - heat.measured) <= 0.01


def test_ml_slope_scales_with_alpha():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    rep = decay_fit_ml(f, flat_spec(theta=1.5, s2=0.5, alpha=0.8))
    assert rep.predicted == pytest.approx(-0.8 / 3.0)
    assert rep.rel_dev <= 0.05


def test_ml_second_family_slope():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    spec = flat_spec(zeta=1.5, theta=1.5, alpha=0.5,
                     times=log_times(1.0e-5, 30.0, 90))
    rep = decay_fit_ml(f, spec, family="E_alpha_alpha")
    assert rep.predicted == pytest.approx(-0.5)
    assert rep.rel_dev <= 0.05


def test_ml_hypothesis_violation_refused():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    with pytest.raises(HypothesisError):
        decay_fit_ml(f, flat_spec(zeta=1.1), family="E_alpha")


def test_ml_unknown_family_refused():
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    with pytest.raises(ParameterError):
        decay_fit_ml(f, flat_spec(zeta=0.5), family="E_beta")


def test_damped_shift_keeps_the_rate():
    # gamma well below every multiplier on this band barely perturbs the fit
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    rep = decay_fit_ml(f, flat_spec(theta=1.5, s2=0.5, alpha=0.8),
                       gamma=0.01, gamma_sign="damped")
    assert rep.rel_dev <= 0.05


def test_literal_shift_range_guard():
    # modes below gamma^(1/theta) grow under the sign-literal variant and
    # push the kernel series out of range at large times
    grid = Grid(1, 1024, 64.0 * math.pi)
    f = power_law_data(grid, critical_degree(0.0, 2.0, 1))
    spec = flat_spec(theta=1.5, s2=0.5, alpha=0.8, times=log_times(1.0, 1.0e5, 40))
    with pytest.raises(SeriesRangeError):
        decay_fit_ml(f, spec, gamma=0.1, gamma_sign="paper")


@pytest.mark.parametrize("t", [1.0e-3, 0.1, 1.0, 10.0])
def test_single_mode_collapses_onto_scalar_profile(t):
    grid = Grid(1, 64, math.pi)
    mode = single_mode(grid, 5)
    params = ModelParams(alpha=0.7, theta=1.4)
    from fracks.besov import BesovParams, besov_norm, build_cutoff
    bp = BesovParams(0.3, 2.0, math.inf)
    cut = build_cutoff(grid)
    measured = besov_norm(ml_operator(mode, t, params), bp, cut) / besov_norm(mode, bp, cut)
    oracle = ml_eval(MLParams(0.7, 1.0), t**0.7 * 5.0**1.4).value
    assert measured == pytest.approx(oracle, abs=1.0e-12)


def test_decay_plot_is_deterministic(tmp_path):
    f = power_law_data(GRID512, critical_degree(0.0, 2.0, 1))
    paths = [tmp_path / "a.svg", tmp_path / "b.svg"]
    for p in paths:
        decay_fit_heat(f, flat_spec(zeta=1.1), plot_path=p)
    blobs = [p.read_bytes() for p in paths]
    assert blobs[0].startswith(b"<?xml")
    assert b"<svg" in blobs[0]
    assert blobs[0] == blobs[1]


# ---------------------------------------------------------------------------
# Bilinear constant study.

def test_bilinear_reference_value():
    rep = bilinear_constant_study(
        paired_ensemble(GRID256, 10, 20260823,
                        degree_eta=CRIT_DEG_ETA, degree_v=CRIT_DEG_V),
        PARAMS, MESH16, T_values=[1.0, 2.0])
    assert rep.ensemble == 10
    assert rep.measured == pytest.approx(0.454432, abs=2.0e-3)
    assert rep.measured < rep.predicted == DEFAULT_CONSTANTS.k_b


def test_bilinear_skips_degenerate_pairs():
    good = next(paired_ensemble(GRID256, 1, 3,
                                degree_eta=CRIT_DEG_ETA, degree_v=CRIT_DEG_V))
    pairs = [(zero_field(GRID256), zero_field(GRID256)), good]
    rep = bilinear_constant_study(iter(pairs), PARAMS, MESH16, T_values=[1.0])
    assert rep.ensemble == 1


def test_bilinear_all_degenerate_raises():
    pairs = [(zero_field(GRID256), zero_field(GRID256))]
    with pytest.raises(ParameterError):
        bilinear_constant_study(iter(pairs), PARAMS, MESH16, T_values=[1.0])


def test_bilinear_needs_horizons():
    with pytest.raises(ParameterError):
        bilinear_constant_study(iter([]), PARAMS, MESH16, T_values=[])
    pair = next(paired_ensemble(GRID256, 1, 3))
    with pytest.raises(ParameterError):
        bilinear_constant_study(iter([pair]), PARAMS, MESH16, T_values=[-1.0])


def test_bilinear_rejects_inadmissible_indices():
    bad = ModelParams(alpha=0.8, theta=1.3, theta1=0.5, gamma=0.5)
    pair = next(paired_ensemble(GRID256, 1, 3))
    with pytest.raises(HypothesisError):
        bilinear_constant_study(iter([pair]), bad, MESH16, T_values=[1.0])


def test_bilinear_horizon_stability():
    # the bound claims a constant independent of the horizon
    pair = next(paired_ensemble(GRID256, 1, 7,
                                degree_eta=CRIT_DEG_ETA, degree_v=CRIT_DEG_V))
    vals = [
        bilinear_constant_study(iter([pair]), PARAMS, MESH16, T_values=[T]).measured
        for T in (0.5, 1.0, 2.0, 4.0)
    ]
    assert vals[0] == pytest.approx(0.501664, abs=2.0e-3)
    assert (max(vals) - min(vals)) / max(vals) <= 0.15


def test_bilinear_grid_refinement_stability():
    vals = []
    for n_points in (128, 256):
        rep = bilinear_constant_study(
            paired_ensemble(Grid(1, n_points, math.pi), 20, 99,
                            degree_eta=CRIT_DEG_ETA, degree_v=CRIT_DEG_V,
                            band=(2.0, 32.0)),
            PARAMS, MESH16, T_values=[1.0, 2.0])
        vals.append(rep.measured)
    assert (max(vals) - min(vals)) / max(vals) <= 0.10


# ---------------------------------------------------------------------------
# Linear operator study.

def test_linear_reference_value():
    rep = linear_operator_study(
        seeded_ensemble(GRID256, 20, 20260824, degree=CRIT_DEG_ETA),
        PARAMS, MESH16)
    assert rep.ensemble == 20
    assert rep.measured == pytest.approx(0.702364, abs=2.0e-3)
    assert rep.measured < rep.predicted == DEFAULT_CONSTANTS.c_t


def test_linear_skips_degenerate_and_raises_when_empty():
    good = next(seeded_ensemble(GRID256, 1, 3, degree=CRIT_DEG_ETA))
    rep = linear_operator_study(iter([zero_field(GRID256), good]), PARAMS, MESH16)
    assert rep.ensemble == 1
    with pytest.raises(ParameterError):
        linear_operator_study(iter([zero_field(GRID256)]), PARAMS, MESH16)


def test_linear_grid_refinement_stability():
    vals = []
    for n_points in (128, 256):
        rep = linear_operator_study(
            seeded_ensemble(Grid(1, n_points, math.pi), 20, 99,
                            degree=CRIT_DEG_ETA, band=(2.0, 32.0)),
            PARAMS, MESH16)
        vals.append(rep.measured)
    assert (max(vals) - min(vals)) / max(vals) <= 0.10


# ---------------------------------------------------------------------------
# Stationary memory operator study.

def test_operator_b_single_mode_closed_form():
    # a mode inside one shell reduces to the exact kernel integral 1/m;
    # the remaining factor is the shell-anchor mismatch (2^j / |xi|)^(theta-1)
    grid = Grid(1, 64, math.pi)
    mesh = TimeMesh.graded(4.0, 32, 2.5)
    hist = constant_history(grid, mesh, single_mode(grid, 3))
    rep = operator_B_study(hist, mesh, PARAMS)
    assert rep.measured == pytest.approx((2.0 / 3.0) ** (PARAMS.theta - 1.0),
                                         rel=1.0e-10)


def test_operator_b_horizon_independent_for_constant_data():
    # kernel-exact panels plus the exact tail make the truncation exact
    grid = Grid(1, 64, math.pi)
    f = next(seeded_ensemble(grid, 1, 5, degree=-0.3))
    vals = []
    for t_final in (1.0, 8.0):
        mesh = TimeMesh.graded(t_final, 24, 2.5)
        vals.append(operator_B_study(constant_history(grid, mesh, f), mesh, PARAMS).measured)
    assert vals[0] == pytest.approx(vals[1], rel=1.0e-12)


def test_operator_b_zero_history():
    grid = Grid(1, 64, math.pi)
    mesh = TimeMesh.graded(1.0, 8, 2.5)
    rep = operator_B_study(constant_history(grid, mesh, zero_field(grid)), mesh, PARAMS)
    assert rep.measured == 0.0 and rep.predicted == 1.0


def test_operator_b_exponent_relation():
    grid = Grid(1, 64, math.pi)
    mesh = TimeMesh.graded(1.0, 8, 2.5)
    hist = constant_history(grid, mesh, single_mode(grid, 3))
    with pytest.raises(ParameterError):
        operator_B_study(hist, mesh, PARAMS, s=0.5, s0=0.7)
    # either exponent alone pins the other through -s + theta - 1 = -s0
    a = operator_B_study(hist, mesh, PARAMS, s=-0.2)
    b = operator_B_study(hist, mesh, PARAMS, s0=-0.3)
    assert a.measured == pytest.approx(b.measured, rel=1.0e-12)


def test_operator_b_short_history_rejected():
    grid = Grid(1, 64, math.pi)
    mesh = TimeMesh.graded(1.0, 8, 2.5)
    hist = History(grid, mesh)
    hist.append(single_mode(grid, 3))
    with pytest.raises(ParameterError):
        operator_B_study(hist, mesh, PARAMS)


def test_study_exponents_follow_derived_table():
    _, s1, s2 = derived_exponents(PARAMS.theta, PARAMS.theta1, 2.0, 2.0, 1)
    assert s1 == pytest.approx(-0.2)
    assert s2 == pytest.approx(0.9)
    assert critical_degree(s1, 2.0, 1) == pytest.approx(CRIT_DEG_ETA)
    assert critical_degree(s2, 2.0, 1) == pytest.approx(CRIT_DEG_V)
