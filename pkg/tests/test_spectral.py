"""Grid, transform and Fourier-multiplier layer."""

import math

import numpy as np
import pytest

from fracks.errors import GridError, HypothesisError, ParameterError, SeriesRangeError
from fracks.specfun import MLParams, ml_eval
from fracks.spectral import (
    FourierMultiplier,
    Grid,
    ModelParams,
    SpectralField,
    dealias_mask,
    dft_forward,
    dft_inverse,
    divergence,
    frac_laplacian,
    g_kernel,
    heat_semigroup,
    load_field,
    ml_operator,
    pointwise_product,
    save_field,
)

RNG = np.random.default_rng(20240817)


def smooth_random_field(grid, decay=3.0, seed=7):
    """Random real field with coefficients decaying like |k|^-decay."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(grid.shape)
    f = dft_forward(values, grid)
    r = grid.xi_norm()
    damp = (1.0 + r) ** (-decay)
    g = f.with_coeffs(f.coeffs * damp)
    return dft_forward(dft_inverse(g), grid)  # re-symmetrize through real space


def plane_wave(grid, k):
    x = grid.points()
    phase = sum(math.pi * kj / grid.half_width * xj for kj, xj in zip(k, x))
    return dft_forward(np.cos(phase), grid)


def test_grid_validation():
    with pytest.raises(GridError):
        Grid(4, 16, 1.0)
    with pytest.raises(GridError):
        Grid(1, 12, 1.0)
    with pytest.raises(GridError):
        Grid(1, 4, 1.0)
    with pytest.raises(GridError):
        Grid(2, 16, 0.0)


def test_frequency_lattice_is_symmetric_with_tracked_nyquist():
    grid = Grid(1, 16, 2.0)
    k = grid.axis_wavenumbers()
    assert set(k) == set(range(-8, 8))
    assert grid.nyquist == 8
    assert -8 in k and 8 not in k


def test_constant_field_transforms_to_zero_mode():
    grid = Grid(2, 16, 1.0)
    f = dft_forward(np.full(grid.shape, 3.25), grid)
    assert f.coeffs[0, 0] == pytest.approx(3.25)
    off = f.coeffs.copy()
    off[0, 0] = 0.0
    assert np.max(np.abs(off)) < 1e-14


def test_plane_wave_transforms_to_single_pair():
    grid = Grid(1, 32, 1.0)
    f = plane_wave(grid, (3,))
    nz = np.flatnonzero(np.abs(f.coeffs) > 1e-12)
    assert sorted(np.fft.fftfreq(32, 1 / 32)[nz]) == [-3, 3]


def test_round_trip_identity():
    grid = Grid(2, 32, 3.0)
    values = RNG.standard_normal(grid.shape)
    back = dft_inverse(dft_forward(values, grid))
    assert np.max(np.abs(back - values)) < 1e-12


def test_forward_shape_mismatch():
    grid = Grid(2, 16, 1.0)
    with pytest.raises(GridError):
        dft_forward(np.zeros((16, 8)), grid)


def test_real_field_has_conjugate_symmetry():
    grid = Grid(1, 16, 1.0)
    f = smooth_random_field(grid)
    c = f.coeffs
    for k in range(1, 8):
        assert c[-k] == pytest.approx(np.conj(c[k]), abs=1e-14)


def test_plancherel_identity():
    grid = Grid(2, 32, 2.0)
    f = smooth_random_field(grid)
    v = f.values()
    direct = math.sqrt(grid.cell_volume * np.sum(v * v))
    assert f.l2_norm() == pytest.approx(direct, rel=1e-12)


def test_frac_laplacian_on_plane_wave():
    grid = Grid(1, 32, 1.0)
    theta = 1.3
    f = plane_wave(grid, (2,))
    g = frac_laplacian(f, theta)
    xi = 2.0 * math.pi / grid.half_width * 0.5 * 2  # pi * 2 / L
    assert np.allclose(g.coeffs, f.coeffs * abs(xi) ** theta)


def test_frac_laplacian_theta_zero_is_identity():
    grid = Grid(1, 16, 1.0)
    f = smooth_random_field(grid)
    assert np.array_equal(frac_laplacian(f, 0.0).coeffs, f.coeffs)


def test_frac_laplacian_matches_second_derivative_symbol():
    # theta = 2 against an independently assembled |xi|^2 multiplier
    grid = Grid(2, 32, 2.0)
    f = smooth_random_field(grid)
    got = frac_laplacian(f, 2.0)
    xi2 = sum(grid.xi_component(j) ** 2 for j in range(2))
    want = f.coeffs * np.broadcast_to(xi2, grid.shape)
    assert np.max(np.abs(got.coeffs - want)) < 1e-10


def test_frac_laplacian_composes_additively():
    grid = Grid(1, 32, 1.5)
    f = smooth_random_field(grid)
    ab = frac_laplacian(frac_laplacian(f, 0.7), 0.9)
    direct = frac_laplacian(f, 1.6)
    assert np.max(np.abs(ab.coeffs - direct.coeffs)) < 1e-12


def test_drift_kernel_plane_wave_and_gradient_limit():
    grid = Grid(1, 32, 1.0)
    f = plane_wave(grid, (3,))
    theta1 = 0.4
    comps = g_kernel(f, theta1)
    xi = math.pi * 3 / grid.half_width
    idx = 3
    assert comps[0].coeffs[idx] == pytest.approx(1j * xi * abs(xi) ** -theta1 * f.coeffs[idx])
    grad = g_kernel(f, 0.0)[0]
    assert grad.coeffs[idx] == pytest.approx(1j * xi * f.coeffs[idx])


def test_drift_kernel_kills_zero_mode_and_preserves_realness():
    grid = Grid(2, 16, 1.0)
    const = dft_forward(np.full(grid.shape, 2.0), grid)
    comps = g_kernel(const, 0.5)
    for c in comps:
        assert np.max(np.abs(c.coeffs)) < 1e-14
    f = smooth_random_field(grid)
    for c in g_kernel(f, 0.5):
        assert c.is_real()


def test_drift_kernel_range_check():
    grid = Grid(1, 16, 1.0)
    f = smooth_random_field(grid)
    with pytest.raises(ParameterError):
        g_kernel(f, 1.0)  # theta1 must stay below dim


def test_heat_semigroup_identity_and_law():
    grid = Grid(1, 32, 1.0)
    f = smooth_random_field(grid)
    assert heat_semigroup(f, 0.0, 1.5) is f
    a = heat_semigroup(heat_semigroup(f, 0.3, 1.5), 0.45, 1.5)
    b = heat_semigroup(f, 0.75, 1.5)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-15


def test_heat_semigroup_matches_gaussian_spreading():
    # theta = 2: variance grows linearly, amplitude renormalizes
    grid = Grid(1, 256, 16.0)
    x = grid.points()[0]
    s0 = 1.0
    f = dft_forward(np.exp(-x * x / (2 * s0**2)), grid)
    t = 0.8
    evolved = heat_semigroup(f, t, 2.0)
    s2 = s0**2 + 2.0 * t
    want = s0 / math.sqrt(s2) * np.exp(-x * x / (2 * s2))
    assert np.max(np.abs(evolved.values() - want)) < 1e-8


def test_ml_operator_identity_at_time_zero():
    grid = Grid(1, 16, 1.0)
    f = smooth_random_field(grid)
    p = ModelParams(alpha=0.6, theta=1.1)
    same = ml_operator(f, 0.0, p, family="E_alpha")
    assert np.max(np.abs(same.coeffs - f.coeffs)) < 1e-14
    scaled = ml_operator(f, 0.0, p, family="E_alpha_alpha")
    assert np.max(np.abs(scaled.coeffs - f.coeffs / math.gamma(0.6))) < 1e-14


def test_ml_operator_classical_limit_is_heat_semigroup():
    grid = Grid(1, 32, 2.0)
    f = smooth_random_field(grid)
    p = ModelParams(alpha=1.0, theta=1.4)
    a = ml_operator(f, 0.6, p, family="E_alpha")
    b = heat_semigroup(f, 0.6, 1.4)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13


def test_ml_operator_on_plane_wave_matches_scalar_eval():
    grid = Grid(1, 32, 1.0)
    f = plane_wave(grid, (4,))
    p = ModelParams(alpha=0.6, theta=1.2)
    t = 0.7
    out = ml_operator(f, t, p, family="E_alpha_alpha")
    xi = math.pi * 4 / grid.half_width
    scalar = ml_eval(MLParams(0.6, 0.6), t**0.6 * xi**1.2).value
    assert out.coeffs[4] == pytest.approx(scalar * f.coeffs[4], rel=1e-11)


def test_ml_operator_is_sup_norm_contraction():
    grid = Grid(2, 32, 1.0)
    f = smooth_random_field(grid)
    p = ModelParams(alpha=0.7, theta=1.1)
    out = ml_operator(f, 0.5, p, family="E_alpha")
    assert np.max(np.abs(out.coeffs)) <= np.max(np.abs(f.coeffs)) + 1e-15


def test_ml_operator_gamma_conventions_differ():
    grid = Grid(1, 16, 1.0)
    f = smooth_random_field(grid)
    damped = ModelParams(alpha=0.6, theta=1.2, gamma=0.5)
    literal = damped.with_gamma_sign("paper")
    a = ml_operator(f, 0.4, damped, family="E_alpha", gamma_shift=True)
    b = ml_operator(f, 0.4, literal, family="E_alpha", gamma_shift=True)
    # literal sign amplifies the zero mode instead of damping it
    assert abs(b.coeffs[0]) > abs(a.coeffs[0])
    zero_x = 0.4**0.6 * 0.5
    want = ml_eval(MLParams(0.6), zero_x).value
    assert a.coeffs[0] == pytest.approx(want * f.coeffs[0], rel=1e-11)


def test_ml_operator_literal_gamma_range_guard():
    grid = Grid(1, 16, 1.0)
    f = smooth_random_field(grid)
    p = ModelParams(alpha=0.6, theta=1.2, gamma=40.0, gamma_sign="paper")
    with pytest.raises(SeriesRangeError):
        ml_operator(f, 5.0, p, family="E_alpha", gamma_shift=True)


def test_divergence_of_gradient_is_negative_laplacian():
    grid = Grid(2, 32, 1.0)
    f = smooth_random_field(grid)
    # identity holds away from the Nyquist planes the odd symbols zero out
    f = f.with_coeffs(np.where(dealias_mask(grid), f.coeffs, 0.0))
    grad = g_kernel(f, 0.0)
    got = divergence(grad)
    want = frac_laplacian(f, 2.0)
    assert np.max(np.abs(got.coeffs + want.coeffs)) < 1e-10


def test_divergence_validates_component_count():
    grid = Grid(2, 16, 1.0)
    f = smooth_random_field(grid)
    with pytest.raises(GridError):
        divergence([f])


def test_product_with_constant_and_plane_waves():
    grid = Grid(1, 64, 1.0)
    one = dft_forward(np.ones(grid.shape), grid)
    f = smooth_random_field(grid)
    assert np.max(np.abs(pointwise_product(one, f, dealias=False).coeffs - f.coeffs)) < 1e-14
    a, b = plane_wave(grid, (3,)), plane_wave(grid, (5,))
    prod = pointwise_product(a, b, dealias=False)
    # cos(3x)cos(5x) = (cos 2x + cos 8x)/2: modes at +-2 and +-8
    nz = sorted(np.fft.fftfreq(64, 1 / 64)[np.flatnonzero(np.abs(prod.coeffs) > 1e-12)])
    assert nz == [-8, -2, 2, 8]


def test_dealiased_product_matches_convolution_oracle():
    grid = Grid(1, 32, 1.0)
    rng = np.random.default_rng(3)
    # band-limited inputs inside the retained third of the spectrum
    def band_limited():
        c = np.zeros(32, dtype=complex)
        for k in range(1, 6):
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            c[k] = amp
            c[-k] = np.conj(amp)
        c[0] = rng.standard_normal()
        return SpectralField(grid, c)

    f, g = band_limited(), band_limited()
    prod = pointwise_product(f, g, dealias=True)
    k = np.fft.fftfreq(32, 1 / 32).astype(int)
    mask = dealias_mask(grid)
    for idx in np.ndindex(prod.coeffs.shape):
        if not mask[idx]:
            assert prod.coeffs[idx] == 0.0
            continue
        kk = k[idx[0]]
        want = sum(
            f.coeffs[m % 32] * g.coeffs[(kk - m) % 32]
            for m in range(-15, 16)
            if abs(m) <= 6 and abs(kk - m) <= 6
        )
        assert prod.coeffs[idx] == pytest.approx(want, abs=1e-13)


def test_multipliers_commute():
    grid = Grid(2, 16, 1.0)
    f = smooth_random_field(grid)
    a = FourierMultiplier.radial(lambda r: np.exp(-r), zero_mode_value=1.0)
    b = FourierMultiplier.radial(lambda r: 1.0 / (1.0 + r**2), zero_mode_value=1.0)
    ab = b.apply(a.apply(f))
    ba = a.apply(b.apply(f))
    assert np.max(np.abs(ab.coeffs - ba.coeffs)) < 1e-15


def test_operation_chain_keeps_plancherel():
    grid = Grid(2, 32, 2.0)
    f = smooth_random_field(grid, decay=4.0)
    g = smooth_random_field(grid, decay=4.0, seed=11)
    h = pointwise_product(f, g, dealias=True)
    h = heat_semigroup(h, 0.2, 1.4)
    h = frac_laplacian(h, 0.6)
    v = h.values()
    direct = math.sqrt(grid.cell_volume * np.sum(v * v))
    assert h.l2_norm() == pytest.approx(direct, rel=1e-10)


def test_model_params_validation_and_window():
    with pytest.raises(ParameterError):
        ModelParams(alpha=0.0)
    with pytest.raises(ParameterError):
        ModelParams(theta=-1.0)
    with pytest.raises(ParameterError):
        ModelParams(gamma_sign="bogus")
    p = ModelParams(alpha=0.5, theta=1.1, theta1=0.5)
    lo, hi = p.check_admissible(p=2.0, n=1)
    assert lo < 1.1 < hi
    with pytest.raises(HypothesisError) as err:
        ModelParams(alpha=0.5, theta=1.6, theta1=0.5).check_admissible(p=2.0, n=1)
    assert "theta" in str(err.value)
    with pytest.raises(HypothesisError):
        ModelParams(theta1=1.5).check_admissible(p=2.0, n=1)


def test_snapshot_round_trip(tmp_path):
    grid = Grid(2, 16, 1.0)
    f = smooth_random_field(grid)
    path = tmp_path / "field.fkf"
    save_field(f, path, name="eta", time=0.25)
    loaded, header = load_field(path)
    assert header["name"] == "eta"
    assert header["time"] == 0.25
    assert loaded.grid == grid
    assert np.array_equal(loaded.coeffs, f.coeffs)
    with pytest.raises(GridError):
        bad = tmp_path / "bad.fkf"
        bad.write_bytes(b'{"magic": "nope"}\n')
        load_field(bad)
