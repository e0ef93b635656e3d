"""Decay-rate fits and operator-constant studies for the propagator bounds.

The fits push a field through the fractional heat or Mittag-Leffler flow,
measure dyadic-block norms on a log time grid, and compare the log-log
slope over an automatically chosen scaling window with the predicted
exponent.  The studies drive the memory operators over seeded ensembles
and report empirical constants as maxima, never as proven bounds.  Plots
render headless to SVG with a fixed hash salt and no timestamp so output
files are reproducible byte for byte.
"""

import logging
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .besov import BesovParams, besov_norm, build_cutoff
from .duhamel import History, TimeMesh, _edge_table, _panel_mass, duhamel_B, duhamel_T
from .errors import HypothesisError, InsufficientRangeError, ParameterError
from .spectral import (
    ModelParams,
    SpectralField,
    dft_forward,
    frac_laplacian,
    heat_semigroup,
    ml_operator,
)
from .besov import derived_exponents
from .wellposed import DEFAULT_CONSTANTS

log = logging.getLogger(__name__)

TRANSIENT_FRACTION = 0.05
FLOOR_FACTOR = 1.0e3 * np.finfo(float).eps
MIN_DECADES = 1.5
SPECTRUM_RTOL = 1.0e-9
MARCH_MARGIN = 2.0
FLAT_BITE = 0.05
SVG_HASH_SALT = "fracks"


@dataclass(frozen=True)
class DecaySpec:
    """Exponent block of one decay fit.

    The flow maps data measured in the (s1, p1) norm to the (s2, p2) norm
    after zeta fractional derivatives; times is the log-spaced sampling of
    the flow.  alpha is ignored by the pure heat fit.
    """
    zeta: float
    theta: float
    alpha: float
    s1: float
    s2: float
    p1: float
    p2: float
    times: tuple

    def __post_init__(self):
        if self.zeta < 0.0:
            raise ParameterError(f"zeta must be >= 0, got {self.zeta}")
        if self.theta <= 0.0:
            raise ParameterError(f"theta must be positive, got {self.theta}")
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.s1 > self.s2:
            raise ParameterError(f"need s1 <= s2, got s1={self.s1}, s2={self.s2}")
        if not 1.0 <= self.p1 <= self.p2:
            raise ParameterError(f"need 1 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        t = np.asarray(self.times)
        if t.size < 4 or np.any(t <= 0.0) or np.any(np.diff(t) <= 0.0):
            raise ParameterError("times must be >= 4 positive increasing samples")

    def heat_exponent(self, n):
        """Decay exponent of the heat-flow bound, integrability shift included."""
        gap = n / self.p1 - n / self.p2
        return (self.s2 - self.s1 + self.zeta + gap) / self.theta

    def ml_exponent(self, n):
        return self.alpha * self.heat_exponent(n)

    def check_family(self, n, family):
        """Hypothesis window of the Mittag-Leffler decay bounds.

        The first-index family decays algebraically like t^-alpha per mode
        and cannot support exponents of one or more; the second-index
        family tails like t^-2 alpha and buys one more unit.
        """
        bound = 1.0 if family == "E_alpha" else 2.0
        e = self.heat_exponent(n)
        if e >= bound:
            raise HypothesisError(
                f"(s2 - s1 + zeta + n/p1 - n/p2) / theta < {bound:g}",
                f"exponent {e:.4f} is outside the {family} window (< {bound:g})",
            )


@dataclass(frozen=True)
class RatioReport:
    """Measured-versus-reference summary of one fit or study."""
    measured: float
    predicted: float
    rel_dev: float
    ensemble: int
    grid: str

    @classmethod
    def build(cls, measured, predicted, ensemble, grid):
        if predicted != 0.0:
            rel = abs(measured - predicted) / abs(predicted)
        else:
            rel = abs(measured)
        return cls(float(measured), float(predicted), float(rel), int(ensemble), grid)


def _grid_tag(grid):
    return f"{grid.dim}d-n{grid.n_points}"


def log_times(t_min, t_max, count=48):
    if not 0.0 < t_min < t_max:
        raise ParameterError(f"need 0 < t_min < t_max, got {t_min}, {t_max}")
    return tuple(np.geomspace(t_min, t_max, count))


# ---------------------------------------------------------------------------
# Scaling-window selection and the slope fit.

def _scaling_window(times, norms, norm0, expect_flat=False, mask=None):
    """Indices of the intermediate asymptotic range.

    Times where the norm still sits within TRANSIENT_FRACTION of its
    value at t -> 0 are transient, times below FLOOR_FACTOR of it are
    rounding floor, and mask (the marching window of the leading mode)
    cuts times dominated by the spectral truncation; the rest must span
    MIN_DECADES decades.  A predicted flat curve never leaves the
    transient band, so expect_flat keeps it.
    """
    t = np.asarray(times)
    y = np.asarray(norms)
    keep = np.isfinite(y) & (y > 0.0) & (y >= FLOOR_FACTOR * norm0)
    if not expect_flat:
        keep &= y <= (1.0 - TRANSIENT_FRACTION) * norm0
    if mask is not None:
        keep &= np.asarray(mask)
    idx = np.nonzero(keep)[0]
    if idx.size >= 2:
        decades = math.log10(t[idx[-1]] / t[idx[0]])
    else:
        decades = 0.0
    if decades < MIN_DECADES:
        raise InsufficientRangeError(
            f"scaling window spans {decades:.2f} decades between the transient "
            f"and the floor; need {MIN_DECADES}"
        )
    return idx


def _fit_slope(times, norms, window):
    lt = np.log10(np.asarray(times)[window])
    ly = np.log10(np.asarray(norms)[window])
    slope, intercept = np.polyfit(lt, ly, 1)
    return float(slope), float(intercept)


def _render_decay_svg(path, times, norms, window, slope, intercept, predicted, label):
    t = np.asarray(times)
    y = np.asarray(norms)
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        ax.loglog(t, y, marker="o", markersize=2.5, linewidth=0.8, label="measured")
        tw = t[window]
        ax.loglog(tw, 10.0**intercept * tw**slope, linewidth=1.4,
                  label=f"fit {slope:+.3f} (predicted {predicted:+.3f})")
        ax.set_xlabel("t")
        ax.set_ylabel("block norm")
        ax.set_title(label)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _spectral_extent(f):
    """Radial support [r_lo, r_hi] of the nonzero coefficients."""
    mag = np.abs(np.asarray(f.coeffs))
    peak = float(mag.max())
    if peak == 0.0:
        raise ParameterError("zero field has no decay rate")
    live = mag > SPECTRUM_RTOL * peak
    live[(0,) * f.grid.dim] = False
    if not live.any():
        raise ParameterError("field carries no nonzero mode")
    r = np.broadcast_to(f.grid.xi_norm(), f.grid.shape)
    return float(r[live].min()), float(r[live].max())


def _march_mask(times, spec, n, r_lo, r_hi, alpha_eff):
    """Times whose leading mode stays inside the populated band.

    The propagator kernels depend on t^alpha_eff |xi|^theta, so for data
    at the critical degree of the source norm the leading mode sits near
    radius (x / t^alpha_eff)^(1/theta) with x the heat exponent; once it
    reaches either spectral cutoff, within a margin, the curve measures
    the truncation instead of the flow.  A flat prediction has no
    marching; there the window only requires the slowest mode to stay
    essentially undecayed.
    """
    t = np.asarray(times)
    x = spec.heat_exponent(n)
    if x == 0.0:
        return t**alpha_eff * r_lo**spec.theta <= FLAT_BITE
    t_lo = (x * (MARCH_MARGIN / r_hi) ** spec.theta) ** (1.0 / alpha_eff)
    t_hi = (x / (MARCH_MARGIN * r_lo) ** spec.theta) ** (1.0 / alpha_eff)
    return (t >= t_lo) & (t <= t_hi)


def _decay_report(f, spec, evolve, predicted, plot_path, label, alpha_eff=1.0):
    n = f.grid.dim
    cutoff = build_cutoff(f.grid)
    bp = BesovParams(spec.s2, spec.p2, math.inf)
    norm0 = besov_norm(frac_laplacian(f, spec.zeta), bp, cutoff)
    if norm0 == 0.0:
        raise ParameterError("zero field has no decay rate")
    r_lo, r_hi = _spectral_extent(f)
    norms = [
        besov_norm(frac_laplacian(evolve(f, t), spec.zeta), bp, cutoff)
        for t in spec.times
    ]
    mask = _march_mask(spec.times, spec, n, r_lo, r_hi, alpha_eff)
    window = _scaling_window(spec.times, norms, norm0,
                             expect_flat=predicted == 0.0, mask=mask)
    slope, intercept = _fit_slope(spec.times, norms, window)
    if plot_path is not None:
        _render_decay_svg(plot_path, spec.times, norms, window, slope, intercept,
                          predicted, label)
    return RatioReport.build(slope, predicted, 1, _grid_tag(f.grid))


def decay_fit_heat(f, spec, plot_path=None):
    """Log-log slope of the heat-flow norm against the smoothing bound.

    Measures |(-Lap)^(zeta/2) U_theta(t) f| in the (s2, p2) block norm on
    spec.times and fits the slope over the scaling window; the reference
    is -(s2 - s1 + zeta + n/p1 - n/p2) / theta.
    """
    n = f.grid.dim
    return _decay_report(
        f, spec,
        lambda g, t: heat_semigroup(g, t, spec.theta),
        -spec.heat_exponent(n), plot_path, "heat flow",
    )


def decay_fit_ml(f, spec, family="E_alpha", plot_path=None, gamma=0.0,
                 gamma_sign="damped"):
    """Decay fit for the Mittag-Leffler flows, slope reference
    -(alpha/theta)(s2 - s1 + zeta + n/p1 - n/p2).

    The hypothesis window depends on the family; violations raise before
    anything is evaluated.  A nonzero gamma probes the shifted variant
    against the same unshifted reference.
    """
    if family not in ("E_alpha", "E_alpha_alpha"):
        raise ParameterError(f"unknown family {family!r}")
    n = f.grid.dim
    spec.check_family(n, family)
    params = ModelParams(alpha=spec.alpha, theta=spec.theta, gamma=gamma,
                         gamma_sign=gamma_sign)
    return _decay_report(
        f, spec,
        lambda g, t: ml_operator(g, t, params, family=family,
                                 gamma_shift=gamma != 0.0),
        -spec.ml_exponent(n), plot_path, f"{family} flow",
        alpha_eff=spec.alpha,
    )


# ---------------------------------------------------------------------------
# Data builders: deterministic critical data for the fits, seeded
# ensembles for the operator studies.

def _strip_mean_nyquist(grid, coeffs):
    coeffs[(0,) * grid.dim] = 0.0
    nyq = np.abs(grid.axis_wavenumbers()) == grid.nyquist
    for j in range(grid.dim):
        sel = [slice(None)] * grid.dim
        sel[j] = nyq
        coeffs[tuple(sel)] = 0.0
    return coeffs


def critical_degree(s, p, n):
    """Spectral slope whose dyadic blocks are flat in the (s, p) norm.

    A shell at 2^j holds about 2^(jn) lattice modes, so coefficients
    |xi|^degree give block L^2 norms growing like 2^(j(degree + n/2));
    the p index enters through the same mode count.
    """
    return -s - n + n / p


def power_law_data(grid, degree, band=None, amplitude=1.0):
    """Deterministic real field with coefficients amplitude |xi|^degree.

    The spectrum is truncated to band (defaults to the resolved range
    short of the dealias edge) with the mean and Nyquist planes removed.
    Fed to a decay fit at the critical degree of the source norm, the
    leading shell marches down the band and realizes the predicted rate.
    """
    xi_min = math.pi / grid.half_width
    if band is None:
        band = (0.9 * xi_min, xi_min * grid.n_points / 3.0)
    lo, hi = band
    if not 0.0 < lo < hi:
        raise ParameterError(f"band must satisfy 0 < lo < hi, got {band}")
    r = grid.xi_norm()
    env = np.where((r >= lo) & (r <= hi),
                   np.where(r > 0.0, r, 1.0) ** degree, 0.0)
    coeffs = _strip_mean_nyquist(grid, amplitude * env.astype(np.complex128))
    return SpectralField(grid, coeffs)


def seeded_ensemble(grid, count, seed, degree=-0.5, band=None):
    """Random real band-limited fields with spectral slope degree.

    Coefficients are white noise shaped by |xi|^degree on the band, with
    the mean and the Nyquist planes removed; the generator is fully
    determined by the seed so reported constants can be reproduced.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    xi_min = math.pi / grid.half_width
    if band is None:
        band = (2.0 * xi_min, xi_min * grid.n_points / 4.0)
    lo, hi = band
    if not 0.0 < lo < hi:
        raise ParameterError(f"band must satisfy 0 < lo < hi, got {band}")
    rng = np.random.default_rng(seed)
    r = grid.xi_norm()
    envelope = np.where((r >= lo) & (r <= hi),
                        np.where(r > 0.0, r, 1.0) ** degree, 0.0)
    wn = grid.axis_wavenumbers()
    nyq = np.abs(wn) == grid.nyquist
    for _ in range(count):
        f = dft_forward(rng.standard_normal(grid.shape), grid)
        coeffs = f.coeffs * envelope
        coeffs[(0,) * grid.dim] = 0.0
        for j in range(grid.dim):
            sel = [slice(None)] * grid.dim
            sel[j] = nyq
            coeffs[tuple(sel)] = 0.0
        yield SpectralField(grid, coeffs)


def paired_ensemble(grid, count, seed, degree_eta=-0.5, degree_v=-1.0, band=None):
    gen_eta = seeded_ensemble(grid, count, seed, degree_eta, band)
    gen_v = seeded_ensemble(grid, count, seed + 1, degree_v, band)
    return zip(gen_eta, gen_v)


def _constant_history(grid, mesh, eta, v=None):
    hist = History(grid, mesh)
    for _ in mesh.nodes:
        hist.append(eta, v)
    return hist


def _horizon_mesh(mesh, t_final):
    if t_final <= 0.0:
        raise ParameterError(f"horizon must be positive, got {t_final}")
    return TimeMesh.from_nodes(mesh.nodes * (t_final / mesh.t_final))


# ---------------------------------------------------------------------------
# Operator-constant studies.

def bilinear_constant_study(pairs, params, mesh, T_values, p=2.0, q=2.0):
    """Empirical constant of the chemotactic memory operator.

    For every time-constant pair the ratio sup over nodes of
    |B(eta, v)|_X / (|eta|_X |v|_Y) is taken on the mesh rescaled to each
    horizon in T_values; the report carries the maximum, with the frozen
    solver constant as reference.  Horizon stability is the content: the
    bound claims a constant independent of the horizon.
    """
    if not T_values:
        raise ParameterError("T_values must be nonempty")
    worst, count, tag = 0.0, 0, ""
    bp_x = bp_y = cutoff = None
    for eta, v in pairs:
        grid = eta.grid
        if bp_x is None:
            params.check_admissible(p, grid.dim)
            _, s1, s2 = derived_exponents(params.theta, params.theta1, p, q, grid.dim)
            bp_x = BesovParams(s1, p, math.inf)
            bp_y = BesovParams(s2, q, math.inf)
            cutoff = build_cutoff(grid)
            tag = _grid_tag(grid)
        ne = besov_norm(eta, bp_x, cutoff)
        nv = besov_norm(v, bp_y, cutoff)
        if ne == 0.0 or nv == 0.0:
            log.info("skipping degenerate pair with norms (%g, %g)", ne, nv)
            continue
        count += 1
        for t_final in T_values:
            scaled = _horizon_mesh(mesh, t_final)
            hist = _constant_history(grid, scaled, eta, v)
            sup_b = max(
                besov_norm(duhamel_B(hist, scaled, params, i), bp_x, cutoff)
                for i in range(1, scaled.nodes.size)
            )
            worst = max(worst, sup_b / (ne * nv))
    if count == 0:
        raise ParameterError("ensemble contained only degenerate pairs")
    return RatioReport.build(worst, DEFAULT_CONSTANTS.k_b, count, tag)


def linear_operator_study(etas, params, mesh, p=2.0, q=2.0):
    """Empirical constant of the production memory operator, the ratio
    sup over nodes of |T(eta)|_Y / |eta|_X over time-constant densities."""
    worst, count, tag = 0.0, 0, ""
    bp_x = bp_y = cutoff = None
    for eta in etas:
        grid = eta.grid
        if bp_x is None:
            params.check_admissible(p, grid.dim)
            _, s1, s2 = derived_exponents(params.theta, params.theta1, p, q, grid.dim)
            bp_x = BesovParams(s1, p, math.inf)
            bp_y = BesovParams(s2, q, math.inf)
            cutoff = build_cutoff(grid)
            tag = _grid_tag(grid)
        ne = besov_norm(eta, bp_x, cutoff)
        if ne == 0.0:
            log.info("skipping degenerate density")
            continue
        count += 1
        hist = _constant_history(grid, mesh, eta)
        sup_t = max(
            besov_norm(duhamel_T(hist, mesh, params, i), bp_y, cutoff)
            for i in range(1, mesh.nodes.size)
        )
        worst = max(worst, sup_t / ne)
    if count == 0:
        raise ParameterError("ensemble contained only degenerate densities")
    return RatioReport.build(worst, DEFAULT_CONSTANTS.c_t, count, tag)


def operator_B_study(hist, mesh, params, s=None, s0=None, p=2.0):
    """Smoothing ratio of the stationary memory operator

        B(f) = int_0^inf tau^(alpha-1) d/dx1 E_aa(-tau^alpha m) f(tau) dtau

    under the exponent relation -s + theta - 1 = -s0.  Panels on
    (0, t_final] use the kernel-exact masses; the tail beyond the horizon
    integrates exactly to E_alpha(-T^alpha m)/m against the last snapshot.
    The reference value one is exact for a single mode pinned to a shell
    anchor 2^j, where the derivative gain cancels the exponent shift.
    """
    grid = hist.grid
    if s is None and s0 is None:
        _, s1, _ = derived_exponents(params.theta, params.theta1, p, p, grid.dim)
        s = s1
        s0 = s - params.theta + 1.0
    elif s is None:
        s = s0 + params.theta - 1.0
    elif s0 is None:
        s0 = s - params.theta + 1.0
    elif abs((-s + params.theta - 1.0) - (-s0)) > 1.0e-12:
        raise ParameterError(
            f"exponent relation -s + theta - 1 = -s0 fails: s={s}, s0={s0}, "
            f"theta={params.theta}"
        )
    nodes = mesh.nodes
    if len(hist) < nodes.size:
        raise ParameterError(
            f"history holds {len(hist)} snapshots for {nodes.size} nodes"
        )
    m = np.ravel(params.D_eta * grid.xi_norm() ** params.theta)
    rows = [np.ravel(hist.eta(j).coeffs) for j in range(nodes.size)]
    edges = _edge_table(params.alpha, nodes, m)
    total = np.zeros(rows[0].shape, dtype=complex)
    for j in range(nodes.size - 1):
        mass = _panel_mass(params.alpha, m, nodes[j], nodes[j + 1],
                           edges[j], edges[j + 1])
        total += mass * (0.5 * (rows[j] + rows[j + 1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(m > 0.0, edges[-1] / np.where(m > 0.0, m, 1.0), 0.0)
    total += tail * rows[-1]
    sym = 1j * np.ravel(np.broadcast_to(grid.xi_component(0, zero_nyquist=True),
                                        grid.shape))
    out = SpectralField(grid, (sym * total).reshape(grid.shape))
    cutoff = build_cutoff(grid)
    den = max(
        besov_norm(hist.eta(j), BesovParams(s0, p, math.inf), cutoff)
        for j in range(nodes.size)
    )
    if den == 0.0:
        return RatioReport.build(0.0, 1.0, 1, _grid_tag(grid))
    num = besov_norm(out, BesovParams(s, p, math.inf), cutoff)
    return RatioReport.build(num / den, 1.0, 1, _grid_tag(grid))
