"""Littlewood-Paley blocks, homogeneous Besov norms and paraproducts.

The dyadic cutoff is built from an explicit C-infinity bump,

    psi(s) = exp(-1/s) for s > 0 else 0,
    chi(u) = psi((8/3 - u) / (2/3)) * psi((u - 3/4) / (1/4)),

supported exactly on 3/4 < u < 8/3, then normalized telescopically:
phi_j(xi) = chi(|xi|/2^j) / sum_k chi(|xi|/2^k).  Every positive radius
meets one or two shells, so the normalization is well defined and the
shells form a partition of unity away from the origin.

The j-sum is necessarily finite on a grid: shells below the smallest
lattice radius are empty, shells above the dealias boundary are
untrustworthy.  Mass outside the resolved band is reported, never
silently dropped.  The zero mode plays the role of the polynomial
quotient in the continuum definition; that is the whole discrete
analogue we offer, and callers who care must track means themselves.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, HypothesisError, ParameterError, SpectrumSupportError
from .spectral import SpectralField, g_kernel, pointwise_product

__all__ = [
    "DyadicCutoff", "BesovParams", "LPBlocks",
    "build_cutoff", "lp_decompose", "besov_norm", "bony_split",
    "bernstein_check", "product_estimate_check",
]

SHELL_LO = 3.0 / 4.0
SHELL_HI = 8.0 / 3.0


def _psi(s):
    out = np.zeros_like(s, dtype=float)
    pos = s > 0.0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def chi_profile(u):
    """Smooth bump supported on (3/4, 8/3)."""
    u = np.asarray(u, dtype=float)
    return _psi((SHELL_HI - u) / (2.0 / 3.0)) * _psi((u - SHELL_LO) / (1.0 / 4.0))


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = math.inf
    r: float = math.inf

    def __post_init__(self):
        if self.p < 1.0 or self.r < 1.0:
            raise ParameterError("integrability indices must be >= 1")


@dataclass(frozen=True)
class DyadicCutoff:
    """Shell weights phi_j precomputed on one grid."""
    grid: object
    j_min: int
    j_max: int
    weights: dict = field(repr=False)       # j -> real array on the lattice
    band: np.ndarray = field(repr=False)    # resolved-band mask (excl. zero mode)

    @property
    def j_range(self):
        return range(self.j_min, self.j_max + 1)

    def shell_weight(self, j):
        if not (self.j_min <= j <= self.j_max):
            raise ParameterError(f"shell {j} outside resolved range "
                                 f"[{self.j_min}, {self.j_max}]")
        return self.weights[j]


def build_cutoff(grid):
    r = grid.xi_norm()
    r_deal = (2.0 / 3.0) * math.pi * grid.nyquist / grid.half_width
    r_min = math.pi / grid.half_width
    # shell j touches radius r iff 3/4 2^j < r < 8/3 2^j
    j_min = math.ceil(math.log2(r_min / SHELL_HI)) if r_min > 0 else 0
    j_max = math.floor(math.log2(r_deal / SHELL_LO))
    if j_max - j_min + 1 < 4:
        raise GridError(
            f"grid resolves only {max(0, j_max - j_min + 1)} dyadic shells; "
            "need at least 4 (increase n_points or half_width)"
        )
    total = np.zeros_like(r)
    raw = {}
    for j in range(j_min, j_max + 1):
        w = chi_profile(r / 2.0**j)
        raw[j] = w
        total += w
    band = (r > 0.0) & (r <= r_deal)
    if not np.all(total[band] > 0.0):
        raise GridError("dyadic shells fail to cover the resolved band")
    safe = np.where(total > 0.0, total, 1.0)
    weights = {j: w / safe for j, w in raw.items()}
    return DyadicCutoff(grid=grid, j_min=j_min, j_max=j_max, weights=weights, band=band)


@dataclass(frozen=True)
class LPBlocks:
    blocks: dict                 # j -> SpectralField
    residual_mass: float
    cutoff: DyadicCutoff

    def reconstruct(self):
        """Sum of blocks: the original field minus mean and residual."""
        grid = self.cutoff.grid
        out = np.zeros(grid.shape, dtype=np.complex128)
        for b in self.blocks.values():
            out += b.coeffs
        return SpectralField(grid, out)


def lp_decompose(f, cutoff):
    if f.grid != cutoff.grid:
        raise GridError("field and cutoff live on different grids")
    blocks = {
        j: f.with_coeffs(f.coeffs * cutoff.weights[j])
        for j in cutoff.j_range
    }
    covered = np.zeros(f.grid.shape)
    for j in cutoff.j_range:
        covered += cutoff.weights[j]
    outside = (covered <= 0.0)
    outside[(0,) * f.grid.dim] = False
    residual = math.sqrt((2.0 * f.grid.half_width) ** f.grid.dim) * float(
        np.linalg.norm(f.coeffs[outside])
    )
    return LPBlocks(blocks=blocks, residual_mass=residual, cutoff=cutoff)


def block_lp_norms(f, cutoff, p):
    """j -> ||Delta_j f||_{L^p} for every resolved shell."""
    return {j: b.lp_norm(p) for j, b in lp_decompose(f, cutoff).blocks.items()}


def besov_norm(f, params, cutoff):
    """Discrete homogeneous norm: l^r over shells of 2^{js} L^p block norms."""
    norms = block_lp_norms(f, cutoff, params.p)
    seq = [2.0 ** (j * params.s) * norms[j] for j in cutoff.j_range]
    if params.r == math.inf:
        return max(seq) if seq else 0.0
    return float(sum(a**params.r for a in seq) ** (1.0 / params.r))


def _low_pass(f, cutoff, j_below):
    """S_m f = mean + shells strictly below m."""
    grid = f.grid
    out = np.zeros(grid.shape, dtype=np.complex128)
    zero = (0,) * grid.dim
    out[zero] = f.coeffs[zero]
    for k in range(cutoff.j_min, min(j_below, cutoff.j_max + 1)):
        out += f.coeffs * cutoff.weights[k]
    return f.with_coeffs(out)


def bony_split(f, g, cutoff, dealias=True):
    """Paraproducts (T_f g, T_g f) and the diagonal remainder R.

    T_f g = sum_j S_{j-2} f Delta_j g; R collects the near-diagonal
    pairs |j-k| <= 2 plus the product of the means.  The three pieces
    sum to fg exactly up to dealiasing and resolved-band truncation.
    """
    if f.grid != g.grid:
        raise GridError("bony_split needs a common grid")
    fb = lp_decompose(f, cutoff).blocks
    gb = lp_decompose(g, cutoff).blocks
    grid = f.grid
    zero = np.zeros(grid.shape, dtype=np.complex128)

    def para(low_of, blocks_of):
        acc = zero.copy()
        for j in cutoff.j_range:
            low = _low_pass(low_of, cutoff, j - 2)
            acc += pointwise_product(low, blocks_of[j], dealias=dealias).coeffs
        return f.with_coeffs(acc)

    t_fg = para(f, gb)
    t_gf = para(g, fb)

    acc = zero.copy()
    for j in cutoff.j_range:
        for k in cutoff.j_range:
            if abs(j - k) <= 2:
                acc += pointwise_product(fb[j], gb[k], dealias=dealias).coeffs
    acc[(0,) * grid.dim] += f.mean() * g.mean()
    remainder = f.with_coeffs(acc)
    return t_fg, t_gf, remainder


def _detect_shell(f, cutoff, tol=1e-12):
    """Index j of the annulus carrying the spectrum, or raise."""
    r = f.grid.xi_norm()
    mag = np.abs(f.coeffs)
    scale = float(mag.max())
    if scale == 0.0:
        raise SpectrumSupportError("field is identically zero")
    active = mag > tol * scale
    active[(0,) * f.grid.dim] = False
    if not active.any():
        raise SpectrumSupportError("field carries only a mean")
    radii = r[active]
    for j in cutoff.j_range:
        if np.all((radii > SHELL_LO * 2.0**j) & (radii < SHELL_HI * 2.0**j)):
            return j
    raise SpectrumSupportError(
        "spectrum is not confined to a single dyadic annulus"
    )


def bernstein_check(f, p, q, cutoff):
    """Frequency-localized norm comparison on one shell.

    Returns (||f||_{L^p}, ratio) with ratio = ||f||_{L^p} divided by
    2^{j n (1/q - 1/p)} ||f||_{L^q}; boundedness of the ratio over j is
    the testable content of the inequality.
    """
    if q > p:
        raise ParameterError(f"need q <= p, got q={q} > p={p}")
    j = _detect_shell(f, cutoff)
    n = f.grid.dim
    lhs = f.lp_norm(p)
    inv_q = 0.0 if q == math.inf else 1.0 / q
    inv_p = 0.0 if p == math.inf else 1.0 / p
    rhs = 2.0 ** (j * n * (inv_q - inv_p)) * f.lp_norm(q)
    if rhs == 0.0:
        raise SpectrumSupportError("reference norm vanished")
    return lhs, lhs / rhs


def derived_exponents(theta, theta1, p, q, n):
    """The three regularity exponents the product estimate couples."""
    s0 = 3.0 - 3.0 * theta - theta1 + n / p
    s1 = 2.0 - 2.0 * theta - theta1 + n / p
    s2 = 2.0 - theta - theta1 + n / q
    return s0, s1, s2


def check_product_hypotheses(p, q, theta, theta1, n):
    p_low = 6.0 * n / (5.0 * n + theta1)
    if not p > p_low:
        raise HypothesisError(
            "p > 6n/(5n + theta1)",
            f"p={p} must exceed {p_low:.4f} (n={n}, theta1={theta1})",
        )
    p_conj = math.inf if p <= 1.0 else p / (p - 1.0)
    if not (p <= q <= p_conj):
        raise HypothesisError(
            "p <= q <= p/(p-1)",
            f"need p <= q <= p'={p_conj:.4f}, got p={p}, q={q}",
        )
    lower = max(1.0, 1.0 - n / 2.0 - theta1 / 2.0 + n / p)
    upper = 1.0 + (n - theta1) / 3.0
    if not (lower < theta < upper):
        raise HypothesisError(
            "max(1, 1 - n/2 - theta1/2 + n/p) < theta < 1 + (n - theta1)/3",
            f"theta={theta} outside ({lower:.4f}, {upper:.4f})",
        )


def product_estimate_check(f, g, params, cutoff):
    """Empirical ratio for the drift-product estimate.

    params = (p, q, theta, theta1, rho1, rho2).  Returns
    ||f G(g)|| / (||f|| ||g||) in the exponent bookkeeping of the
    estimate; the constant is existential, so only stability of this
    ratio across ensembles and refinements is checkable.
    """
    p, q, theta, theta1, rho1, rho2 = params
    n = f.grid.dim
    check_product_hypotheses(p, q, theta, theta1, n)
    s0, s1, s2 = derived_exponents(theta, theta1, p, q, n)
    drift = g_kernel(g, theta1)
    num = max(
        besov_norm(pointwise_product(f, comp, dealias=True),
                   BesovParams(s0 + rho1 + rho2, p), cutoff)
        for comp in drift
    )
    if num == 0.0:
        return 0.0
    den_f = besov_norm(f, BesovParams(s1 + rho1, p), cutoff)
    den_g = besov_norm(g, BesovParams(s2 + rho2, q), cutoff)
    if den_f == 0.0 or den_g == 0.0:
        raise SpectrumSupportError("denominator norm vanished with nonzero product")
    return num / (den_f * den_g)
