"""Periodic pseudospectral calculus on [-L, L)^dim.

Fields live as Fourier series coefficients c_k with values(x) =
sum_k c_k exp(i xi_k . x), xi_k = pi k / L.  Every operator here is a
diagonal multiplier in that basis, so compositions commute exactly and
the whole layer is pure (fields are never mutated in place; threads may
share them freely).

The continuum problem is posed on all of R^n; the torus stands in for
it with L chosen so fields decay below roundoff at the boundary, which
an L-refinement study can confirm.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridError, HypothesisError, ParameterError, SeriesRangeError
from .specfun import MLParams, ml_eval_array, ml_eval_series, series_x_limit

__all__ = [
    "Grid", "SpectralField", "FourierMultiplier", "ModelParams",
    "dft_forward", "dft_inverse", "frac_laplacian", "g_kernel",
    "heat_semigroup", "ml_operator", "divergence", "pointwise_product",
    "save_field", "load_field",
]

SNAPSHOT_MAGIC = "fracks-field"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^dim with 2^m points per axis."""
    dim: int
    n_points: int
    half_width: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.n_points
        if n < 8 or (n & (n - 1)) != 0:
            raise GridError(f"n_points must be a power of two >= 8, got {n}")
        if not (self.half_width > 0.0):
            raise GridError(f"half_width must be positive, got {self.half_width}")

    @property
    def shape(self):
        return (self.n_points,) * self.dim

    @property
    def size(self):
        return self.n_points**self.dim

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.n_points

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    @property
    def nyquist(self):
        return self.n_points // 2

    def axis_points(self):
        return -self.half_width + self.spacing * np.arange(self.n_points)

    def points(self):
        """dim coordinate arrays in meshgrid (ij) layout."""
        x = self.axis_points()
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def axis_wavenumbers(self):
        # fftfreq orders 0..N/2-1, -N/2..-1; Nyquist carried as -N/2
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)

    def xi_component(self, j, zero_nyquist=False):
        """xi_j on the full lattice; odd symbols need the Nyquist plane
        zeroed to keep real fields real."""
        k = self.axis_wavenumbers()
        if zero_nyquist:
            k = np.where(np.abs(k) == self.nyquist, 0.0, k)
        xi = math.pi * k / self.half_width
        shape = [1] * self.dim
        shape[j] = self.n_points
        return xi.reshape(shape)

    def xi_norm(self):
        sq = sum(self.xi_component(j) ** 2 for j in range(self.dim))
        return np.sqrt(np.broadcast_to(sq, self.shape))


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise GridError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )
        if self.coeffs.dtype != np.complex128:
            object.__setattr__(self, "coeffs", self.coeffs.astype(np.complex128))

    def values(self):
        """Real grid-point samples."""
        return np.real(np.fft.ifftn(self.coeffs) * self.grid.size)

    def is_real(self, tol=1e-12):
        v = np.fft.ifftn(self.coeffs) * self.grid.size
        return float(np.max(np.abs(v.imag))) <= tol * max(1.0, float(np.max(np.abs(v.real))))

    def l2_norm(self):
        """Continuum L2 norm; Plancherel form, exact for band-limited fields."""
        return math.sqrt((2.0 * self.grid.half_width) ** self.grid.dim) * float(
            np.linalg.norm(self.coeffs)
        )

    def lp_norm(self, p):
        v = self.values()
        if p == math.inf:
            return float(np.max(np.abs(v)))
        return float((self.grid.cell_volume * np.sum(np.abs(v) ** p)) ** (1.0 / p))

    def mean(self):
        return float(self.coeffs[(0,) * self.grid.dim].real)

    def with_coeffs(self, coeffs):
        return SpectralField(self.grid, coeffs)


def dft_forward(values, grid):
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise GridError(f"value shape {values.shape} does not match grid {grid.shape}")
    return SpectralField(grid, np.fft.fftn(values) / grid.size)


def dft_inverse(f):
    return f.values()


@dataclass(frozen=True)
class FourierMultiplier:
    """Diagonal operator c_k -> symbol(xi_k) c_k with an explicit zero mode."""
    symbol: object                      # callable Grid -> complex array
    zero_mode_value: complex = 1.0

    def apply(self, f):
        sym = np.asarray(self.symbol(f.grid), dtype=np.complex128)
        out = f.coeffs * np.broadcast_to(sym, f.grid.shape).copy()
        zero = (0,) * f.grid.dim
        out[zero] = self.zero_mode_value * f.coeffs[zero]
        return f.with_coeffs(out)

    @staticmethod
    def radial(fn, zero_mode_value=1.0):
        return FourierMultiplier(lambda grid: fn(grid.xi_norm()), zero_mode_value)


@dataclass(frozen=True)
class ModelParams:
    """Indices and physical constants of the aggregation-diffusion system."""
    alpha: float = 0.5
    theta: float = 1.1
    theta1: float = 0.5
    gamma: float = 0.0
    chi: float = 1.0
    kappa: float = 1.0
    D_eta: float = 1.0
    D_v: float = 1.0
    gamma_sign: str = "damped"          # damped: |xi|^theta + gamma; paper: - gamma

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.theta <= 0.0:
            raise ParameterError(f"theta must be positive, got {self.theta}")
        if self.theta1 < 0.0:
            raise ParameterError(f"theta1 must be nonnegative, got {self.theta1}")
        if self.gamma < 0.0:
            raise ParameterError(f"gamma must be nonnegative, got {self.gamma}")
        for name in ("chi", "kappa", "D_eta", "D_v"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be positive")
        if self.gamma_sign not in ("damped", "paper"):
            raise ParameterError(f"gamma_sign must be 'damped' or 'paper', got {self.gamma_sign}")

    def check_admissible(self, p, n):
        """Well-posedness window for integrability p in dimension n."""
        if not (0.0 <= self.theta1 < n):
            raise HypothesisError(
                "0 <= theta1 < n",
                f"theta1 in [0, n) required: theta1={self.theta1}, n={n}",
            )
        lower = max(1.0, 1.0 - n / 2.0 - self.theta1 / 2.0 + n / p)
        upper = 1.0 + (n - self.theta1) / 3.0
        if not (lower < self.theta < upper):
            raise HypothesisError(
                "max(1, 1 - n/2 - theta1/2 + n/p) < theta < 1 + (n - theta1)/3",
                f"theta={self.theta} outside admissible window ({lower:.4f}, {upper:.4f}) "
                f"for p={p}, n={n}, theta1={self.theta1}",
            )
        return lower, upper

    def with_gamma_sign(self, sign):
        return replace(self, gamma_sign=sign)


def frac_laplacian(f, theta):
    if theta < 0.0:
        raise ParameterError(f"theta must be >= 0, got {theta}")
    if theta == 0.0:
        return f
    return FourierMultiplier.radial(lambda r: r**theta, zero_mode_value=0.0).apply(f)


def g_kernel(v, theta1):
    """Chemotactic drift components: symbol i xi_j |xi|^{-theta1}, zero mode 0.

    The mean is quotiented away (homogeneous spaces are defined modulo
    polynomials), hence the zero-mode convention.
    """
    grid = v.grid
    if not (0.0 <= theta1 < grid.dim):
        raise ParameterError(f"theta1 must lie in [0, dim), got {theta1} with dim {grid.dim}")
    r = grid.xi_norm()
    with np.errstate(divide="ignore"):
        radial = np.where(r > 0.0, r ** (-theta1), 0.0)
    out = []
    for j in range(grid.dim):
        sym = 1j * grid.xi_component(j, zero_nyquist=True) * radial
        coeffs = v.coeffs * np.broadcast_to(sym, grid.shape)
        out.append(v.with_coeffs(coeffs))
    return out


def heat_semigroup(f, t, theta, diffusivity=1.0):
    if t < 0.0:
        raise ParameterError(f"t must be >= 0, got {t}")
    if t == 0.0:
        return f
    return FourierMultiplier.radial(
        lambda r: np.exp(-t * diffusivity * r**theta), zero_mode_value=1.0
    ).apply(f)


def _ml_multiplier_values(params, family, t, m):
    """E_{alpha,beta}(-t^alpha m) over an array m that may dip negative
    under the sign-literal gamma convention."""
    beta = 1.0 if family == "E_alpha" else params.alpha
    mlp = MLParams(params.alpha, beta)
    x = t**params.alpha * m
    out = np.empty_like(x)
    pos = x >= 0.0
    if pos.any():
        out[pos], _, _ = ml_eval_array(mlp, x[pos])
    if (~pos).any():
        neg = np.unique(x[~pos])
        if np.min(neg) < -series_x_limit(params.alpha):
            raise SeriesRangeError(
                "sign-literal gamma shift drives the multiplier argument to "
                f"{np.min(neg):.3g}, outside the series range; use gamma_sign='damped' "
                "or reduce t"
            )
        lut = {z: ml_eval_series(mlp, -z) for z in neg}
        out[~pos] = np.vectorize(lut.get)(x[~pos])
    return out


def ml_operator(f, t, params, family="E_alpha", gamma_shift=False, diffusivity=1.0):
    """Apply the time-fractional propagator multiplier.

    family selects the second index (E_alpha for initial data,
    E_alpha_alpha inside memory integrals).  With gamma_shift the
    multiplier argument is -t^alpha (D |xi|^theta +/- gamma) according
    to params.gamma_sign.
    """
    if t < 0.0:
        raise ParameterError(f"t must be >= 0, got {t}")
    if family not in ("E_alpha", "E_alpha_alpha"):
        raise ParameterError(f"unknown family {family!r}")
    grid = f.grid
    m = diffusivity * grid.xi_norm() ** params.theta
    if gamma_shift:
        m = m + params.gamma if params.gamma_sign == "damped" else m - params.gamma
    vals = _ml_multiplier_values(params, family, t, np.ravel(m))
    return f.with_coeffs(f.coeffs * vals.reshape(grid.shape))


def divergence(fields):
    if not fields:
        raise GridError("divergence needs at least one component")
    grid = fields[0].grid
    if len(fields) != grid.dim:
        raise GridError(f"expected {grid.dim} components, got {len(fields)}")
    out = np.zeros(grid.shape, dtype=np.complex128)
    for j, comp in enumerate(fields):
        if comp.grid != grid:
            raise GridError("divergence components live on different grids")
        out += 1j * grid.xi_component(j, zero_nyquist=True) * comp.coeffs
    return fields[0].with_coeffs(out)


def dealias_mask(grid):
    """Two-thirds rule: keep |k| <= N/3 per axis."""
    keep = np.abs(grid.axis_wavenumbers()) <= grid.n_points / 3.0
    mask = np.ones(grid.shape, dtype=bool)
    for j in range(grid.dim):
        shape = [1] * grid.dim
        shape[j] = grid.n_points
        mask &= keep.reshape(shape)
    return mask


def pointwise_product(f, g, dealias=True):
    if f.grid != g.grid:
        raise GridError("pointwise_product needs a common grid")
    prod = f.values() * g.values()
    out = np.fft.fftn(prod) / f.grid.size
    if dealias:
        out = np.where(dealias_mask(f.grid), out, 0.0)
    return f.with_coeffs(out)


# ---------------------------------------------------------------------------
# Snapshot format: one JSON header line, then raw little-endian complex128.

def save_field(f, path, name="field", time=0.0):
    header = {
        "magic": SNAPSHOT_MAGIC,
        "dim": f.grid.dim,
        "n_points": f.grid.n_points,
        "half_width": f.grid.half_width,
        "name": name,
        "time": time,
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    if header.get("magic") != SNAPSHOT_MAGIC:
        raise GridError(f"{path} is not a field snapshot")
    grid = Grid(header["dim"], header["n_points"], header["half_width"])
    coeffs = np.frombuffer(raw, dtype="<c16").reshape(grid.shape)
    return SpectralField(grid, coeffs.copy()), header
