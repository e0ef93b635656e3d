"""Picard iteration for the mild density-signal pair and its scaling probes.

The solver iterates the Duhamel form of the coupled system: the density
carries its Mittag-Leffler linear flow plus the chemotactic bilinear
correction, the signal its damped linear flow plus the memory integral of
the freshly updated density.  Norms throughout are sup-in-time Besov norms
over the mesh nodes, matching the spaces the contraction argument runs in.

homogeneous_data synthesizes power-law spectra whose phases are constant
along dyadic mode chains, so dilating the lattice by an integer factor maps
the spectrum onto itself exactly; selfsim_check measures how far an evolved
pair drifts from that covariance.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .besov import BesovParams, besov_norm, build_cutoff, derived_exponents
from .duhamel import History, TimeMesh, duhamel_B, duhamel_T
from .errors import (
    BlowUpError,
    GridError,
    InsufficientRangeError,
    MeshError,
    ParameterError,
    ScalingError,
)
from .spectral import SpectralField, dft_forward, ml_operator

log = logging.getLogger(__name__)

SMALLNESS_MARGIN = 0.99      # eps sits just under the 1/(2K) contraction bound
DEFAULT_MAX_ITERS = 40
PERTURB_SCALE = 0.05         # perturbed-start amplitude relative to the data norms
NODE_MATCH_RTOL = 1.0e-8

@dataclass(frozen=True)
class EmpiricalConstants:
    """Operator-norm calibrations entering the smallness admission test.

    c1 and c2 bound the two linear flows in the solution norms, c_t the
    density-to-signal memory map, k_b the bilinear term.  The defaults were
    measured over critical-slope band-limited ensembles at the reference
    configuration (1-D, N=256, half width pi, graded meshes, alpha=0.8,
    theta=1.1, theta1=0.5, gamma=0.5, p=q=2) by the operator studies in
    the estimates module.  At p=2 the linear multipliers contract every
    shell with the sup attained at time zero, so c1 and c2 are exactly
    one; c_t and k_b are ensemble maxima rounded up, never operator
    norms, so admission errs on the small side.
    """
    c1: float = 1.0
    c2: float = 1.0
    c_t: float = 0.74
    k_b: float = 0.85


DEFAULT_CONSTANTS = EmpiricalConstants()


@dataclass(frozen=True)
class IterationConfig:
    """Iteration budget, stopping threshold and the two solution norms.

    besov_eta and besov_v are the shell norms the iterates are measured in;
    both carry r=inf because the spaces take sups over shells.
    """
    max_iters: int
    tol_rel: float
    besov_eta: BesovParams
    besov_v: BesovParams

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol_rel > 0.0:
            raise ParameterError(f"tol_rel must be positive, got {self.tol_rel}")
        for name in ("besov_eta", "besov_v"):
            if not math.isinf(getattr(self, name).r):
                raise ParameterError(f"{name} needs r=inf (sup over shells)")

    @classmethod
    def from_model(cls, params, n, p=2.0, q=2.0,
                   max_iters=DEFAULT_MAX_ITERS, tol_rel=1.0e-9):
        """Norm exponents derived from the model indices:
        2 - 2 theta - theta1 + n/p for the density,
        2 - theta - theta1 + n/q for the signal.
        """
        _, s1, s2 = derived_exponents(params.theta, params.theta1, p, q, n)
        return cls(max_iters, tol_rel,
                   BesovParams(s1, p, math.inf), BesovParams(s2, q, math.inf))


@dataclass
class IterationTrace:
    """Norm and difference record of one Picard run.

    norms_* hold the sup-in-time solution norms of iterates 1..M, diffs_*
    the successive difference norms, ratios the consecutive quotients of
    the combined differences.  converged stays False when the budget ran
    out before the differences dropped below the threshold.
    """
    norms_eta: list
    norms_v: list
    diffs_eta: list
    diffs_v: list
    ratios: list
    converged: bool = False

    def __post_init__(self):
        m = len(self.norms_eta)
        consistent = (
            len(self.norms_v) == m
            and len(self.diffs_eta) == max(m - 1, 0)
            and len(self.diffs_v) == len(self.diffs_eta)
            and len(self.ratios) == max(len(self.diffs_eta) - 1, 0)
        )
        if not consistent:
            raise ParameterError("trace lists have inconsistent lengths")

    def __len__(self):
        return len(self.norms_eta)

    def contraction_estimate(self):
        """Geometric mean of the later half of the ratio record."""
        if not self.ratios:
            return math.nan
        tail = [r for r in self.ratios[len(self.ratios) // 2:] if r > 0.0]
        if not tail:
            return 0.0
        return float(np.exp(np.mean(np.log(tail))))

    def rows(self):
        """Per-iterate tuples (iter, norm_eta_X, norm_v_Y, diff_eta, diff_v, ratio)."""
        out = []
        for i in range(len(self.norms_eta)):
            de = self.diffs_eta[i - 1] if i >= 1 else math.nan
            dv = self.diffs_v[i - 1] if i >= 1 else math.nan
            ra = self.ratios[i - 2] if i >= 2 else math.nan
            out.append((i + 1, self.norms_eta[i], self.norms_v[i], de, dv, ra))
        return out


# ---------------------------------------------------------------------------
# Picard iteration.

def linear_evolution(eta0, v0, params, mesh):
    """Both linear flows sampled at every mesh node, as one paired history.

    The density rides the Mittag-Leffler family of its fractional
    dissipation, the signal the gamma-shifted family; the pair seeds the
    iteration and is also the closed-form solution of the decoupled system.
    """
    hist = History(eta0.grid, mesh)
    for t in mesh.nodes:
        e = ml_operator(eta0, float(t), params, family="E_alpha",
                        diffusivity=params.D_eta)
        w = ml_operator(v0, float(t), params, family="E_alpha",
                        gamma_shift=True, diffusivity=params.D_v)
        hist.append(e, w)
    return hist


def _sup_norm(fields, bp, cutoff):
    return max(besov_norm(f, bp, cutoff) for f in fields)


def _sup_diff(a, b, bp, cutoff):
    return max(
        besov_norm(x.with_coeffs(x.coeffs - y.coeffs), bp, cutoff)
        for x, y in zip(a, b)
    )


def _all_finite(fields):
    return all(np.isfinite(f.coeffs).all() for f in fields)


def _perturbation(grid, bp, cutoff, amplitude, seed):
    """Band-limited real field of the requested Besov size."""
    rng = np.random.default_rng(seed)
    f = dft_forward(rng.standard_normal(grid.shape), grid)
    keep = grid.xi_norm() <= math.pi * grid.n_points / (6.0 * grid.half_width)
    coeffs = np.where(keep, f.coeffs, 0.0)
    coeffs[(0,) * grid.dim] = 0.0
    f = f.with_coeffs(coeffs)
    base = besov_norm(f, bp, cutoff)
    if base == 0.0 or amplitude == 0.0:
        return f.with_coeffs(np.zeros_like(coeffs))
    return f.with_coeffs(f.coeffs * (amplitude / base))


def picard_solve(eta0, v0, params, mesh, config, start="linear", perturb_seed=1):
    """Iterate the mild system on the mesh until the sup-in-time difference
    norms of both components drop below tol_rel.

    Each sweep rebuilds the density from its linear flow plus the bilinear
    memory term of the previous pair, then the signal from its linear flow
    plus the memory integral of the fresh density.  start selects the first
    iterate: the linear pair, the zero pair, or the linear pair offset by a
    seeded band-limited perturbation (the knob the uniqueness probe turns).

    Returns (eta, v, trace).  The density history also carries the signal
    snapshots so it can seed further Duhamel evaluations; the signal history
    repeats the signal fields in its primary slot for uniform node access.
    Non-finite iterates raise BlowUpError with the iterate index; running
    out of iterations returns the trace with converged=False.
    """
    if eta0.grid != v0.grid:
        raise GridError("initial fields live on different grids")
    if not (eta0.is_real() and v0.is_real()):
        raise ParameterError("initial fields must be real-valued")
    grid = eta0.grid
    cutoff = build_cutoff(grid)
    n_nodes = mesh.nodes.size
    lin = linear_evolution(eta0, v0, params, mesh)
    lin_etas = [lin.eta(i) for i in range(n_nodes)]
    lin_vs = [lin.v(i) for i in range(n_nodes)]

    if start == "linear":
        etas, vs = list(lin_etas), list(lin_vs)
    elif start == "zero":
        z = eta0.with_coeffs(np.zeros(grid.shape, dtype=np.complex128))
        etas, vs = [z] * n_nodes, [z] * n_nodes
    elif start == "perturbed":
        amp = PERTURB_SCALE * max(
            besov_norm(eta0, config.besov_eta, cutoff),
            besov_norm(v0, config.besov_v, cutoff),
        )
        pe = _perturbation(grid, config.besov_eta, cutoff, amp, perturb_seed)
        pv = _perturbation(grid, config.besov_v, cutoff, amp, perturb_seed + 1)
        etas = [f.with_coeffs(f.coeffs + pe.coeffs) for f in lin_etas]
        vs = [f.with_coeffs(f.coeffs + pv.coeffs) for f in lin_vs]
    else:
        raise ParameterError(f"unknown start {start!r}")

    with np.errstate(over="ignore", invalid="ignore"):
        norms_eta = [_sup_norm(etas, config.besov_eta, cutoff)]
        norms_v = [_sup_norm(vs, config.besov_v, cutoff)]
    diffs_eta, diffs_v, ratios = [], [], []
    converged = False

    for step in range(config.max_iters):
        iterate = step + 2
        cur = History(grid, mesh)
        for e, w in zip(etas, vs):
            cur.append(e, w)
        # overflow on a diverging run is diagnosed below, not via warnings
        with np.errstate(over="ignore", invalid="ignore"):
            new_etas = []
            eta_hist = History(grid, mesh)
            for i in range(n_nodes):
                b = duhamel_B(cur, mesh, params, i)
                e = lin_etas[i].with_coeffs(lin_etas[i].coeffs + b.coeffs)
                new_etas.append(e)
                eta_hist.append(e)
            new_vs = []
            for i in range(n_nodes):
                m = duhamel_T(eta_hist, mesh, params, i)
                new_vs.append(lin_vs[i].with_coeffs(lin_vs[i].coeffs + m.coeffs))
        if not (_all_finite(new_etas) and _all_finite(new_vs)):
            raise BlowUpError(iterate)
        with np.errstate(over="ignore", invalid="ignore"):
            ne = _sup_norm(new_etas, config.besov_eta, cutoff)
            nv = _sup_norm(new_vs, config.besov_v, cutoff)
            de = _sup_diff(new_etas, etas, config.besov_eta, cutoff)
            dv = _sup_diff(new_vs, vs, config.besov_v, cutoff)
        if not all(map(math.isfinite, (ne, nv, de, dv))):
            raise BlowUpError(iterate, f"iterate {iterate} norms are non-finite")
        if diffs_eta:
            prev = max(diffs_eta[-1], diffs_v[-1])
            step_d = max(de, dv)
            ratios.append(step_d / prev if prev > 0.0 else 0.0)
        norms_eta.append(ne)
        norms_v.append(nv)
        diffs_eta.append(de)
        diffs_v.append(dv)
        etas, vs = new_etas, new_vs
        if de <= config.tol_rel and dv <= config.tol_rel:
            converged = True
            break

    trace = IterationTrace(norms_eta, norms_v, diffs_eta, diffs_v, ratios, converged)
    eta_out = History(grid, mesh)
    v_out = History(grid, mesh)
    for e, w in zip(etas, vs):
        eta_out.append(e, w)
        v_out.append(w)
    return eta_out, v_out, trace


# ---------------------------------------------------------------------------
# Smallness admission and the uniqueness probe.

def smallness_check(eta0, v0, config, k_empirical, constants=None):
    """Admission test for the contraction regime.

    eps is set just under 1/(2 k_empirical); the data pass when
    c1 * |eta0| <= eps / (4 c_t) and c2 * |v0| <= eps / 2 in the solution
    norms.  Returns (eps, admitted).
    """
    if not k_empirical > 0.0:
        raise ParameterError(f"k_empirical must be positive, got {k_empirical}")
    con = constants if constants is not None else DEFAULT_CONSTANTS
    eps = SMALLNESS_MARGIN / (2.0 * k_empirical)
    cutoff = build_cutoff(eta0.grid)
    n_eta = besov_norm(eta0, config.besov_eta, cutoff)
    n_v = besov_norm(v0, config.besov_v, cutoff)
    admitted = (con.c1 * n_eta <= eps / (4.0 * con.c_t)
                and con.c2 * n_v <= eps / 2.0)
    return eps, bool(admitted)


def uniqueness_probe(eta0, v0, params, mesh, config, n_starts):
    """Max pairwise sup-norm distance between Picard limits from distinct
    first iterates: the linear pair, the zero pair, then seeded
    perturbations of the linear pair.

    A start that blows up or fails to converge is excluded from the
    comparison and logged; if none survive the blow-up is re-raised for
    iterate zero.
    """
    if n_starts < 1:
        raise ParameterError(f"n_starts must be >= 1, got {n_starts}")
    starts = [("linear", 0), ("zero", 0)]
    for k in range(max(n_starts - 2, 0)):
        starts.append(("perturbed", 2 * k + 1))
    runs = []
    for label, seed in starts[:n_starts]:
        try:
            eta_h, _, trace = picard_solve(
                eta0, v0, params, mesh, config, start=label, perturb_seed=seed
            )
        except BlowUpError as exc:
            log.warning("picard start %r blew up at iterate %d; excluded",
                        label, exc.iteration)
            continue
        if not trace.converged:
            log.warning("picard start %r did not converge within %d iterates; excluded",
                        label, config.max_iters)
            continue
        runs.append(eta_h)
    if not runs:
        raise BlowUpError(0, "no Picard start converged; nothing to compare")
    cutoff = build_cutoff(eta0.grid)
    n_nodes = mesh.nodes.size
    worst = 0.0
    for a in range(len(runs)):
        for b in range(a + 1, len(runs)):
            ha, hb = runs[a], runs[b]
            de = max(
                besov_norm(
                    ha.eta(i).with_coeffs(ha.eta(i).coeffs - hb.eta(i).coeffs),
                    config.besov_eta, cutoff)
                for i in range(n_nodes)
            )
            dv = max(
                besov_norm(
                    ha.v(i).with_coeffs(ha.v(i).coeffs - hb.v(i).coeffs),
                    config.besov_v, cutoff)
                for i in range(n_nodes)
            )
            worst = max(worst, de, dv)
    return worst


# ---------------------------------------------------------------------------
# Discretely homogeneous data and the self-similarity defect.

def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _log_phases(grid, cycles):
    """Log-periodic phase angle lam * log|xi| with lam = 2 pi cycles / log 2,
    odd under xi -> -xi.

    The induced symbol |xi|^(degree + i lam) is smooth away from the origin
    and picks up the factor exp(2 pi i cycles) = 1 under xi -> 2 xi, so
    dyadic dilation covariance is exact while the spectral envelope stays
    smooth enough for mode sums to approximate their continuum integrals.
    """
    wn = grid.axis_wavenumbers()
    comps = np.meshgrid(*([wn] * grid.dim), indexing="ij")
    sign = np.zeros(grid.shape)
    for c in comps:
        sign = np.where(sign == 0.0, np.sign(c), sign)
    r = grid.xi_norm()
    lam = 2.0 * math.pi * cycles / math.log(2.0)
    return lam * np.log(np.where(r > 0.0, r, 1.0)) * sign


def homogeneous_data(grid, degree, amplitude=1.0, cycles=1, inner=None, outer=None):
    """Real field with a truncated power-law spectrum |xi|^degree and a
    log-periodic phase twist.

    Between the two cutoff ramps the coefficients sample the symbol
    amplitude * |xi|^(degree + i lam) with lam = 2 pi cycles / log 2, so
    c(2 xi) = 2^degree c(xi) exactly, phases included: the lattice form of
    homogeneity under dyadic dilation.  The inner ramp rises over
    [inner, 2 inner], the outer rolls off over [outer, 1.5 outer].  Cutoffs
    are physical radii; the defaults truncate at the grid scale, two
    lattice spacings for inner and a quarter of the axis bandwidth for
    outer.  The coefficients carry the Fourier measure (2 half_width)^-dim,
    so a refinement study that doubles n_points and half_width together
    sees the same physical field on a finer xi lattice wherever the
    cutoffs agree, which is what makes the bilinear mode sums converge.

    Returns (field, meta); meta["band"] is the clean interval between the
    ramps in the form selfsim_check expects.
    """
    xi_min = math.pi / grid.half_width
    if inner is None:
        inner = 2.0 * xi_min
    if outer is None:
        outer = xi_min * grid.n_points / 8.0
    if not 2.0 * inner < outer:
        raise ParameterError(f"cutoffs leave no clean band: inner={inner}, outer={outer}")
    r = grid.xi_norm()
    radial = np.where(r > 0.0, r, 1.0) ** degree
    envelope = _smoothstep((r - inner) / inner) * (
        1.0 - _smoothstep((r - outer) / (0.5 * outer))
    )
    measure = (2.0 * grid.half_width) ** (-grid.dim)
    coeffs = amplitude * measure * radial * envelope * np.exp(1j * _log_phases(grid, cycles))
    coeffs[r == 0.0] = 0.0
    wn = grid.axis_wavenumbers()
    nyq = np.abs(wn) == grid.nyquist    # no Hermitian partner on the lattice
    for j in range(grid.dim):
        sel = [slice(None)] * grid.dim
        sel[j] = nyq
        coeffs[tuple(sel)] = 0.0
    meta = {"inner": inner, "outer": outer, "band": (2.0 * inner, outer),
            "degree": degree, "cycles": cycles}
    return SpectralField(grid, coeffs), meta


def scaling_mesh(t_final, factor, panels_per_factor, n_factors):
    """Geometric mesh closed under t -> factor * t.

    Every positive node maps onto the node panels_per_factor places up, so
    a rescaled history can be compared node against node without
    interpolating in time.
    """
    if not t_final > 0.0:
        raise ParameterError(f"t_final must be positive, got {t_final}")
    if not factor > 1.0:
        raise ParameterError(f"factor must exceed 1, got {factor}")
    if panels_per_factor < 1 or n_factors < 1:
        raise ParameterError("panel counts must be >= 1")
    panels = panels_per_factor * n_factors
    ratio = factor ** (1.0 / panels_per_factor)
    start = t_final / factor**n_factors
    nodes = np.concatenate(([0.0], start * ratio ** np.arange(panels + 1)))
    nodes[-1] = t_final
    return TimeMesh.from_nodes(nodes)


def scaling_degrees(params, dim):
    """Symbol powers of transform-side self-similar data, density then signal.

    A value-space profile homogeneous of degree -a has a transform
    homogeneous of degree a - dim; the dimension shift is forced on the
    lattice as well, through the parity structure of the bilinear mode
    sums.  selfsim_check compares coefficients with these same gains, so
    data synthesized at these powers is the family the coupled evolution
    can actually preserve.
    """
    a_eta = 2.0 * params.theta + params.theta1 - 2.0
    a_v = params.theta + params.theta1 - 2.0
    return a_eta - dim, a_v - dim


def _matched_nodes(mesh, factor):
    nodes = mesh.nodes
    pairs = []
    for i in range(1, nodes.size):
        target = nodes[i] * factor
        if target > nodes[-1] * (1.0 + NODE_MATCH_RTOL):
            break
        j = int(np.searchsorted(nodes, target))
        best, err = None, math.inf
        for cand in (j - 1, j):
            if 0 <= cand < nodes.size and abs(nodes[cand] - target) < err:
                best, err = cand, abs(nodes[cand] - target)
        if best is not None and err <= NODE_MATCH_RTOL * target:
            pairs.append((i, best))
    return pairs


def _scaling_defect(hist, pairs, sigma, exponent, band):
    grid = hist.grid
    n = grid.n_points
    wn = grid.axis_wavenumbers().astype(np.int64)
    comps = np.meshgrid(*([wn] * grid.dim), indexing="ij")
    valid = np.zeros(grid.shape, dtype=bool)
    for c in comps:
        valid |= c != 0
    for c in comps:
        valid &= np.abs(sigma * c) <= n // 2 - 1
    if band is not None:
        lo, hi = band
        r = grid.xi_norm()
        valid &= r >= lo * (1.0 - 1.0e-12)
        valid &= sigma * r <= hi * (1.0 + 1.0e-12)
    if not valid.any():
        raise InsufficientRangeError("no comparable mode pairs inside the band")
    src = tuple(np.mod(sigma * c, n)[valid] for c in comps)
    gain = float(sigma) ** exponent
    worst = 0.0
    for i, j in pairs:
        big = hist.eta(i).coeffs[src]
        small = hist.eta(j).coeffs[valid]
        num = float(np.linalg.norm(big - gain * small))
        den = float(np.linalg.norm(big))
        if den == 0.0:
            if num > 0.0:
                worst = math.inf
            continue
        worst = max(worst, num / den)
    return worst


def selfsim_check(eta, v, params, sigma, band=None):
    """Relative defect of the rescaling that fixes solutions of the
    undamped system.

    In value space the invariant family is eta(x, t) =
    sigma^(2 theta + theta1 - 2) eta(sigma x, sigma^(theta/alpha) t) and the
    signal analogue with exponent theta + theta1 - 2.  Coefficients sample
    the continuum transform, whose dilation carries the measure factor
    sigma^(-dim), so the check compares the coefficient at (sigma k, t)
    against sigma^(a - dim) times the one at (k, sigma^(theta/alpha) t)
    with the gains of scaling_degrees; the defect is the worst relative l2
    mismatch over all positive nodes whose rescaled time lands on another
    node.  band=(lo, hi) restricts to pairs with |xi_k| >= lo and
    sigma |xi_k| <= hi, which is how callers exclude the synthesis ramps
    of homogeneous_data.  Returns (err_eta, err_v).
    """
    if params.gamma != 0.0:
        raise ScalingError(
            f"rescaling needs gamma=0; the damped system (gamma={params.gamma}) "
            "has no scaling symmetry"
        )
    s_int = int(round(sigma))
    if not sigma > 0.0 or s_int < 1 or abs(sigma - s_int) > 1.0e-9:
        raise ParameterError(
            f"sigma must be a positive integer for lattice dilation, got {sigma}"
        )
    if eta.mesh is None or v.mesh is None:
        raise ParameterError("histories carry no time mesh; record them with one attached")
    if not np.array_equal(eta.mesh.nodes, v.mesh.nodes):
        raise MeshError("density and signal histories live on different meshes")
    factor = float(s_int) ** (params.theta / params.alpha)
    pairs = _matched_nodes(eta.mesh, factor)
    if not pairs:
        raise InsufficientRangeError(
            "no node maps onto another under the time rescaling; use scaling_mesh"
        )
    deg_eta, deg_v = scaling_degrees(params, eta.grid.dim)
    err_eta = _scaling_defect(eta, pairs, s_int, deg_eta, band)
    err_v = _scaling_defect(v, pairs, s_int, deg_v, band)
    return err_eta, err_v
