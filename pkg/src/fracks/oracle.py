"""Extended-precision oracles for the scalar special functions.

Everything here runs through mpmath at >= 50 decimal digits and is
deliberately independent of the fast float paths in ``specfun``: the
series oracle re-derives each term with adaptive working precision, and
``ml_spectral_mp`` evaluates E_{alpha,beta}(-x) through the real
spectral-density representation

    t^{beta-1} E_{alpha,beta}(-t^alpha) = int_0^inf e^{-r t} rho(r) dr,
    rho(r) = (1/pi) r^{alpha-beta} [r^alpha sin(pi beta)
             + sin(pi (beta-alpha))] / (r^{2alpha} + 2 r^alpha cos(pi alpha) + 1),

which is a positive, oscillation-free integral (0 < alpha < 1,
alpha <= beta <= 1).  The two routes cross-check each other wherever the
series is affordable; the frozen validation table under
``data/ml_oracle.tsv`` is produced by ``write_oracle_table``.

These routines are used by the test suite and the table generator, not
by the solver hot paths.
"""

import os

import mpmath as mp

from .errors import QuadratureError, SeriesRangeError

TABLE_NAME = "ml_oracle.tsv"


def _series_cancel_digits(alpha, x):
    """Decimal digits lost to cancellation when summing E_{a,b}(-x).

    The largest term of the alternating series has magnitude close to
    exp(x^{1/alpha}), mirroring the exp(-x) series.
    """
    if x <= 1.0:
        return 0
    return int(0.4343 * float(x) ** (1.0 / float(alpha)) * 1.15) + 8


def ml_series_mp(alpha, beta, x, dps=50, max_cancel_digits=3000):
    """E_{alpha,beta}(-x) by direct summation at adaptive precision.

    Raises SeriesRangeError when the required working precision would be
    absurd (large x with small alpha); callers fall back to the spectral
    representation there.
    """
    cancel = _series_cancel_digits(alpha, x)
    if cancel > max_cancel_digits:
        raise SeriesRangeError(
            f"series for E_({alpha},{beta})(-{x}) needs ~{cancel} guard digits"
        )
    wdps = dps + 15 + cancel
    with mp.workdps(wdps):
        a, b, z = mp.mpf(alpha), mp.mpf(beta), -mp.mpf(x)
        total = mp.mpf(0)
        term_mag_floor = mp.mpf(10) ** (-(dps + 10))
        k = 0
        decreasing = 0
        prev_mag = mp.inf
        while True:
            term = z**k / mp.gamma(a * k + b)
            total += term
            mag = abs(term)
            decreasing = decreasing + 1 if mag < prev_mag else 0
            prev_mag = mag
            if decreasing >= 4 and mag < term_mag_floor * max(1, abs(total)):
                break
            k += 1
            if k > 200000:
                raise SeriesRangeError("series did not settle in 2e5 terms")
        return +total


def _spectral_density(alpha, beta, r):
    num = r ** (alpha - beta) * (
        r**alpha * mp.sinpi(beta) + mp.sinpi(beta - alpha)
    )
    den = r ** (2 * alpha) + 2 * r**alpha * mp.cospi(alpha) + 1
    return num / (den * mp.pi)


def ml_spectral_mp(alpha, beta, x, dps=50):
    """E_{alpha,beta}(-x) via the spectral-density integral.

    Valid for 0 < alpha < 1, alpha <= beta <= 1, x > 0.  Substituting
    v = r T with T = x^{1/alpha} gives

        E_{alpha,beta}(-x) = T^{-beta} int_0^inf e^{-v} rho(v/T) dv.
    """
    if not (0 < alpha < 1):
        raise ValueError("spectral representation needs 0 < alpha < 1")
    if not (alpha <= beta <= 1):
        raise ValueError("spectral representation needs alpha <= beta <= 1")
    if x <= 0:
        raise ValueError("x must be positive")

    def attempt(wdps, maxdegree):
        with mp.workdps(wdps):
            a, b = mp.mpf(alpha), mp.mpf(beta)
            T = mp.mpf(x) ** (1 / a)

            def f(v):
                return mp.e**-v * _spectral_density(a, b, v / T)

            pts = {mp.mpf(1), mp.mpf(10), mp.mpf(40)}
            # near-minimum of the denominator at r* (alpha > 1/2)
            if mp.cospi(a) < 0:
                rstar = (-mp.cospi(a)) ** (1 / a)
                for s in (mp.mpf("0.5"), 1, 2):
                    v = rstar * T * s
                    if v < 40:
                        pts.add(v)
            if T < 40:
                pts.add(T)
            points = sorted(pts) + [mp.inf]

            # the density behaves like r^{alpha-beta} at the origin; the
            # substitution v = w^q with q = 1/(1+alpha-beta) removes it
            q = 1 / (1 + a - b)
            first = points[0]

            def f0(w):
                v = w**q
                return f(v) * q * w ** (q - 1)

            val0, err0 = mp.quad(
                f0, [mp.mpf(0), first ** (1 / q)], error=True, maxdegree=maxdegree
            )
            val1, err1 = mp.quad(f, points, error=True, maxdegree=maxdegree)
            return (val0 + val1) * T**-b, err0 + err1

    val, err = attempt(dps + 30, 8)
    tol = mp.mpf(10) ** (-(dps + 3))
    if err <= tol * max(1, abs(val)):
        return +val
    val, err = attempt(dps + 55, 10)
    if err <= tol * max(1, abs(val)):
        return +val
    raise QuadratureError(
        f"spectral quadrature error {mp.nstr(err, 5)} too large "
        f"for E_({alpha},{beta})(-{x})"
    )


def ml_oracle_mp(alpha, beta, x, dps=50):
    """Best-effort extended-precision E_{alpha,beta}(-x), x >= 0."""
    with mp.workdps(dps + 15):
        if x == 0:
            return 1 / mp.gamma(mp.mpf(beta))
        if alpha == 1 and beta == 1:
            return mp.e ** -mp.mpf(x)
    try:
        return ml_series_mp(alpha, beta, x, dps=dps, max_cancel_digits=700)
    except SeriesRangeError:
        return ml_spectral_mp(alpha, beta, x, dps=dps)


def mainardi_series_mp(alpha, z, dps=50):
    """M_alpha(z) = sum_n (-z)^n / (n! Gamma(1 - alpha(1+n))) in mp arithmetic.

    The alternating form is the one that is nonnegative on z >= 0 and
    carries the moment and Laplace identities; writing the series with
    z^n and evaluating at -z is the same thing.  rgamma handles the
    coefficient poles (they contribute exact zero terms).
    """
    if not (0 < alpha < 1):
        raise ValueError("mainardi needs 0 < alpha < 1")
    zf = float(z)
    cancel = 0
    if zf > 1.0:
        cancel = int(0.4343 * zf ** (1.0 / (1.0 - float(alpha))) * 1.2) + 8
    wdps = dps + 15 + cancel
    with mp.workdps(wdps):
        a, zz = mp.mpf(alpha), mp.mpf(z)
        if zz == 0:
            return +mp.rgamma(1 - a)
        total = mp.mpf(0)
        floor = mp.mpf(10) ** (-(dps + 10))
        fact = mp.mpf(1)
        zpow = mp.mpf(1)
        decreasing = 0
        prev_mag = mp.inf
        n = 0
        while True:
            term = zpow / fact * mp.rgamma(1 - a * (1 + n))
            total += term
            mag = abs(term)
            if mag > 0:
                # poles of the coefficient gamma give exact zero terms;
                # they must not reset the settling detector
                decreasing = decreasing + 1 if mag < prev_mag else 0
                prev_mag = mag
                if n > 4 and decreasing >= 4 and mag < floor * max(1, abs(total)):
                    break
            n += 1
            fact *= n
            zpow *= -zz
            if n > 100000:
                raise SeriesRangeError("mainardi series did not settle")
        return +total


def mainardi_support_mp(alpha, tail=50.0):
    """z beyond which M_alpha(z) < ~exp(-tail): stretched-exponential cutoff."""
    a = float(alpha)
    b = (1.0 - a) * a ** (a / (1.0 - a))
    return (tail / b) ** (1.0 - a)


def laplace_mainardi_mp(alpha, lam, weighted=False, dps=30):
    """int_0^inf M_alpha(t) e^{-t lam} dt, or with weight alpha*t when asked.

    Equals E_alpha(-lam) (resp. E_{alpha,alpha}(-lam)); evaluated here
    by honest quadrature of the series so the identity can be *tested*.
    """
    zcut = mainardi_support_mp(alpha, tail=2.3 * (dps + 10))
    with mp.workdps(dps + 10):
        a, s = mp.mpf(alpha), mp.mpf(lam)

        if weighted:
            def f(t):
                return a * t * mainardi_series_mp(alpha, t, dps=dps + 5) * mp.e ** (-t * s)
        else:
            def f(t):
                return mainardi_series_mp(alpha, t, dps=dps + 5) * mp.e ** (-t * s)

        pts = [mp.mpf(0), mp.mpf(1), mp.mpf(min(zcut, 4.0)), mp.mpf(zcut)]
        pts = sorted(set(p for p in pts if p <= zcut))
        val = mp.quad(f, pts)
        return +val


# ---------------------------------------------------------------------------
# frozen validation table

def default_table_points():
    """(alpha, beta, x) triples for the shipped table.

    Log-spaced x across [1e-3, 1e6] for each family, both second
    indices the operator calculus uses (beta = 1 and beta = alpha),
    plus the classical alpha = 1 row computed from the exponential.
    """
    alphas = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
    xs = [0.0] + [10 ** (e / 2.0) for e in range(-6, 13)]  # 1e-3 .. 1e6
    pts = []
    for a in alphas:
        for b in (1.0, a):
            for x in xs:
                pts.append((a, b, x))
    for x in xs:
        pts.append((1.0, 1.0, x))
    return pts


def oracle_value_str(alpha, beta, x, dps=50):
    """Cross-checked 50-digit oracle value as a decimal string."""
    with mp.workdps(dps + 10):
        if x == 0:
            v = 1 / mp.gamma(mp.mpf(beta))
        elif alpha == 1.0:
            if beta != 1.0:
                raise ValueError("alpha=1 rows only shipped for beta=1")
            v = mp.e ** -mp.mpf(x)
        else:
            v = ml_spectral_mp(alpha, beta, x, dps=dps)
            try:
                vs = ml_series_mp(alpha, beta, x, dps=dps, max_cancel_digits=700)
            except SeriesRangeError:
                vs = None
            if vs is not None:
                agree = abs(v - vs) / max(1, abs(v))
                if agree > mp.mpf(10) ** (-(dps - 4)):
                    raise QuadratureError(
                        f"oracle routes disagree at ({alpha},{beta},{x}): "
                        f"{mp.nstr(agree, 3)}"
                    )
        return mp.nstr(v, dps, strip_zeros=False)


def write_oracle_table(path, points=None, dps=50, log=None):
    points = points if points is not None else default_table_points()
    lines = []
    for i, (a, b, x) in enumerate(points):
        s = oracle_value_str(a, b, x, dps=dps)
        lines.append(f"{a!r} {b!r} {x!r} {s}")
        if log is not None and (i + 1) % 20 == 0:
            log(f"{i + 1}/{len(points)} rows")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return len(lines)


def table_path():
    return os.path.join(os.path.dirname(__file__), "data", TABLE_NAME)


def load_oracle_table(path=None):
    """Rows of (alpha, beta, x, value) as floats; value loses digits but
    keeps far more than the 1e-10 comparisons need."""
    rows = []
    with open(path or table_path(), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b, x, v = line.split()
            rows.append((float(a), float(b), float(x), float(v)))
    return rows
