"""Check rows, delimited reports, and the summary index.

Every experiment reduces to a list of CheckRow records with a three-way
verdict: PASS when the measurement meets its bound, FAIL when it breaks
it, INCONCLUSIVE when the data never offered a clean regime to measure
(too few decades of scaling, a series evaluation leaving its validated
range).  Rows serialise to one CSV per experiment with a fixed schema and
fixed float formatting, so identical configuration and seed reproduce the
file byte for byte.

The index groups all recorded checks under the mathematical claim each
one probes; plumbing checks (artifact round-trips, exit plumbing) are
tagged as such rather than forced under a claim.
"""

import csv
import json
import math
import os
from dataclasses import dataclass
from fnmatch import fnmatch

from .errors import ParameterError

VERDICTS = ("PASS", "FAIL", "INCONCLUSIVE")

CSV_HEADER = (
    "check_id",
    "params_json",
    "measured",
    "predicted",
    "rel_dev",
    "ensemble",
    "seed",
    "grid",
    "verdict",
)

CSV_NAME = "checks.csv"
INDEX_NAME = "index.md"

# first match wins; anything unmatched is plumbing
CLAIMS = (
    ("ml-eval/*", "Mittag-Leffler evaluation across series, contour and asymptotic branches"),
    ("mainardi-moments/moment-*", "Mainardi moment identity"),
    ("mainardi-moments/laplace-*", "Mainardi integral form of the relaxation kernels"),
    ("decay-heat/*", "semigroup decay exponents between weighted shell norms"),
    ("decay-ml/gamma-*", "decay of the damped signal family"),
    ("decay-ml/*", "relaxation-family decay exponents between weighted shell norms"),
    ("yamazaki/*", "time-integrated propagator bound"),
    ("product/*", "drift product estimate"),
    ("bilinear/*", "bilinear memory bound"),
    ("linear-op/kernel-*", "exact single-shell action of the memory kernel"),
    ("linear-op/*", "linear memory bound"),
    ("solve/admitted", "smallness admission for the contraction regime"),
    ("solve/zero-data", "trivial fixed point at zero data"),
    ("solve/ball", "iterates stay inside the smallness ball"),
    ("solve/*", "small-data contraction of the Picard map"),
    ("selfsim/per-mode", "per-mode scaling identity of the linear flow"),
    ("selfsim/*", "scaling-invariant solution family"),
    ("uniqueness/*", "uniqueness of the small-data fixed point"),
)

PLUMBING = "plumbing"


def claim_for(check_id):
    for pattern, claim in CLAIMS:
        if fnmatch(check_id, pattern):
            return claim
    return PLUMBING


def grid_tag(grid):
    return f"{grid.dim}d-n{grid.n_points}"


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".12g")


@dataclass(frozen=True)
class CheckRow:
    """One measured claim instance; params hold the knobs that produced it."""
    check_id: str
    params: dict
    measured: float
    predicted: float
    rel_dev: float
    ensemble: int
    seed: int
    grid: str
    verdict: str

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ParameterError(f"verdict must be one of {VERDICTS}, got {self.verdict}")

    @classmethod
    def from_ratio(cls, check_id, params, report, seed, tol, slack_only=False):
        """Row from a fit or study report carrying measured/predicted values.

        The bound is on the relative deviation; slack_only accepts any
        measurement at least as negative as predicted (one-sided decay
        bounds), still requiring the deviation cap on the fast side.
        """
        ok = report.rel_dev <= tol
        if slack_only:
            ok = ok or report.measured <= report.predicted
        return cls(
            check_id=check_id,
            params=dict(params, tol=tol),
            measured=report.measured,
            predicted=report.predicted,
            rel_dev=report.rel_dev,
            ensemble=report.ensemble,
            seed=seed,
            grid=report.grid,
            verdict="PASS" if ok else "FAIL",
        )

    @classmethod
    def from_error(cls, check_id, params, err, seed, grid, tol):
        """Row for an absolute-tolerance check: predicted value is exact,
        measured is the worst error observed."""
        return cls(
            check_id=check_id,
            params=dict(params, tol=tol),
            measured=err,
            predicted=0.0,
            rel_dev=err,
            ensemble=int(params.get("ensemble", 1)),
            seed=seed,
            grid=grid,
            verdict="PASS" if err <= tol else "FAIL",
        )

    @classmethod
    def bounded(cls, check_id, params, measured, bound, seed, grid, ensemble=1):
        """Row for a one-sided cap: measured <= bound passes."""
        rel = abs(measured - bound) / abs(bound) if bound else abs(measured)
        return cls(
            check_id=check_id,
            params=dict(params, bound=bound),
            measured=measured,
            predicted=bound,
            rel_dev=rel,
            ensemble=ensemble,
            seed=seed,
            grid=grid,
            verdict="PASS" if measured <= bound else "FAIL",
        )

    @classmethod
    def exact(cls, check_id, params, measured, predicted, seed, grid, tol):
        """Row for a closed-form identity checked in relative terms."""
        rel = abs(measured - predicted) / abs(predicted) if predicted else abs(measured)
        return cls(
            check_id=check_id,
            params=dict(params, tol=tol),
            measured=measured,
            predicted=predicted,
            rel_dev=rel,
            ensemble=1,
            seed=seed,
            grid=grid,
            verdict="PASS" if rel <= tol else "FAIL",
        )

    @classmethod
    def failed(cls, check_id, params, reason, seed, grid):
        return cls(
            check_id=check_id,
            params=dict(params, reason=reason),
            measured=math.nan,
            predicted=math.nan,
            rel_dev=math.nan,
            ensemble=1,
            seed=seed,
            grid=grid,
            verdict="FAIL",
        )

    @classmethod
    def inconclusive(cls, check_id, params, reason, seed, grid):
        return cls(
            check_id=check_id,
            params=dict(params, reason=reason),
            measured=math.nan,
            predicted=math.nan,
            rel_dev=math.nan,
            ensemble=1,
            seed=seed,
            grid=grid,
            verdict="INCONCLUSIVE",
        )


def format_line(row):
    """One summary line per check, printed as the run progresses."""
    reason = row.params.get("reason")
    if reason is not None or row.verdict == "INCONCLUSIVE":
        return f"{row.verdict:12s} {row.check_id}  ({reason or 'no scaling window'})"
    return (
        f"{row.verdict:12s} {row.check_id}  "
        f"measured={_fmt(row.measured)} predicted={_fmt(row.predicted)} "
        f"rel_dev={_fmt(row.rel_dev)}"
    )


def write_csv(rows, path):
    """Fixed-schema, fixed-format CSV; identical rows give identical bytes."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(
                (
                    row.check_id,
                    json.dumps(row.params, sort_keys=True),
                    _fmt(row.measured),
                    _fmt(row.predicted),
                    _fmt(row.rel_dev),
                    row.ensemble,
                    row.seed,
                    row.grid,
                    row.verdict,
                )
            )
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def report_index(output_dir):
    """Summary index over every recorded experiment directory.

    Walks <output_dir>/<experiment>/checks.csv, groups rows by the claim
    they probe, and writes index.md next to the experiment directories.
    Rebuilding over the same artifacts is idempotent.
    """
    grouped = {}
    for entry in sorted(os.listdir(output_dir)):
        csv_path = os.path.join(output_dir, entry, CSV_NAME)
        if not os.path.isfile(csv_path):
            continue
        rel = f"{entry}/{CSV_NAME}"
        for row in read_csv(csv_path):
            claim = claim_for(row["check_id"])
            grouped.setdefault(claim, []).append((row, rel))

    lines = ["# Check index", ""]
    if not grouped:
        lines.append("No checks recorded.")
    for claim in sorted(grouped):
        lines.append(f"## {claim}")
        lines.append("")
        for row, rel in grouped[claim]:
            detail = ""
            if row["verdict"] != "INCONCLUSIVE":
                detail = f" (measured {row['measured']}, predicted {row['predicted']})"
            lines.append(f"- `{row['check_id']}`: **{row['verdict']}**{detail} -- {rel}")
        lines.append("")
    text = "\n".join(lines).rstrip() + "\n"
    path = os.path.join(output_dir, INDEX_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
