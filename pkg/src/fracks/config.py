"""Run configuration for the command line driver.

A run is described by a small key-value file.  The text grammar is one
``section.key = value`` assignment per line, with ``#`` comments and blank
lines ignored:

    experiment = decay-ml
    seed = 7
    output_dir = out
    model.alpha = 0.8
    model.theta = 1.1
    model.theta1 = 0.5
    grid.n_points = 512
    mesh.t_final = 1.0
    besov.p = 2.0

A JSON object with the same sections ({"model": {"alpha": 0.8}, ...}) is
accepted as an alternative encoding.  Unset keys fall back to the
reference configuration.  The regularity exponents are always recomputed
from the model block; files that try to set them are rejected, so a
config can never smuggle in an inconsistent exponent triple.

Loading validates everything at once and reports all problems together,
each hypothesis violation quoting the inequality it breaks.
"""

import json
import math
from dataclasses import dataclass, field, replace

from .besov import check_product_hypotheses, derived_exponents
from .duhamel import TimeMesh
from .errors import ConfigError, GridError, HypothesisError, ParameterError
from .spectral import Grid, ModelParams

EXPERIMENTS = (
    "ml-eval",
    "mainardi-moments",
    "decay-heat",
    "decay-ml",
    "yamazaki",
    "product",
    "bilinear",
    "linear-op",
    "solve",
    "selfsim",
    "uniqueness",
)

_SECTIONS = ("model", "grid", "mesh", "besov")

# key -> required scalar type; booleans are never valid values
_SCHEMA = {
    "experiment": str,
    "seed": int,
    "output_dir": str,
    "model.alpha": float,
    "model.theta": float,
    "model.theta1": float,
    "model.gamma": float,
    "model.chi": float,
    "model.kappa": float,
    "model.D_eta": float,
    "model.D_v": float,
    "model.gamma_sign": str,
    "grid.dim": int,
    "grid.n_points": int,
    "grid.half_width": float,
    "mesh.t_final": float,
    "mesh.n_steps": int,
    "mesh.grading": float,
    "besov.p": float,
    "besov.q": float,
}

_DERIVED_KEYS = ("besov.s0", "besov.s1", "besov.s2")

_DEFAULTS = {
    "experiment": None,
    "seed": 0,
    "output_dir": "out",
    "model.alpha": 0.8,
    "model.theta": 1.1,
    "model.theta1": 0.5,
    "model.gamma": 0.0,
    "model.chi": 1.0,
    "model.kappa": 1.0,
    "model.D_eta": 1.0,
    "model.D_v": 1.0,
    "model.gamma_sign": "damped",
    "grid.dim": 1,
    "grid.n_points": 512,
    "grid.half_width": math.pi,
    "mesh.t_final": 1.0,
    "mesh.n_steps": 16,
    "mesh.grading": 2.5,
    "besov.p": 2.0,
    "besov.q": 2.0,
}


@dataclass(frozen=True)
class MeshSpec:
    """Graded-mesh prescription; build() materialises the node vector."""
    t_final: float = 1.0
    n_steps: int = 16
    grading: float = 2.5

    def __post_init__(self):
        if not self.t_final > 0.0:
            raise ParameterError(f"mesh.t_final must be positive, got {self.t_final}")
        if self.n_steps < 1:
            raise ParameterError(f"mesh.n_steps must be >= 1, got {self.n_steps}")
        if not self.grading >= 1.0:
            raise ParameterError(f"mesh.grading must be >= 1, got {self.grading}")

    def build(self):
        return TimeMesh.graded(self.t_final, self.n_steps, self.grading)


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    grid: Grid
    mesh: MeshSpec = field(default_factory=MeshSpec)
    p: float = 2.0
    q: float = 2.0
    experiment: str = None
    output_dir: str = "out"
    seed: int = 0

    def exponents(self):
        """(s0, s1, s2) recomputed from the model block, never read from a file."""
        return derived_exponents(
            self.model.theta, self.model.theta1, self.p, self.q, self.grid.dim
        )

    def validate(self):
        """Every violated hypothesis, each naming its inequality.  Empty
        when the configuration is runnable."""
        problems = []
        if self.experiment is not None and self.experiment not in EXPERIMENTS:
            problems.append(
                f"unknown experiment {self.experiment!r}; "
                f"choose from {', '.join(EXPERIMENTS)}"
            )
        if self.seed < 0:
            problems.append(f"seed must be nonnegative, got {self.seed}")
        if not self.output_dir:
            problems.append("output_dir must be a nonempty path")
        seen = set()
        checks = (
            lambda: self.model.check_admissible(self.p, self.grid.dim),
            lambda: check_product_hypotheses(
                self.p, self.q, self.model.theta, self.model.theta1, self.grid.dim
            ),
        )
        for check in checks:
            try:
                check()
            except HypothesisError as exc:
                if exc.inequality not in seen:
                    seen.add(exc.inequality)
                    problems.append(f"hypothesis violated: {exc.inequality} -- {exc}")
        if self.experiment == "selfsim" and self.model.gamma != 0.0:
            problems.append(
                "hypothesis violated: gamma = 0 -- the rescaling family only "
                f"fixes the undamped system, got gamma={self.model.gamma}"
            )
        return problems


def _convert(kind, value, from_text):
    if from_text:
        token = value
        if kind is str:
            return token
        if kind is int:
            return int(token, 10)
        return float(token)
    if isinstance(value, bool):
        raise ValueError("boolean")
    if kind is str:
        if not isinstance(value, str):
            raise ValueError("not a string")
        return value
    if kind is int:
        if not isinstance(value, int):
            raise ValueError("not an integer")
        return value
    if not isinstance(value, (int, float)):
        raise ValueError("not a number")
    return float(value)


def _take(values, problems, key, value, where):
    if key in _DERIVED_KEYS:
        problems.append(
            f"{where}: {key} is derived from the model block, never read from files"
        )
        return
    if key not in _SCHEMA:
        problems.append(f"{where}: unknown key {key!r}")
        return
    if key in values:
        problems.append(f"{where}: duplicate key {key!r}")
        return
    values[key] = (value, where)


def _parse_text(text, path):
    values, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        if "=" not in line:
            problems.append(f"{where}: expected 'key = value', got {line!r}")
            continue
        key, _, token = line.partition("=")
        key, token = key.strip(), token.strip()
        if not key or not token:
            problems.append(f"{where}: expected 'key = value', got {line!r}")
            continue
        _take(values, problems, key, token, where)
    return values, problems


def _parse_json(text, path):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}")
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be an object")
    values, problems = {}, []
    for key, val in obj.items():
        if key in _SECTIONS:
            if not isinstance(val, dict):
                problems.append(f"{path}: section {key!r} must be an object")
                continue
            for sub, v in val.items():
                _take(values, problems, f"{key}.{sub}", v, f"{path}: {key}.{sub}")
        else:
            _take(values, problems, key, val, f"{path}: {key}")
    return values, problems


def _bundle(problems):
    if len(problems) == 1:
        return problems[0]
    lines = [f"{len(problems)} problems:"]
    lines.extend("  - " + p for p in problems)
    return "\n".join(lines)


def _build(settings):
    """RunConfig from a fully-typed settings dict; collects block errors."""
    problems = []

    def block(factory, label):
        try:
            return factory()
        except (ParameterError, GridError) as exc:
            problems.append(f"{label}: {exc}")
            return None

    model = block(
        lambda: ModelParams(
            alpha=settings["model.alpha"],
            theta=settings["model.theta"],
            theta1=settings["model.theta1"],
            gamma=settings["model.gamma"],
            chi=settings["model.chi"],
            kappa=settings["model.kappa"],
            D_eta=settings["model.D_eta"],
            D_v=settings["model.D_v"],
            gamma_sign=settings["model.gamma_sign"],
        ),
        "model",
    )
    grid = block(
        lambda: Grid(
            settings["grid.dim"], settings["grid.n_points"], settings["grid.half_width"]
        ),
        "grid",
    )
    mesh = block(
        lambda: MeshSpec(
            settings["mesh.t_final"], settings["mesh.n_steps"], settings["mesh.grading"]
        ),
        "mesh",
    )
    if problems:
        raise ConfigError(_bundle(problems))
    cfg = RunConfig(
        model=model,
        grid=grid,
        mesh=mesh,
        p=settings["besov.p"],
        q=settings["besov.q"],
        experiment=settings["experiment"],
        output_dir=settings["output_dir"],
        seed=settings["seed"],
    )
    problems = cfg.validate()
    if problems:
        raise ConfigError(_bundle(problems))
    return cfg


def default_config(experiment=None):
    """The reference configuration, optionally pointed at an experiment."""
    cfg = _build(dict(_DEFAULTS))
    return replace(cfg, experiment=experiment) if experiment else cfg


def load_config(path):
    """Parse and validate a run configuration file.

    Raises ConfigError with one line per problem: parse errors carry
    path:line positions, violated hypotheses quote their inequality.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        values, problems = _parse_json(text, path)
    else:
        values, problems = _parse_text(text, path)
    from_text = not text.lstrip().startswith("{")
    settings = dict(_DEFAULTS)
    for key, (value, where) in values.items():
        kind = _SCHEMA[key]
        try:
            settings[key] = _convert(kind, value, from_text)
        except (TypeError, ValueError):
            problems.append(f"{where}: {key} expects {kind.__name__}, got {value!r}")
    if problems:
        raise ConfigError(_bundle(problems))
    return _build(settings)
