"""YAML experiment configuration.

A config names a zoo model or describes one inline::

    model: CT1                 # or an inline mapping, see below
    case: case1
    N: [100, 1000, 10000]
    m: [4, 8, 16]
    replications: 200
    horizon: 1
    seed: 7
    output: out/ct1
    suite: bias-m
    slope: {target: -1.0, tol: 0.15}

Inline discrete model::

    model:
      type: discrete
      initial_law: [1, 0]
      kernels: [[0.7, 0.3], [0.4, 0.6]]      # one matrix or a list, M_1..M_n
      potentials: [1, 2]                     # G_p values, one vector or a list
      horizon: 5

Inline CTMC model::

    model:
      type: ctmc
      initial_law: [1, 0, 0]
      generator: [[-1, 0.5, 0.5], ...]      # or generators + breakpoints
      potential: [0, 0.3, 0.6]              # V values
      horizon: 2
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from . import zoo
from .errors import ConfigError
from .models import CTMCModel, DiffusionModel, DiscreteModel, killing_form, nonnegative_form
from .selection import SelectionCase

SUITES = ("variance-N", "bias-m", "mesh-bias", "uniform-gap", "clock-gap")
DEFAULT_SLOPES = {
    "variance-N": (-1.0, 0.2),
    "bias-m": (-1.0, 0.15),
    "mesh-bias": (-1.0, 0.2),
    "uniform-gap": (-1.0, 0.15),
    "clock-gap": (-1.0, 0.3),
}


@dataclass
class ExperimentConfig:
    model: object
    case: SelectionCase
    N: List[int]
    m: List[int]
    replications: int
    seed: int
    horizon: Optional[object] = None
    output: Path = Path("out")
    suite: Optional[str] = None
    slope_target: Optional[float] = None
    slope_tol: Optional[float] = None
    mode: str = "individual"
    log_events: bool = True
    extra: dict = field(default_factory=dict)

    def slope(self, suite=None):
        target, tol = DEFAULT_SLOPES.get(suite or self.suite, (-1.0, 0.2))
        return (target if self.slope_target is None else self.slope_target,
                tol if self.slope_tol is None else self.slope_tol)


def _field(cond, name, msg):
    if not cond:
        raise ConfigError(f"field '{name}': {msg}")


def _int_list(raw, name):
    if isinstance(raw, int):
        raw = [raw]
    _field(isinstance(raw, list), name, "expected a list of positive integers")
    _field(len(raw) > 0, name, "list must not be empty")
    for i, v in enumerate(raw):
        _field(isinstance(v, int) and not isinstance(v, bool) and v > 0, f"{name}[{i}]",
               f"expected a positive integer, got {v!r}")
    return [int(v) for v in raw]


def _matrices(raw, name):
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 2:
        return [arr]
    _field(arr.ndim == 3, name, "expected a matrix or a list of matrices")
    return list(arr)


def _vectors(raw, name, count):
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1:
        return [arr] * count
    _field(arr.ndim == 2 and len(arr) == count, name, f"expected one vector or {count} vectors")
    return list(arr)


def build_model(raw):
    """Model from a zoo name or an inline mapping; validation errors propagate."""
    if isinstance(raw, str):
        try:
            return zoo.get(raw)
        except KeyError as exc:
            raise ConfigError(f"field 'model': {exc.args[0]}") from None
    _field(isinstance(raw, dict), "model", "expected a zoo name or a mapping")
    if "zoo" in raw:
        kwargs = {k: v for k, v in raw.items() if k != "zoo"}
        try:
            return zoo.get(raw["zoo"], **kwargs)
        except KeyError as exc:
            raise ConfigError(f"field 'model.zoo': {exc.args[0]}") from None
    kind = raw.get("type")
    _field(kind in ("discrete", "ctmc"), "model.type", f"expected 'discrete' or 'ctmc', got {kind!r}")
    for key in ("initial_law", "horizon"):
        _field(key in raw, f"model.{key}", "missing")
    if kind == "discrete":
        for key in ("kernels", "potentials"):
            _field(key in raw, f"model.{key}", "missing")
        horizon = raw["horizon"]
        _field(isinstance(horizon, int) and horizon >= 1, "model.horizon", "expected an integer >= 1")
        kernels = _matrices(raw["kernels"], "model.kernels")
        if len(kernels) == 1:
            kernels = kernels * horizon
        pots = _vectors(raw["potentials"], "model.potentials", horizon)
        return DiscreteModel(raw["initial_law"], kernels, pots, name=raw.get("name"))
    gens = raw.get("generators", raw.get("generator"))
    pots = raw.get("potentials", raw.get("potential"))
    _field(gens is not None, "model.generator", "missing")
    _field(pots is not None, "model.potential", "missing")
    gens = _matrices(gens, "model.generator")
    breaks = raw.get("breakpoints", [0])
    _field(len(breaks) == len(gens), "model.breakpoints", "need one breakpoint per generator")
    return CTMCModel(raw["initial_law"], gens, _vectors(pots, "model.potential", len(gens)),
                     raw["horizon"], breakpoints=breaks, name=raw.get("name"))


def adapt_to_case(model, case):
    """Shift the potential to the sign a case requires; normalized flows are unchanged."""
    if isinstance(model, DiffusionModel):
        return model
    lo, hi = model.log_potential_range()
    if case in (SelectionCase.CASE1, SelectionCase.UNIFORM) and hi > 0:
        return killing_form(model)
    if case is SelectionCase.CASE2 and lo < 0:
        return nonnegative_form(model)
    return model


def parse_config(data, base_dir=None):
    """Validate a parsed YAML mapping into an `ExperimentConfig`."""
    _field(isinstance(data, dict), "<root>", "expected a mapping")
    known = {"model", "case", "N", "m", "replications", "horizon", "seed", "output", "suite",
             "slope", "mode", "log_events", "shift_potential"}
    unknown = sorted(set(data) - known)
    _field(not unknown, unknown[0] if unknown else "", "unknown field")
    _field("model" in data, "model", "missing")
    _field("seed" in data, "seed", "missing (wall-clock seeding is not supported)")
    seed = data["seed"]
    _field(isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2 ** 64, "seed",
           "expected an unsigned 64-bit integer")
    try:
        case = SelectionCase.parse(data.get("case", "case1"))
    except ValueError as exc:
        raise ConfigError(f"field 'case': {exc}") from None
    n_list = _int_list(data.get("N", [1000]), "N")
    m_list = _int_list(data.get("m", [1]), "m")
    reps = data.get("replications", 1)
    _field(isinstance(reps, int) and reps >= 1, "replications", "expected an integer >= 1")
    suite = data.get("suite")
    _field(suite is None or suite in SUITES, "suite", f"expected one of {', '.join(SUITES)}")
    slope = data.get("slope", {}) or {}
    _field(isinstance(slope, dict) and set(slope) <= {"target", "tol"}, "slope",
           "expected a mapping with 'target' and/or 'tol'")
    mode = str(data.get("mode", "individual")).lower()
    _field(mode in ("individual", "population", "thinned"), "mode",
           "expected individual, population or thinned")

    model = build_model(data["model"])
    if data.get("shift_potential", True):
        model = adapt_to_case(model, case)
    output = Path(data.get("output", "out"))
    if base_dir is not None and not output.is_absolute():
        output = Path(base_dir) / output
    return ExperimentConfig(
        model=model, case=case, N=n_list, m=m_list, replications=reps, seed=seed,
        horizon=data.get("horizon"), output=output, suite=suite,
        slope_target=slope.get("target"), slope_tol=slope.get("tol"),
        mode=mode, log_events=bool(data.get("log_events", True)),
    )


def load_config(path):
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML error{where}: {getattr(exc, 'problem', exc)}") from None
    return parse_config(data, base_dir=None)
