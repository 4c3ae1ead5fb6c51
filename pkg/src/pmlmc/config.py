"""INI run configuration with dotted overrides.

Values are layered: built-in defaults, then the config file, then
``section.key=value`` overrides in the order given.  Lists are comma
separated, an empty value means "unset".  The ``[model]`` section is free
form: every key except ``name`` is passed to the model constructor.
"""

from __future__ import annotations

import configparser
import json
from typing import Iterable

from .errors import ConfigError
from .estimator import EstimatorConfig
from .models import Model, make_model
from .partition import PartitionSpec
from .runtime.batching import BatchPolicy
from .runtime.driver import RunConfig
from .runtime.simulate import SimCosts
from .sweep import BASE_SAMPLES, SweepConfig

DEFAULTS = {
    "run": {"mode": "simulate", "seed": "0", "adaptive": "false", "max_iterations": "20",
            "comm_limit": "", "out": "", "timeline": "", "log": ""},
    "partition": {"p": "8", "q": "1,2,4"},
    "estimator": {"eps": "1e-3", "s": "2", "levels": "", "samples": "200,100,50",
                  "safety_factor": "1.3", "work_exponent": "3"},
    "model": {"name": "synthetic"},
    "batch": {"min_fraction": "0.01", "max_fraction": "0.62", "scale_tree_clamps": "true"},
    "costs": {"master": "0", "coordinator": "", "latency": "0"},
    "sweep": {"kind": "weak", "nodes": "1,2,4,8", "node_size": "48", "C": "128",
              "n_star": ",".join(map(str, BASE_SAMPLES))},
}

MODE_ALIASES = {"simulate": "simulate", "run": "execute", "execute": "execute"}


def load_config(path: str | None = None, overrides: Iterable[tuple[str, str]] = (), *,
                base: Iterable[tuple[str, str]] = ()) -> configparser.ConfigParser:
    """Defaults, then ``base`` (caller defaults), the file and ``overrides``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case (C)
    cp.read_dict(DEFAULTS)
    for key, value in base:
        set_value(cp, key, value)
    if path:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"bad config {path}: {' '.join(str(exc).split())}") from None
    for key, value in overrides:
        set_value(cp, key, value)
    check_keys(cp)
    return cp


def set_value(cp: configparser.ConfigParser, dotted: str, value: str) -> None:
    section, _, key = dotted.partition(".")
    if not section or not key:
        raise ConfigError(f"override {dotted!r} is not of the form section.key")
    if section not in DEFAULTS:
        raise ConfigError(f"unknown config section {section!r}")
    cp.set(section, key, str(value))


def check_keys(cp: configparser.ConfigParser) -> None:
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section {section!r}")
        if section == "model":
            continue
        extra = set(cp[section]) - set(DEFAULTS[section])
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")


# -- typed getters

def _raw(cp, section: str, key: str) -> str:
    return cp.get(section, key, fallback="").strip()


def get_int(cp, section: str, key: str, required: bool = False) -> int | None:
    v = _raw(cp, section, key)
    if not v:
        if required:
            raise ConfigError(f"{section}.{key} is required")
        return None
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be an integer, got {v!r}") from None


def get_float(cp, section: str, key: str, required: bool = False) -> float | None:
    v = _raw(cp, section, key)
    if not v:
        if required:
            raise ConfigError(f"{section}.{key} is required")
        return None
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}") from None


def get_bool(cp, section: str, key: str) -> bool:
    try:
        return cp.getboolean(section, key, fallback=False)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be true or false") from None


def get_ints(cp, section: str, key: str) -> tuple[int, ...]:
    v = _raw(cp, section, key)
    try:
        return tuple(int(x) for x in v.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a comma separated list of integers, got {v!r}") from None


def _model_value(v: str):
    v = v.strip()
    if "," in v:
        return [_model_value(x) for x in v.split(",") if x.strip()]
    try:
        return json.loads(v)
    except ValueError:
        return v


def build_model(cp, levels: int) -> Model:
    params = {k: _model_value(v) for k, v in cp["model"].items() if k != "name" and v.strip()}
    return make_model(_raw(cp, "model", "name"), levels, **params)


def build_policy(cp) -> BatchPolicy:
    return BatchPolicy(get_float(cp, "batch", "min_fraction"), get_float(cp, "batch", "max_fraction"),
                       get_bool(cp, "batch", "scale_tree_clamps"))


def build_costs(cp) -> SimCosts:
    return SimCosts(get_float(cp, "costs", "master") or 0.0, get_float(cp, "costs", "coordinator"),
                    get_float(cp, "costs", "latency") or 0.0)


def run_mode(cp) -> str:
    mode = _raw(cp, "run", "mode")
    if mode not in MODE_ALIASES:
        raise ConfigError(f"run.mode must be simulate or run, got {mode!r}")
    return MODE_ALIASES[mode]


def build_run_config(cp) -> RunConfig:
    q = get_ints(cp, "partition", "q")
    spec = PartitionSpec(get_int(cp, "partition", "p", required=True), q)
    M = spec.M
    L0 = get_int(cp, "estimator", "levels")
    L0 = M if L0 is None else L0
    samples = get_ints(cp, "estimator", "samples")
    est = EstimatorConfig(
        tolerance=get_float(cp, "estimator", "eps", required=True),
        refinement_factor=get_float(cp, "estimator", "s", required=True),
        max_levels=M,
        initial_levels=L0,
        initial_samples=samples,
        safety_factor=get_float(cp, "estimator", "safety_factor"),
        work_exponent=get_float(cp, "estimator", "work_exponent"),
    )
    return RunConfig(
        estimator=est,
        partition=spec,
        model=build_model(cp, M + 1),
        batch=build_policy(cp),
        comm_limit=get_int(cp, "run", "comm_limit"),
        seed=get_int(cp, "run", "seed"),
        mode=run_mode(cp),
        adaptive=get_bool(cp, "run", "adaptive"),
        costs=build_costs(cp),
        max_iterations=get_int(cp, "run", "max_iterations"),
    )


def build_sweep_config(cp) -> SweepConfig:
    q = get_ints(cp, "partition", "q")
    return SweepConfig(
        kind=_raw(cp, "sweep", "kind"),
        nodes=get_ints(cp, "sweep", "nodes"),
        q=q,
        model=build_model(cp, len(q)),
        N_star=get_ints(cp, "sweep", "n_star"),
        node_size=get_int(cp, "sweep", "node_size"),
        C=get_int(cp, "sweep", "C"),
        tolerance=get_float(cp, "estimator", "eps"),
        batch=build_policy(cp),
        comm_limit=get_int(cp, "run", "comm_limit"),
        costs=build_costs(cp),
        seed=get_int(cp, "run", "seed"),
        refinement_factor=get_float(cp, "estimator", "s"),
    )
