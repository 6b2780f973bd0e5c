"""Run configuration: the flat sectioned key/value format and its parsing.

A configuration is an INI-style text file with sections [problem], [graph],
[schedule], [run], [benchmark], [sweep], [output]; every key can also be
overridden on the command line as ``--set section.key=value``. One master
seed drives all randomness; graph, data, and initialization streams are
split from it by purpose (see :mod:`etopt.rng`), and [graph] seed may
override the graph stream for replaying a recorded topology.
"""

import configparser
from dataclasses import dataclass, field, fields

from etopt.errors import ConfigError


@dataclass
class RunConfig:
    # [problem]
    family: str = "linreg"
    n: int = 20
    p: int = 10
    q: int = 4
    m: int = 2
    box_halfwidth: float = 5.0
    # [graph]
    edge_prob: float = 0.1
    graph_seed: int = None  # defaults to the master seed
    # [schedule]  (key "schedule" selects the family)
    schedule: str = "thm2"
    kappa: float = 0.5
    theta1: float = 0.5
    theta2: float = 0.5
    theta3: float = 1.0
    alpha0: float = 1.0
    tau0: float = 0.0
    tau_family: str = "poly"
    c: float = 2.0
    # [run]
    horizon: int = 2000
    seed: int = 1
    init_rule: str = "origin"
    record_decisions: bool = True
    event_triggered: bool = True
    workers: int = 1
    # [benchmark]
    benchmark_kinds: tuple = ()
    solver_tol: float = 1e-6
    solver_max_iter: int = 200_000
    grid_pitch: float = 1e-3
    verify: str = "none"
    # [output]
    include_preclip: bool = False
    # [sweep]
    sweep_tau0: tuple = (0.0, 50.0, 100.0, 150.0)
    sweep_seeds: tuple = (1, 2, 3, 4, 5)

    def master_seed(self):
        return self.seed

    def graph_stream_seed(self):
        return self.seed if self.graph_seed is None else self.graph_seed


# Maps "section.key" in the text format to RunConfig attribute and type.
_KEYMAP = {
    "problem.family": ("family", str),
    "problem.n": ("n", int),
    "problem.p": ("p", int),
    "problem.q": ("q", int),
    "problem.m": ("m", int),
    "problem.box_halfwidth": ("box_halfwidth", float),
    "graph.edge_prob": ("edge_prob", float),
    "graph.seed": ("graph_seed", int),
    "schedule.schedule": ("schedule", str),
    "schedule.kappa": ("kappa", float),
    "schedule.theta1": ("theta1", float),
    "schedule.theta2": ("theta2", float),
    "schedule.theta3": ("theta3", float),
    "schedule.alpha0": ("alpha0", float),
    "schedule.tau0": ("tau0", float),
    "schedule.tau_family": ("tau_family", str),
    "schedule.c": ("c", float),
    "run.horizon": ("horizon", int),
    "run.seed": ("seed", int),
    "run.init_rule": ("init_rule", str),
    "run.record_decisions": ("record_decisions", bool),
    "run.event_triggered": ("event_triggered", bool),
    "run.workers": ("workers", int),
    "benchmark.kinds": ("benchmark_kinds", "strlist"),
    "benchmark.solver_tol": ("solver_tol", float),
    "benchmark.max_iter": ("solver_max_iter", int),
    "benchmark.grid_pitch": ("grid_pitch", float),
    "benchmark.verify": ("verify", str),
    "output.include_preclip": ("include_preclip", bool),
    "sweep.tau0_values": ("sweep_tau0", "floatlist"),
    "sweep.seeds": ("sweep_seeds", "intlist"),
}

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _convert(dotted, raw, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            return _BOOL[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "strlist":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if kind == "floatlist":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if kind == "intlist":
            return tuple(int(s) for s in raw.split(",") if s.strip())
        return raw
    except (ValueError, KeyError):
        raise ConfigError(f"bad value for {dotted}: {raw!r}") from None


def apply_overrides(config, pairs):
    """Apply ``section.key=value`` overrides in order; returns the config."""
    for dotted, raw in pairs:
        if dotted not in _KEYMAP:
            raise ConfigError(f"unknown config key {dotted!r}")
        attr, kind = _KEYMAP[dotted]
        setattr(config, attr, _convert(dotted, raw, kind))
    return config


def parse_config_text(text):
    """Parse the sectioned key/value format into a RunConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    config = RunConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            dotted = f"{section}.{key}"
            if dotted not in _KEYMAP:
                raise ConfigError(f"unknown config key {dotted!r}")
            attr, kind = _KEYMAP[dotted]
            setattr(config, attr, _convert(dotted, raw, kind))
    return config


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None


def config_to_dict(config):
    return {f.name: getattr(config, f.name) for f in fields(config)}


def config_from_dict(data):
    config = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
        if isinstance(value, list):
            value = tuple(value)
        setattr(config, key, value)
    return config


def check_basic(config):
    """Raise ConfigError for values no component would accept."""
    if config.family != "linreg":
        raise ConfigError(f"unknown problem family {config.family!r}")
    if min(config.n, config.p, config.q, config.m) < 1:
        raise ConfigError("problem dimensions must be positive")
    if config.n < 2:
        raise ConfigError("need at least 2 agents")
    if config.horizon < 1:
        raise ConfigError("horizon must be positive")
    if config.schedule not in ("thm1", "thm2"):
        raise ConfigError(f"unknown schedule selection {config.schedule!r}")
    if config.tau_family not in ("poly", "geo"):
        raise ConfigError(f"unknown threshold family {config.tau_family!r}")
    if config.init_rule not in ("origin", "uniform"):
        raise ConfigError(f"unknown init rule {config.init_rule!r}")
    for kind in config.benchmark_kinds:
        if kind not in ("dynamic", "static"):
            raise ConfigError(f"unknown benchmark kind {kind!r}")
    if config.workers < 1:
        raise ConfigError("workers must be at least 1")
    return config


DEFAULT_CONFIG_TEXT = """\
[problem]
family = linreg
n = 20
p = 10
q = 4
m = 2
box_halfwidth = 5.0

[graph]
edge_prob = 0.1

[schedule]
schedule = thm2
kappa = 0.5
theta1 = 0.5
theta2 = 0.5
theta3 = 1.0
alpha0 = 1.0
tau0 = 0.0
tau_family = poly
c = 2.0

[run]
horizon = 2000
seed = 1
init_rule = origin
record_decisions = true
event_triggered = true
workers = 1

[benchmark]
kinds =
solver_tol = 1e-6
max_iter = 200000
grid_pitch = 1e-3
verify = none

[sweep]
tau0_values = 0, 50, 100, 150
seeds = 1, 2, 3, 4, 5

[output]
include_preclip = false
"""
