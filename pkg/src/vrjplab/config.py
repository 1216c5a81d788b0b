"""Sectioned key-value run configuration.

Plain INI text (configparser dialect) so runs are diff-able and the raw
bytes hash straight into the manifest.  Layout: a [run] section for
seed/workers/output, a [graph] section for the lattice parameters, one
section per experiment for its options, and a [tolerances] section that
is the single home of the numeric policy.  Every key is checked against
a typed schema before anything is computed; unknown sections or keys are
errors, not warnings.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import ConfigError
from .toymodel import file_weights, point_mass_weights, uniform_weights

__all__ = [
    "Tolerances",
    "RunConfig",
    "EXPERIMENT_NAMES",
    "load_run_config",
    "parse_mu0",
    "DEFAULT_CONFIG",
]


@dataclass(frozen=True)
class Tolerances:
    """The three numeric policies, overridable only via [tolerances]."""

    algebraic: float = 1e-10
    statistical_sigma: float = 4.0
    pivot_floor: float = 1e-12


EXPERIMENT_NAMES = ("validate", "scan", "simulate", "toy", "renewal",
                    "exitprob")

# value-kind vocabulary for the schema tables below
def _uint(s: str) -> int:
    v = int(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _pint(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise ValueError("must be positive")
    return v


def _pfloat(s: str) -> float:
    v = float(s)
    if v <= 0:
        raise ValueError("must be positive")
    return v


def _ufloat(s: str) -> float:
    v = float(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _split(s: str) -> list[str]:
    return [part.strip() for part in s.split(",") if part.strip()]


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in _split(s))


def _pints(s: str) -> tuple[int, ...]:
    out = tuple(_pint(p) for p in _split(s))
    if not out:
        raise ValueError("needs at least one entry")
    return out


def _pfloats(s: str) -> tuple[float, ...]:
    out = tuple(_pfloat(p) for p in _split(s))
    if not out:
        raise ValueError("needs at least one entry")
    return out


def _pairs(s: str) -> tuple[tuple[int, int], ...]:
    """Cut-level pairs 'k:l, k:l, ...' with 1 <= k <= l."""
    out = []
    for part in _split(s):
        k_txt, _, l_txt = part.partition(":")
        if not l_txt:
            raise ValueError(f"pair {part!r} must look like k:l")
        k, l = _pint(k_txt), _pint(l_txt)
        if k > l:
            raise ValueError(f"pair {part!r} needs k <= l")
        out.append((k, l))
    if not out:
        raise ValueError("needs at least one pair")
    return tuple(out)


_Parser = Callable[[str], object]

_RUN_SCHEMA: dict[str, _Parser] = {"seed": _uint, "workers": _pint,
                                   "out": str}
_GRAPH_SCHEMA: dict[str, _Parser] = {
    "d": _pint, "n": _uint, "m": _uint, "W": _pfloat, "W_grid": _pfloats,
}
_TOL_SCHEMA: dict[str, _Parser] = {
    "algebraic": _pfloat, "statistical_sigma": _pfloat,
    "pivot_floor": _pfloat,
}
_EXPERIMENT_SCHEMAS: dict[str, dict[str, _Parser]] = {
    "validate": {"only": str, "replicates": _pint},
    "scan": {"kind": str, "n_grid": _pints, "p_set": _ints,
             "t_grid": _pfloats, "n_levels": _pint, "replicates": _pint,
             "thresholds": _pfloats},
    "simulate": {"horizon": _ufloat, "budget": _pint, "replicates": _pint},
    "toy": {"p": _pint, "k": _uint, "m": _uint, "epsilon": _pfloat,
            "eta0": _pfloat, "replicates": _pint, "method": str,
            "mu0": str, "epsilon0": _pfloat, "n_grid": _pints},
    "renewal": {"pairs": _pairs, "replicates": _pint},
    "exitprob": {"replicates": _pint},
}
_CHOICES = {
    ("scan", "kind"): ("phase", "moment", "tail"),
    ("toy", "method"): ("direct", "factorized"),
}


@dataclass(frozen=True)
class RunConfig:
    """One fully validated run: who, where, and with what numbers."""

    experiment: str
    seed: int
    workers: int
    out: str
    graph: Mapping[str, object]
    options: Mapping[str, object]
    tolerances: Tolerances
    text: str = field(repr=False, default="")


def _parse_section(
    parser: configparser.ConfigParser,
    section: str,
    schema: Mapping[str, _Parser],
) -> dict:
    out: dict = {}
    if not parser.has_section(section):
        return out
    for key, raw in parser.items(section):
        if key not in schema:
            raise ConfigError(f"[{section}] {key}: unknown key")
        try:
            out[key] = schema[key](raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    return out


def load_run_config(
    text: str,
    experiment: str,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | None = None,
) -> RunConfig:
    """Parse and validate configuration text for one experiment.

    CLI-level overrides (seed, workers, out) win over the [run] section.
    Raises ConfigError — with the configparser line message for syntax
    problems, with the section/key for semantic ones.
    """
    if experiment not in EXPERIMENT_NAMES:
        raise ConfigError(f"unknown experiment {experiment!r}; "
                          f"choose from {', '.join(EXPERIMENT_NAMES)}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case: W and w are different claims
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    known = {"run", "graph", "tolerances", *_EXPERIMENT_SCHEMAS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"[{section}] is not a known section")
    run = _parse_section(parser, "run", _RUN_SCHEMA)
    graph = _parse_section(parser, "graph", _GRAPH_SCHEMA)
    tol = _parse_section(parser, "tolerances", _TOL_SCHEMA)
    options = _parse_section(parser, experiment,
                             _EXPERIMENT_SCHEMAS[experiment])
    for (exp, key), allowed in _CHOICES.items():
        if exp == experiment and key in options and options[key] not in allowed:
            raise ConfigError(
                f"[{exp}] {key} = {options[key]!r}: "
                f"choose from {', '.join(allowed)}"
            )
    if "W" in graph and "W_grid" in graph:
        raise ConfigError("[graph] W and W_grid are mutually exclusive")
    return RunConfig(
        experiment=experiment,
        seed=seed if seed is not None else run.get("seed", 0),
        workers=workers if workers is not None else run.get("workers", 1),
        out=out if out is not None else run.get("out", "runs"),
        graph=graph,
        options=options,
        tolerances=Tolerances(**tol),
        text=text,
    )


def parse_mu0(spec: str):
    """Pinning-weight sampler from its text form.

    ``point:V`` — the constant V; ``uniform:LO,HI`` — uniform on (LO, HI);
    ``file:PATH`` — the empirical law of the numbers in PATH.
    """
    kind, _, arg = spec.partition(":")
    try:
        if kind == "point":
            return point_mass_weights(float(arg))
        if kind == "uniform":
            lo_txt, _, hi_txt = arg.partition(",")
            return uniform_weights(float(lo_txt), float(hi_txt))
        if kind == "file":
            return file_weights(arg)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"mu0 = {spec!r}: {exc}") from None
    raise ConfigError(f"mu0 = {spec!r}: kind must be point, uniform, or file")


DEFAULT_CONFIG = """\
[run]
seed = 20260823
workers = 1
out = runs

[graph]
d = 2
n = 4
m = 2
W = 1.0

[validate]
replicates = 4000

[scan]
kind = phase
n_grid = 1, 2, 3
replicates = 1500

[simulate]
horizon = 25.0
budget = 10000
replicates = 50

[toy]
p = 2
k = 1
m = 0
epsilon = 1.0
eta0 = 1.0
replicates = 20000
method = direct

[renewal]
pairs = 1:1, 2:2, 2:3
replicates = 100

[exitprob]
replicates = 20000

[tolerances]
algebraic = 1e-10
statistical_sigma = 4.0
pivot_floor = 1e-12
"""
