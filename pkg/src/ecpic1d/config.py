"""Run configuration: schema, validation, TOML loading and serialization.

A config file only needs `case` and `dt`; everything else falls back to
the case defaults.  Unknown keys are rejected rather than ignored so a
typo cannot silently run the wrong experiment.

Schema (all keys optional unless noted)::

    case = "weibel"            # required
    dt = 0.05                  # required
    t_end = 100.0
    n = 32                     # grid cells
    p = 3                      # 0-form spline degree
    length = 5.026548245743669
    scheme = "DisGrad"         # HS | AVF | DisGrad | DisGradSub
    ordering = "standard"      # standard | field_last
    seed = 0
    output = "diagnostics.csv"
    deterministic = false
    stride = 1                 # write every stride-th diagnostics row
    buffered = false           # skip per-row flushes

    [tolerances]
    nonlinear = 1e-12
    linear = 1e-15
    sub = 1e-10

    [[species]]                # one table per species, case order
    n_p = 10000
    q = -1.0
    m = 1.0
    substeps = 1
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import tomli

from .cases import case_defaults, species_templates
from .integrators import ORDERINGS, SCHEMES
from .particles import UnknownCase


class ParseError(Exception):
    """Malformed, unknown, or invalid configuration input."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class SpeciesConfig:
    n_p: int
    q: float
    m: float
    substeps: int = 1

    def __post_init__(self):
        if self.n_p < 1:
            raise ValueError(f"n_p must be >= 1, got {self.n_p}")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")


@dataclass(frozen=True)
class RunConfig:
    case: str
    dt: float
    t_end: float
    n: int
    p: int
    length: float
    species: tuple
    scheme: str = "DisGrad"
    ordering: str = "standard"
    seed: int = 0
    nonlinear_tol: float = 1.0e-12
    linear_tol: float = 1.0e-15
    sub_tol: float = 1.0e-10
    output: str = "diagnostics.csv"
    deterministic: bool = False
    stride: int = 1
    buffered: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be >= dt, got t_end={self.t_end}, dt={self.dt}")
        if self.n < 2 * self.p + 1:
            raise ValueError(f"need n >= 2p+1, got n={self.n} for p={self.p}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if len(self.species) not in (1, 2):
            raise ValueError(f"species count must be 1 or 2, got {len(self.species)}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        for name in ("nonlinear_tol", "linear_tol", "sub_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")


_TOP_KEYS = {
    "case", "dt", "t_end", "n", "p", "length", "scheme", "ordering", "seed",
    "output", "deterministic", "stride", "buffered", "tolerances", "species",
}
_TOL_KEYS = {"nonlinear": "nonlinear_tol", "linear": "linear_tol", "sub": "sub_tol"}
_SPECIES_KEYS = {"n_p", "q", "m", "substeps"}


def _typed(table, key, kind, label=None):
    value = table[key]
    label = label or key
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is not float and isinstance(value, kind) and not (
        kind is int and isinstance(value, bool)
    ):
        return value
    raise ParseError(
        f"key {label!r} must be {kind.__name__}, got {type(value).__name__}", key=label
    )


def build_config(data: dict) -> RunConfig:
    """Fill case defaults into a raw key-value mapping and validate it."""
    for key in ("case", "dt"):
        if key not in data:
            raise ParseError(f"missing required key {key!r}", key=key)
    for key in data:
        if key not in _TOP_KEYS:
            raise ParseError(f"unknown key {key!r}", key=key)
    case = _typed(data, "case", str)
    try:
        defaults = case_defaults(case)
    except UnknownCase as exc:
        raise ParseError(str(exc), key="case") from None

    length = _typed(data, "length", float) if "length" in data else defaults.length
    templates = species_templates(case, length if length > 0 else defaults.length)
    raw_species = data.get("species")
    if raw_species is None:
        raw_species = [{} for _ in templates]
    if not isinstance(raw_species, list) or not all(isinstance(t, dict) for t in raw_species):
        raise ParseError("species must be an array of tables", key="species")
    if len(raw_species) != len(templates):
        raise ParseError(
            f"case {case!r} has {len(templates)} species, config lists {len(raw_species)}",
            key="species",
        )
    species = []
    for i, (table, template) in enumerate(zip(raw_species, templates)):
        for key in table:
            if key not in _SPECIES_KEYS:
                raise ParseError(f"unknown species key {key!r}", key=key)
        merged = {
            "n_p": defaults.n_p[i],
            "q": template.q,
            "m": template.m,
            "substeps": defaults.substeps[i],
        }
        for key in ("n_p", "substeps"):
            if key in table:
                merged[key] = _typed(table, key, int)
        for key in ("q", "m"):
            if key in table:
                merged[key] = _typed(table, key, float)
        try:
            species.append(SpeciesConfig(**merged))
        except ValueError as exc:
            raise ParseError(str(exc), key="species") from None

    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ParseError("tolerances must be a table", key="tolerances")
    tol_fields = {}
    for key, value in tolerances.items():
        if key not in _TOL_KEYS:
            raise ParseError(f"unknown tolerance key {key!r}", key=key)
        tol_fields[_TOL_KEYS[key]] = _typed(tolerances, key, float)

    fields = {
        "case": case,
        "dt": _typed(data, "dt", float),
        "t_end": _typed(data, "t_end", float) if "t_end" in data else defaults.t_end,
        "n": _typed(data, "n", int) if "n" in data else defaults.n,
        "p": _typed(data, "p", int) if "p" in data else defaults.degree,
        "length": length,
        "species": tuple(species),
        **tol_fields,
    }
    for key, kind in (
        ("scheme", str), ("ordering", str), ("seed", int), ("output", str),
        ("deterministic", bool), ("stride", int), ("buffered", bool),
    ):
        if key in data:
            fields[key] = _typed(data, key, kind)
    try:
        return RunConfig(**fields)
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc)) from None


def _line_of(text: str, key: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if stripped.startswith(f"{key}=") or stripped.startswith(f"{key} "):
            return lineno
        if stripped.replace(" ", "") in (f"[{key}]", f"[[{key}]]"):
            return lineno
    return None


def load_config(path) -> RunConfig:
    """Parse a TOML run description; ParseError carries file and line context."""
    text = Path(path).read_text()
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        return build_config(data)
    except ParseError as exc:
        line = _line_of(text, exc.key) if exc.key else None
        where = f"{path}, line {line}" if line else str(path)
        raise ParseError(f"{where}: {exc}", key=exc.key) from None


def serialize_config(config: RunConfig) -> str:
    """Emit a TOML document that parses back to an equal RunConfig."""
    lines = [
        f'case = "{config.case}"',
        f"dt = {config.dt!r}",
        f"t_end = {config.t_end!r}",
        f"n = {config.n}",
        f"p = {config.p}",
        f"length = {config.length!r}",
        f'scheme = "{config.scheme}"',
        f'ordering = "{config.ordering}"',
        f"seed = {config.seed}",
        f'output = "{config.output}"',
        f"deterministic = {str(config.deterministic).lower()}",
        f"stride = {config.stride}",
        f"buffered = {str(config.buffered).lower()}",
        "",
        "[tolerances]",
        f"nonlinear = {config.nonlinear_tol!r}",
        f"linear = {config.linear_tol!r}",
        f"sub = {config.sub_tol!r}",
    ]
    for sc in config.species:
        lines += [
            "",
            "[[species]]",
            f"n_p = {sc.n_p}",
            f"q = {sc.q!r}",
            f"m = {sc.m!r}",
            f"substeps = {sc.substeps}",
        ]
    return "\n".join(lines) + "\n"


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    """RunConfig copy with fields replaced (revalidates invariants)."""
    return replace(config, **changes)
