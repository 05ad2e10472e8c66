"""Experiment configuration files.

A config is a flat INI file.  Every section and key is known in advance;
anything else is rejected with the line it appeared on, so a typo never
silently falls back to a default.  After loading, the resolved values
(defaults included) can be echoed back with :meth:`ExperimentConfig.resolved`.

Example::

    [measure]
    kind = truncated_stable_negative
    rho = 1.5

    [model]
    horizon = 1.0
    n = 200
    f0 = 10.0
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, HJMLevyError
from .measures import LevyMeasureSpec, VolatilitySpec, validate

SECTIONS: dict[str, tuple[str, ...]] = {
    "measure": ("kind", "rho", "c", "theta", "knots", "values"),
    "volatility": ("form", "value", "lambda_low", "lambda_high", "a", "b"),
    "model": ("horizon", "n", "f0", "f0_knots", "f0_values", "eps"),
    "seeds": ("master", "count"),
    "solver": ("tol", "max_iter", "ceiling"),
    "comparison": ("gamma", "alpha", "beta", "corner", "deltas", "check"),
    "study": ("f0_levels", "grid_sizes"),
    "exponent_table": ("z_min", "z_max", "points"),
    "classify": ("threshold",),
    "output": ("dir",),
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]*)\]")
_KEY_RE = re.compile(r"^([^\s=:#;][^=:]*?)\s*[=:]")


@dataclass(frozen=True)
class ComparisonSettings:
    """Comparison-function parameters; ``None`` means "take from the certificate"."""

    gamma: float | None = None
    alpha: float | None = None
    beta: float | None = None
    corner: float | None = None
    deltas: tuple[int, ...] | None = None
    check: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    measure: LevyMeasureSpec
    volatility: VolatilitySpec = field(default_factory=VolatilitySpec)
    horizon: float = 1.0
    n: int = 200
    f0: float | tuple[tuple[float, ...], tuple[float, ...]] = 1.0
    eps: float = 1e-4
    master_seed: int = 0
    seed_count: int = 1
    tol: float = 1e-8
    max_iter: int = 200
    ceiling: float = 1e12
    comparison: ComparisonSettings = field(default_factory=ComparisonSettings)
    f0_levels: tuple[float, ...] = (1.0, 10.0, 100.0)
    grid_sizes: tuple[int, ...] = (50, 100, 200)
    z_min: float = 1e-6
    z_max: float = 1e12
    table_points: int = 181
    threshold: float = 10.0
    out_dir: str = "out"
    source: str = "<config>"

    def with_overrides(self, *, seeds: int | None = None, master_seed: int | None = None,
                       out_dir: str | None = None) -> "ExperimentConfig":
        kw = {}
        if seeds is not None:
            if seeds < 1:
                raise ConfigError("--seeds must be at least 1", source="<command line>")
            kw["seed_count"] = int(seeds)
        if master_seed is not None:
            if not 0 <= master_seed < 2**64:
                raise ConfigError("--master-seed must fit in 64 unsigned bits", source="<command line>")
            kw["master_seed"] = int(master_seed)
        if out_dir is not None:
            kw["out_dir"] = str(out_dir)
        return replace(self, **kw)

    def validated_measure(self):
        return validate(self.measure, self.volatility)

    def resolved(self) -> dict[str, dict[str, str]]:
        """Every setting as strings, in the same layout as the input file."""
        model = {"horizon": repr(self.horizon), "n": str(self.n), "eps": repr(self.eps)}
        if isinstance(self.f0, tuple):
            model["f0_knots"] = _join(self.f0[0])
            model["f0_values"] = _join(self.f0[1])
        else:
            model["f0"] = repr(self.f0)
        cmp_ = self.comparison
        comparison = {"check": "true" if cmp_.check else "false"}
        for key in ("gamma", "alpha", "beta", "corner"):
            val = getattr(cmp_, key)
            comparison[key] = "certificate" if val is None and key != "corner" else (
                "horizon" if val is None else repr(val))
        comparison["deltas"] = "ladder" if cmp_.deltas is None else _join(cmp_.deltas)
        return {
            "measure": self.measure.to_mapping(),
            "volatility": self.volatility.to_mapping(),
            "model": model,
            "seeds": {"master": str(self.master_seed), "count": str(self.seed_count)},
            "solver": {"tol": repr(self.tol), "max_iter": str(self.max_iter),
                       "ceiling": repr(self.ceiling)},
            "comparison": comparison,
            "study": {"f0_levels": _join(self.f0_levels), "grid_sizes": _join(self.grid_sizes)},
            "exponent_table": {"z_min": repr(self.z_min), "z_max": repr(self.z_max),
                               "points": str(self.table_points)},
            "classify": {"threshold": repr(self.threshold)},
            "output": {"dir": self.out_dir},
        }


def _join(items) -> str:
    return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in items)


def _key_lines(text: str) -> dict[tuple[str | None, str], int]:
    """1-based line of each (section, key) and of each section header."""
    lines: dict[tuple[str | None, str], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            lines.setdefault((None, section), no)
            continue
        m = _KEY_RE.match(raw)
        if m:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


class _Reader:
    """Typed access to one parsed file, with line-anchored errors."""

    def __init__(self, parser: configparser.ConfigParser, lines, source: str):
        self.parser = parser
        self.lines = lines
        self.source = source

    def error(self, msg: str, section: str, key: str | None = None) -> ConfigError:
        line = self.lines.get((section, key)) if key else None
        if line is None:
            line = self.lines.get((None, section))
        return ConfigError(msg, line, self.source)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str) -> str:
        return self.parser.get(section, key).strip()

    def number(self, section: str, key: str, default, kind=float, positive=False):
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            val = kind(text)
        except ValueError:
            raise self.error(f"[{section}] {key} = {text!r} is not a valid {kind.__name__}",
                             section, key) from None
        if kind is float and not math.isfinite(val):
            raise self.error(f"[{section}] {key} must be finite", section, key)
        if positive and not val > 0:
            raise self.error(f"[{section}] {key} must be positive", section, key)
        return val

    def number_list(self, section: str, key: str, default, kind=float):
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            vals = tuple(kind(tok) for tok in text.replace(";", ",").split(",") if tok.strip())
        except ValueError:
            raise self.error(f"[{section}] {key} = {text!r} is not a list of {kind.__name__}",
                             section, key) from None
        if not vals:
            raise self.error(f"[{section}] {key} is empty", section, key)
        return vals

    def optional(self, section: str, key: str, sentinel: str):
        """Number, or ``None`` if missing or equal to ``sentinel``."""
        if not self.has(section, key) or self.raw(section, key).lower() == sentinel:
            return None
        return self.number(section, key, None)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate config text; raises :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False,
                                       default_section="\x00unused")
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno, source) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], exc.lineno, source) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()!r}", lineno, source) from None

    lines = _key_lines(text)
    rd = _Reader(parser, lines, source)
    for section in parser.sections():
        if section not in SECTIONS:
            raise rd.error(f"unknown section [{section}]", section)
        for key in parser.options(section):
            if key not in SECTIONS[section]:
                raise rd.error(f"unknown key {key!r} in [{section}]", section, key)

    if not parser.has_section("measure") or not parser.options("measure"):
        line = lines.get((None, "measure"))
        raise ConfigError("the [measure] block is missing or empty", line, source)
    try:
        measure = LevyMeasureSpec.from_mapping({k: parser.get("measure", k) for k in parser.options("measure")})
    except (HJMLevyError, ValueError) as exc:
        raise rd.error(str(exc), "measure", "kind") from None

    volatility = _volatility(rd)
    horizon = rd.number("model", "horizon", 1.0, positive=True)
    n = rd.number("model", "n", 200, int)
    if n < 2:
        raise rd.error("[model] n must be at least 2", "model", "n")
    eps = rd.number("model", "eps", 1e-4)
    if eps < 0:
        raise rd.error("[model] eps must be nonnegative", "model", "eps")
    f0 = _initial_curve(rd, horizon)

    master = rd.number("seeds", "master", 0, int)
    if not 0 <= master < 2**64:
        raise rd.error("[seeds] master must fit in 64 unsigned bits", "seeds", "master")
    count = rd.number("seeds", "count", 1, int)
    if count < 1:
        raise rd.error("[seeds] count must be at least 1", "seeds", "count")

    tol = rd.number("solver", "tol", 1e-8, positive=True)
    max_iter = rd.number("solver", "max_iter", 200, int)
    if max_iter < 1:
        raise rd.error("[solver] max_iter must be at least 1", "solver", "max_iter")
    ceiling = rd.number("solver", "ceiling", 1e12, positive=True)

    comparison = _comparison(rd, horizon, n)
    levels = rd.number_list("study", "f0_levels", (1.0, 10.0, 100.0))
    if any(not v > 0 for v in levels):
        raise rd.error("[study] f0_levels must be positive", "study", "f0_levels")
    sizes = rd.number_list("study", "grid_sizes", (50, 100, 200), int)
    if any(s < 2 for s in sizes):
        raise rd.error("[study] grid_sizes must be at least 2", "study", "grid_sizes")

    z_min = rd.number("exponent_table", "z_min", 1e-6, positive=True)
    z_max = rd.number("exponent_table", "z_max", 1e12, positive=True)
    if z_max <= z_min:
        raise rd.error("[exponent_table] z_max must exceed z_min", "exponent_table", "z_max")
    points = rd.number("exponent_table", "points", 181, int)
    if points < 2:
        raise rd.error("[exponent_table] points must be at least 2", "exponent_table", "points")
    threshold = rd.number("classify", "threshold", 10.0)
    out_dir = rd.raw("output", "dir") if rd.has("output", "dir") else "out"

    cfg = ExperimentConfig(measure, volatility, horizon, n, f0, eps, master, count, tol, max_iter,
                           ceiling, comparison, levels, sizes, z_min, z_max, points, threshold,
                           out_dir, source)
    try:
        cfg.validated_measure()
    except HJMLevyError as exc:
        raise rd.error(str(exc), "measure", "kind") from None
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path))


def _volatility(rd: _Reader) -> VolatilitySpec:
    sec = "volatility"
    form = rd.raw(sec, "form") if rd.has(sec, "form") else "constant"
    try:
        if form == "constant":
            value = rd.number(sec, "value", 1.0)
            lo = rd.number(sec, "lambda_low", value)
            hi = rd.number(sec, "lambda_high", max(value, 1.0))
            return VolatilitySpec.constant(value, lo, hi)
        if form == "separable_linear":
            for key in ("a", "b", "lambda_low", "lambda_high"):
                if not rd.has(sec, key):
                    raise rd.error(f"separable_linear volatility needs {key!r}", sec, "form")
            return VolatilitySpec.separable_linear(
                rd.number(sec, "a", None), rd.number(sec, "b", None),
                rd.number(sec, "lambda_low", None), rd.number(sec, "lambda_high", None))
    except ConfigError:
        raise
    except HJMLevyError as exc:
        raise rd.error(str(exc), sec, "form") from None
    raise rd.error(f"unknown volatility form {form!r}", sec, "form")


def _initial_curve(rd: _Reader, horizon: float):
    sec = "model"
    if rd.has(sec, "f0_knots") or rd.has(sec, "f0_values"):
        if rd.has(sec, "f0"):
            raise rd.error("give either f0 or f0_knots/f0_values, not both", sec, "f0")
        knots = rd.number_list(sec, "f0_knots", None)
        values = rd.number_list(sec, "f0_values", None)
        if knots is None or values is None or len(knots) != len(values):
            raise rd.error("f0_knots and f0_values must have equal length", sec, "f0_knots")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise rd.error("f0_knots must increase strictly", sec, "f0_knots")
        if knots[0] > 0 or knots[-1] < horizon:
            raise rd.error("f0_knots must cover [0, horizon]", sec, "f0_knots")
        if any(not v > 0 for v in values):
            raise rd.error("f0_values must be positive", sec, "f0_values")
        return (knots, values)
    return rd.number(sec, "f0", 1.0, positive=True)


def _comparison(rd: _Reader, horizon: float, n: int) -> ComparisonSettings:
    sec = "comparison"
    gamma = rd.optional(sec, "gamma", "certificate")
    if gamma is not None and not 0 < gamma < 1:
        raise rd.error("[comparison] gamma must lie in (0, 1)", sec, "gamma")
    alpha = rd.optional(sec, "alpha", "certificate")
    if alpha is not None and not alpha > 0:
        raise rd.error("[comparison] alpha must be positive", sec, "alpha")
    beta = rd.optional(sec, "beta", "certificate")
    corner = rd.optional(sec, "corner", "horizon")
    if corner is not None and not 0 < corner <= horizon:
        raise rd.error("[comparison] corner must lie in (0, horizon]", sec, "corner")
    deltas = None
    if rd.has(sec, "deltas") and rd.raw(sec, "deltas").lower() != "ladder":
        deltas = rd.number_list(sec, "deltas", None, int)
        if any(d < 1 for d in deltas):
            raise rd.error("[comparison] deltas are cell offsets >= 1", sec, "deltas")
    check = False
    if rd.has(sec, "check"):
        try:
            check = rd.parser.getboolean(sec, "check")
        except ValueError:
            raise rd.error("[comparison] check must be true or false", sec, "check") from None
    return ComparisonSettings(gamma, alpha, beta, corner, deltas, check)
