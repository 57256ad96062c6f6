"""Experiment configuration: a line-based ``section.key = value`` format.

Numeric values accept small arithmetic expressions over literals and
``pi`` (``400*pi``, ``2**15``, ``-1/5``).  Every key is validated; an error
names the key, the line and the expected form.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

from .dynamics import PhysicsParams, SolverParams
from .errors import ConfigurationError
from .grid import Grid
from .oracles import GaussianSpec
from .verifier import CHECK_NAMES


@dataclass(frozen=True)
class GridConfig:
    L: float = 200 * math.pi
    M: int = 32768
    d: int = 1


@dataclass(frozen=True)
class PhysicsConfig:
    lam: float = math.nan
    alpha: float = math.nan


@dataclass(frozen=True)
class InitConfig:
    kind: str = "gaussian"
    a_re: float = 1.0
    a_im: float = 0.0
    amp_re: float = 1.0
    amp_im: float = 0.0
    center: float = 0.0
    boost: float = 0.0


@dataclass(frozen=True)
class TimeConfig:
    dt: float = 0.005
    t_end: float = 40.0
    snapshot_stride: int = 10
    early_dt: float | None = None
    early_until: float | None = None
    late_dt: float | None = None
    late_from: float | None = None


@dataclass(frozen=True)
class GuardConfig:
    margin: float = 0.1
    tol: float = 1e-8
    spectral_tol: float = 1e-8


@dataclass(frozen=True)
class VerifyConfig:
    checks: tuple[str, ...] = CHECK_NAMES
    tolerances: tuple[tuple[str, float], ...] = ()
    r: float = math.inf
    t_eval: float | None = None          # default t_end / 4
    keep_interval: float = 0.5
    virial_from: float = 1.0
    virial_to: float = 20.0
    law_until: float = 20.0
    rate_from: float | None = None       # default t_eval / 8
    rate_to: float | None = None         # default t_eval

    def tolerance_map(self) -> dict[str, float]:
        return dict(self.tolerances)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    emit_csv: bool = True
    emit_snapshots: bool = False
    distances: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    init: InitConfig = field(default_factory=InitConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    guard: GuardConfig = field(default_factory=GuardConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    name: str = "experiment"

    # -- derived objects ----------------------------------------------------

    def make_grid(self) -> Grid:
        return Grid(self.grid.L, self.grid.M, self.grid.d)

    def physics_params(self) -> PhysicsParams:
        return PhysicsParams(self.physics.lam, self.physics.alpha, self.grid.d)

    def gaussian(self) -> GaussianSpec:
        i = self.init
        return GaussianSpec(complex(i.a_re, i.a_im), complex(i.amp_re, i.amp_im), i.center, i.boost)

    def segments(self) -> list[SolverParams]:
        """Fixed-step segments: optional fine start, main step, optional coarse tail."""
        t, g = self.time, self.guard
        common = dict(snapshot_stride=t.snapshot_stride, boundary_margin=g.margin,
                      boundary_tol=g.tol, spectral_tol=g.spectral_tol)
        out = []
        start = 0.0
        if t.early_dt is not None and t.early_until is not None and 0 < t.early_until < t.t_end:
            out.append(SolverParams(t.early_dt, t.early_until, **common))
            start = t.early_until
        if t.late_dt is not None and t.late_from is not None and start < t.late_from < t.t_end:
            out.append(SolverParams(t.dt, t.late_from, **common))
            out.append(SolverParams(t.late_dt, t.t_end, **common))
        else:
            out.append(SolverParams(t.dt, t.t_end, **common))
        return out

    @property
    def t_eval(self) -> float:
        return self.verify.t_eval if self.verify.t_eval is not None else self.time.t_end / 4

    @property
    def rate_window(self) -> tuple[float, float]:
        te = self.t_eval
        lo = self.verify.rate_from if self.verify.rate_from is not None else te / 8
        hi = self.verify.rate_to if self.verify.rate_to is not None else te
        return lo, hi

    def with_overrides(self, assignments: dict[str, str]) -> "ExperimentConfig":
        text = to_text(self) + "\n" + "\n".join(f"{k} = {v}" for k, v in assignments.items())
        return parse_config(text, name=self.name)


# -- value parsing ----------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "inf": math.inf}


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("not an arithmetic expression")


def parse_number(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        value = _eval_node(ast.parse(text, mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ValueError(str(exc)) from None
    return float(value)


def _as_float(text):
    return parse_number(text)


def _as_optional_float(text):
    return None if text.strip().lower() in ("none", "") else parse_number(text)


def _as_int(text):
    v = parse_number(text)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _as_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("not a boolean")


def _as_str(text):
    if not text.strip():
        raise ValueError("empty string")
    return text.strip()


def _as_checks(text):
    t = text.strip()
    if t.lower() == "all":
        return CHECK_NAMES
    names = tuple(s.strip() for s in t.split(",") if s.strip())
    unknown = [n for n in names if n not in CHECK_NAMES]
    if unknown:
        raise ValueError(f"unknown checks {unknown}")
    return names


# key -> (section attribute, field, converter, expected-form text)
_KEYS: dict[str, tuple[str, str, Callable[[str], Any], str]] = {
    "grid.L": ("grid", "L", _as_float, "positive number (e.g. 200*pi)"),
    "grid.M": ("grid", "M", _as_int, "power of two >= 8"),
    "grid.d": ("grid", "d", _as_int, "1 or 2"),
    "physics.lambda": ("physics", "lam", _as_float, "finite number"),
    "physics.alpha": ("physics", "alpha", _as_float, "number > 0"),
    "init.kind": ("init", "kind", _as_str, "gaussian"),
    "init.a_re": ("init", "a_re", _as_float, "number > 0"),
    "init.a_im": ("init", "a_im", _as_float, "number"),
    "init.amp_re": ("init", "amp_re", _as_float, "number"),
    "init.amp_im": ("init", "amp_im", _as_float, "number"),
    "init.center": ("init", "center", _as_float, "number"),
    "init.boost": ("init", "boost", _as_float, "number"),
    "time.dt": ("time", "dt", _as_float, "positive number"),
    "time.t_end": ("time", "t_end", _as_float, "number >= 0"),
    "time.snapshot_stride": ("time", "snapshot_stride", _as_int, "integer >= 1"),
    "time.early_dt": ("time", "early_dt", _as_optional_float, "positive number or none"),
    "time.early_until": ("time", "early_until", _as_optional_float, "number in (0, t_end) or none"),
    "time.late_dt": ("time", "late_dt", _as_optional_float, "positive number or none"),
    "time.late_from": ("time", "late_from", _as_optional_float, "number in (0, t_end) or none"),
    "guard.margin": ("guard", "margin", _as_float, "number in (0, 0.5)"),
    "guard.tol": ("guard", "tol", _as_float, "positive number"),
    "guard.spectral_tol": ("guard", "spectral_tol", _as_float, "positive number"),
    "verify.checks": ("verify", "checks", _as_checks, "'all' or comma list of check names"),
    "verify.r": ("verify", "r", _as_float, "number >= 2 or inf"),
    "verify.t_eval": ("verify", "t_eval", _as_optional_float, "number in (0, t_end] or none"),
    "verify.keep_interval": ("verify", "keep_interval", _as_float, "positive multiple of time.dt*time.snapshot_stride"),
    "verify.virial_from": ("verify", "virial_from", _as_float, "number >= 0"),
    "verify.virial_to": ("verify", "virial_to", _as_float, "number > virial_from"),
    "verify.law_until": ("verify", "law_until", _as_float, "positive number"),
    "verify.rate_from": ("verify", "rate_from", _as_optional_float, "positive number or none"),
    "verify.rate_to": ("verify", "rate_to", _as_optional_float, "positive number or none"),
    "output.directory": ("output", "directory", _as_str, "path"),
    "output.emit_csv": ("output", "emit_csv", _as_bool, "true or false"),
    "output.emit_snapshots": ("output", "emit_snapshots", _as_bool, "true or false"),
    "output.distances": ("output", "distances", _as_bool, "true or false"),
}
_TOL_PREFIX = "verify.tol."
REQUIRED_KEYS = ("physics.lambda", "physics.alpha")


def _err(key, line, msg, expected=None) -> ConfigurationError:
    where = f"line {line}: " if line else ""
    tail = f" (expected {expected})" if expected else ""
    return ConfigurationError(key, f"{where}{msg}{tail}")


def parse_config(text: str, name: str = "experiment") -> ExperimentConfig:
    """Parse and fully validate ``text``; later assignments override earlier ones."""
    sections: dict[str, dict[str, Any]] = {s: {} for s in ("grid", "physics", "init", "time", "guard", "verify", "output")}
    tol_overrides: dict[str, float] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _err("?", lineno, f"cannot parse {raw.strip()!r}", "section.key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        lines[key] = lineno
        if key.startswith(_TOL_PREFIX):
            check = key[len(_TOL_PREFIX):]
            if check not in CHECK_NAMES:
                raise _err(key, lineno, f"unknown check {check!r}", f"one of {', '.join(CHECK_NAMES)}")
            try:
                v = parse_number(value)
            except ValueError:
                raise _err(key, lineno, f"bad value {value!r}", "number >= 0") from None
            if not v >= 0:
                raise _err(key, lineno, f"tolerance must be >= 0, got {value!r}", "number >= 0")
            tol_overrides[check] = v
            continue
        if key not in _KEYS:
            raise _err(key, lineno, "unknown key", f"one of {', '.join(_KEYS)} or verify.tol.<check>")
        section, attr, conv, expected = _KEYS[key]
        try:
            sections[section][attr] = conv(value)
        except ValueError as exc:
            raise _err(key, lineno, f"bad value {value!r}: {exc}", expected) from None

    for key in REQUIRED_KEYS:
        section, attr, _, expected = _KEYS[key]
        if attr not in sections[section]:
            raise _err(key, None, "missing required key", expected)

    if tol_overrides:
        sections["verify"]["tolerances"] = tuple(sorted(tol_overrides.items()))
    cfg = ExperimentConfig(
        grid=GridConfig(**sections["grid"]),
        physics=PhysicsConfig(**sections["physics"]),
        init=InitConfig(**sections["init"]),
        time=TimeConfig(**sections["time"]),
        guard=GuardConfig(**sections["guard"]),
        verify=VerifyConfig(**sections["verify"]),
        output=OutputConfig(**sections["output"]),
        name=name,
    )
    validate(cfg, lines)
    return cfg


def validate(cfg: ExperimentConfig, lines: dict[str, int] | None = None) -> None:
    """Range checks that mirror each module's preconditions."""
    lines = lines or {}

    def fail(key, msg):
        section, _, _, expected = _KEYS[key]
        raise _err(key, lines.get(key), msg, expected)

    # delegate to the domain constructors so messages stay in one place
    for key, build in (("grid", cfg.make_grid), ("physics", cfg.physics_params)):
        try:
            build()
        except ConfigurationError as exc:
            full = {"lambda": "physics.lambda", "alpha": "physics.alpha"}.get(exc.field, f"{key}.{exc.field}")
            if full == "physics.d":
                full = "grid.d"
            raise _err(full, lines.get(full), exc.message, _KEYS.get(full, (None,) * 4)[3]) from None
    if cfg.init.kind != "gaussian":
        fail("init.kind", f"unsupported initial datum {cfg.init.kind!r}")
    if not cfg.init.a_re > 0:
        fail("init.a_re", "Gaussian width needs Re a > 0")
    t = cfg.time
    if not (math.isfinite(t.dt) and t.dt > 0):
        fail("time.dt", f"got {t.dt!r}")
    if not (math.isfinite(t.t_end) and t.t_end >= 0):
        fail("time.t_end", f"got {t.t_end!r}")
    if t.snapshot_stride < 1:
        fail("time.snapshot_stride", f"got {t.snapshot_stride!r}")
    if t.early_dt is not None and not t.early_dt > 0:
        fail("time.early_dt", f"got {t.early_dt!r}")
    if t.early_until is not None and not 0 < t.early_until:
        fail("time.early_until", f"got {t.early_until!r}")
    if t.late_dt is not None and not t.late_dt > 0:
        fail("time.late_dt", f"got {t.late_dt!r}")
    if t.late_from is not None and not 0 < t.late_from:
        fail("time.late_from", f"got {t.late_from!r}")
    g = cfg.guard
    if not 0 < g.margin < 0.5:
        fail("guard.margin", f"got {g.margin!r}")
    if not g.tol > 0:
        fail("guard.tol", f"got {g.tol!r}")
    if not g.spectral_tol > 0:
        fail("guard.spectral_tol", f"got {g.spectral_tol!r}")
    v = cfg.verify
    if not (v.r >= 2):
        fail("verify.r", f"got {v.r!r}")
    if v.t_eval is not None and not 0 < v.t_eval <= t.t_end:
        fail("verify.t_eval", f"got {v.t_eval!r}")
    if not v.keep_interval > 0:
        fail("verify.keep_interval", f"got {v.keep_interval!r}")
    # fields are only retained at recorded samples of the main segment
    spacing = t.dt * t.snapshot_stride
    ratio = v.keep_interval / spacing
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
        fail("verify.keep_interval", f"{v.keep_interval!r} is not a multiple of dt*snapshot_stride = {spacing!r}")
    if not (0 <= v.virial_from < v.virial_to):
        fail("verify.virial_to", f"window [{v.virial_from}, {v.virial_to}] is empty")
    if not v.law_until > 0:
        fail("verify.law_until", f"got {v.law_until!r}")
    for key in ("verify.rate_from", "verify.rate_to"):
        val = getattr(v, key.split(".")[1])
        if val is not None and not val > 0:
            fail(key, f"got {val!r}")


# -- serialization ----------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, tuple):
        return ",".join(v)
    return str(v)


def to_text(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(to_text(c)) == c``."""
    out = []
    for key, (section, attr, _, _) in _KEYS.items():
        value = getattr(getattr(cfg, section), attr)
        if key.startswith("physics.") and isinstance(value, float) and math.isnan(value):
            continue
        out.append(f"{key} = {_fmt(value)}")
    for check, tol in cfg.verify.tolerances:
        out.append(f"{_TOL_PREFIX}{check} = {tol!r}")
    return "\n".join(out) + "\n"


def defaults_text() -> str:
    """Documented defaults, with the two required keys shown as placeholders."""
    body = to_text(ExperimentConfig())
    return (
        "# nlslab experiment defaults\n"
        "# required:\n"
        "#   physics.lambda = <coupling>\n"
        "#   physics.alpha = <power, > 0>\n"
        "# verify.t_eval = none means t_end/4; verify.rate_from/rate_to = none mean t_eval/8 and t_eval\n"
        "# verify.tol.<check> = <value> overrides one tolerance\n"
        + body
    )


def load_config(path) -> ExperimentConfig:
    from pathlib import Path

    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), name=p.stem)


def override_config(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    """Replace whole sub-configs programmatically (validated)."""
    new = replace(cfg, **sections)
    validate(new)
    return new
