"""Run configuration: ``key = value`` text grouped under ``[section]`` headers.

Every key is optional; an empty file yields the defaults below.  Unknown
sections and keys are rejected with their line number.

::

    [grid]      n = 64, length = 64
    [model]     m0 = 0.16, n0 = 5.12, chi12 = 4, chi13 = 10, chi23 = 1.6,
                eps1 = eps2 = eps3 = 1, mob1 = mob2 = 1
    [scheme]    dt = 0.001, a_preset = paper-experiment, a1, a2
    [solver]    grad_tol, max_iters = 200, boundary_fraction = 0.9,
                linear_tol = 1e-8, armijo_c = 1e-4, max_linear_iters = 200
    [initial]   kind = example2, seed = 0, path, independent_noise = false
    [run]       t_final = 0.1, output_dir = output, snapshot_stride = 0,
                diag_stride = 1, plots = true
    [converge]  sizes = 16,32,64,128, dt_coef = 0.002, t_final = 0.4,
                kind = example1, transfer = bilinear

Explicit ``a1``/``a2`` override the preset.
"""

from __future__ import annotations

import configparser
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .energy import ModelParams
from .grid import Grid
from .harness import INITIAL_KINDS, TRANSFER_MODES, RefinementPath
from .scheme import A_PRESETS, SchemeParams, a_preset, energy_thresholds, steps_for
from .solver import SolverParams

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


_SCHEMA = {
    "grid": {"n": int, "length": float},
    "model": {k: float for k in ("m0", "n0", "chi12", "chi13", "chi23",
                                 "eps1", "eps2", "eps3", "mob1", "mob2")},
    "scheme": {"dt": float, "a_preset": str, "a1": float, "a2": float},
    "solver": {"grad_tol": float, "max_iters": int, "boundary_fraction": float,
               "linear_tol": float, "armijo_c": float, "max_linear_iters": int},
    "initial": {"kind": str, "seed": int, "path": str, "independent_noise": bool},
    "run": {"t_final": float, "output_dir": str, "snapshot_stride": int,
            "diag_stride": int, "plots": bool},
    "converge": {"sizes": str, "dt_coef": float, "t_final": float, "kind": str,
                 "transfer": str},
}


@dataclass
class InitialSpec:
    kind: str = "example2"
    seed: int = 0
    path: str | None = None
    independent_noise: bool = False


@dataclass
class ConvergeSpec:
    path: RefinementPath = field(default_factory=lambda: RefinementPath((16, 32, 64, 128)))
    kind: str = "example1"
    transfer: str = "bilinear"


@dataclass
class RunConfig:
    grid: Grid
    model: ModelParams
    scheme: SchemeParams
    a_preset: str
    initial: InitialSpec
    t_final: float = 0.1
    output_dir: str = "output"
    snapshot_stride: int = 0
    diag_stride: int = 1
    plots: bool = True
    converge: ConvergeSpec = field(default_factory=ConvergeSpec)


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    where = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:\s]+)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


def _convert(kind, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw.strip())
    if kind is float:
        return float(raw.strip())
    return raw.strip()


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigError(f"malformed line: {exc.errors[0][1] if line else exc}", line) from None

    lines = _line_index(text)
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)))
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            try:
                values[(section, key)] = (_convert(_SCHEMA[section][key], raw), line)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {section}.{key}: {exc}", line) from None

    def get(section, key, default):
        return values[(section, key)][0] if (section, key) in values else default

    def line_of(*keys):
        for section, key in keys:
            if (section, key) in values:
                return values[(section, key)][1]
        return lines.get((keys[0][0], None))

    def build(what, fn, *keys):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid {what}: {exc}", line_of(*keys)) from None

    grid = build("grid", lambda: Grid(get("grid", "n", 64), get("grid", "length", 64.0)),
                 ("grid", "n"), ("grid", "length"))
    model_keys = _SCHEMA["model"].keys()
    model = build("model parameters",
                  lambda: ModelParams(**{k: get("model", k, getattr(ModelParams(), k))
                                         for k in model_keys}),
                  *[("model", k) for k in ("chi12", "chi13", "chi23", "m0", "n0")])
    solver = build("solver settings", lambda: SolverParams(**{
        k: get("solver", k, getattr(SolverParams(), k)) for k in _SCHEMA["solver"]}),
        *[("solver", k) for k in _SCHEMA["solver"]])

    preset = get("scheme", "a_preset", "paper-experiment")
    if preset not in A_PRESETS:
        raise ConfigError(f"unknown a_preset {preset!r}; expected one of {A_PRESETS}",
                          line_of(("scheme", "a_preset")))
    p1, p2 = a_preset(model, preset)
    a1, a2 = get("scheme", "a1", p1), get("scheme", "a2", p2)
    if ("scheme", "a1") in values or ("scheme", "a2") in values:
        preset = "explicit"
    scheme = build("scheme settings",
                   lambda: SchemeParams(get("scheme", "dt", 1e-3), a1, a2, solver),
                   ("scheme", "dt"), ("scheme", "a1"), ("scheme", "a2"))
    t1, t2 = energy_thresholds(model)
    for name, value, threshold in (("a1", a1, t1), ("a2", a2, t2)):
        if value < threshold:
            log.warning("%s = %g is below the energy-decay threshold %g; decay of the "
                        "modified energy E is not guaranteed", name, value, threshold)

    initial = InitialSpec(get("initial", "kind", "example2"), get("initial", "seed", 0),
                          get("initial", "path", None), get("initial", "independent_noise", False))
    if initial.kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial kind {initial.kind!r}; expected one of {INITIAL_KINDS}",
                          line_of(("initial", "kind")))
    if initial.kind == "file":
        if not initial.path:
            raise ConfigError("initial kind 'file' needs a path", line_of(("initial", "kind")))
        if base_dir is not None and not Path(initial.path).is_absolute():
            initial.path = str(Path(base_dir) / initial.path)

    t_final = get("run", "t_final", 0.1)
    build("t_final", lambda: steps_for(t_final, scheme.dt), ("run", "t_final"), ("scheme", "dt"))
    for key in ("snapshot_stride", "diag_stride"):
        low = 0 if key == "snapshot_stride" else 1
        if get("run", key, low) < low:
            raise ConfigError(f"{key} must be >= {low}", line_of(("run", key)))
    snap, diag = get("run", "snapshot_stride", 0), get("run", "diag_stride", 1)
    if snap and snap % diag:
        # snapshots are taken when a diagnostics record is
        raise ConfigError(f"snapshot_stride {snap} must be a multiple of diag_stride {diag}",
                          line_of(("run", "snapshot_stride")))

    def make_path():
        sizes = tuple(int(s) for s in get("converge", "sizes", "16,32,64,128").split(","))
        return RefinementPath(sizes, grid.length, get("converge", "dt_coef", 0.002),
                              get("converge", "t_final", 0.4))

    conv = ConvergeSpec(build("refinement path", make_path, ("converge", "sizes"),
                              ("converge", "dt_coef"), ("converge", "t_final")),
                        get("converge", "kind", "example1"), get("converge", "transfer", "bilinear"))
    if conv.kind not in ("example1", "example2"):
        raise ConfigError(f"convergence study kind must be example1 or example2, got {conv.kind!r}",
                          line_of(("converge", "kind")))
    if conv.transfer not in TRANSFER_MODES:
        raise ConfigError(f"unknown transfer {conv.transfer!r}; expected one of {TRANSFER_MODES}",
                          line_of(("converge", "transfer")))

    return RunConfig(grid=grid, model=model, scheme=scheme, a_preset=preset, initial=initial,
                     t_final=t_final, output_dir=get("run", "output_dir", "output"),
                     snapshot_stride=get("run", "snapshot_stride", 0),
                     diag_stride=get("run", "diag_stride", 1), plots=get("run", "plots", True),
                     converge=conv)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path} is not UTF-8: {exc}") from None
    return parse_config(text, base_dir=path.parent)
