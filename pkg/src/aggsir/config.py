"""Run descriptions in a sectioned ``key = value`` text format.

::

    [model]            kind, alpha, beta, epsilon (+ compartments, reaction for generic)
    [kernel]           shared kernel: type = zero|quadabs|gaussian|tabulated, parameters
    [kernel S I]       kernel W[S, I], overrides the shared one for that pair
    [grid]             lo, hi, n  (two comma-separated values each for 2D)
    [init S]           profile = indicator|gaussian|constant, parameters
    [solver]           t_final, dt or cfl, rk, snapshot_every, strict_cfl, cfl_limit
    [output]           directory, prefix
    [study]            eps (list), dx (list), lo/hi for refinement domains

``#`` starts a comment.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import AggsirError, ConfigParseError, ConfigValidationError
from .grid import Grid, build_grid, indicator, project_function
from .kernels import Gaussian, KernelMatrix, QuadAbs, Zero, load_tabulated
from .models import ModelSpec, make_generic, make_sir, make_sis
from .solver import SolverConfig, State


def _floats(text: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if parts == [""]:
        return []
    return [float(p) for p in parts]


def _ints(text: str) -> list[int]:
    parts = [p.strip() for p in text.split(",")]
    if parts == [""]:
        return []
    return [int(p) for p in parts]


def _names(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "model": {
        "kind": _str,
        "alpha": float,
        "beta": float,
        "epsilon": float,
        "compartments": _names,
        "reaction": _str,
        "conservative": _bool,
    },
    "kernel": {"type": _str, "gamma": float, "amplitude": float, "sigma": float, "sign": _str, "file": _str},
    "grid": {"lo": _floats, "hi": _floats, "n": _ints},
    "init": {
        "profile": _str,
        "lo": _floats,
        "hi": _floats,
        "value": float,
        "center": _floats,
        "width": float,
        "mass": float,
    },
    "solver": {
        "t_final": float,
        "dt": float,
        "cfl": float,
        "rk": _str,
        "snapshot_every": int,
        "strict_cfl": _bool,
        "cfl_limit": float,
    },
    "output": {"directory": _str, "prefix": _str},
    "study": {"eps": _floats, "dx": _floats, "lo": _floats, "hi": _floats},
}

_SECTION_ORDER = ("model", "kernel", "grid", "init", "solver", "output", "study")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    """Parsed sections. ``sections`` maps a header tuple to its key/value dict."""

    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, compare=False)
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def get(self, header: tuple, key: str, default=None):
        return self.sections.get(header, {}).get(key, default)

    def section(self, header: tuple) -> dict:
        return self.sections.get(header, {})

    def line_of(self, header: tuple, key: str | None = None):
        return self.lines.get((header, key)) or self.lines.get((header, None))

    # ------------------------------------------------------------------ building

    def _fail(self, header, key, message):
        name = ".".join(header) + (f".{key}" if key else "")
        raise ConfigValidationError(name, message, self.line_of(header, key))

    @property
    def compartments(self) -> tuple[str, ...]:
        kind = self.get(("model",), "kind")
        if kind == "sir":
            return ("S", "I", "R")
        if kind == "sis":
            return ("S", "I")
        names = self.get(("model",), "compartments")
        if not names:
            self._fail(("model",), "compartments", "generic models need a compartment list")
        return tuple(names)

    def build_grid(self) -> Grid:
        g = ("grid",)
        for key in ("lo", "hi", "n"):
            if key not in self.section(g):
                self._fail(g, key, "missing")
        lo, hi, n = (self.get(g, k) for k in ("lo", "hi", "n"))
        if not (len(lo) == len(hi) == len(n)) or len(n) not in (1, 2):
            self._fail(g, None, "lo, hi and n need 1 or 2 entries each")
        try:
            if len(n) == 1:
                return build_grid(lo[0], hi[0], n[0])
            return build_grid(lo, hi, n)
        except AggsirError as exc:
            self._fail(g, None, str(exc))

    def _kernel(self, header) -> Any:
        sec = self.section(header)
        kind = sec.get("type")
        try:
            if kind == "zero":
                return Zero()
            if kind == "quadabs":
                return QuadAbs(sec["gamma"])
            if kind == "gaussian":
                sign = sec.get("sign", "attractive")
                if sign not in ("attractive", "repulsive"):
                    self._fail(header, "sign", "must be attractive or repulsive")
                return Gaussian(sec["amplitude"], sec["sigma"], sign == "attractive")
            if kind == "tabulated":
                path = Path(sec["file"])
                return load_tabulated(path if path.is_absolute() else self.base_dir / path)
        except KeyError as exc:
            self._fail(header, exc.args[0], "missing")
        except (ValueError, OSError) as exc:
            self._fail(header, None, str(exc))
        self._fail(header, "type", f"unknown kernel type {kind!r}")

    def build_kernels(self) -> KernelMatrix:
        names = self.compartments
        shared = self._kernel(("kernel",)) if ("kernel",) in self.sections else None
        pairs = {}
        for header in self.sections:
            if header[0] != "kernel" or len(header) == 1:
                continue
            if len(header) != 3 or header[1] not in names or header[2] not in names:
                self._fail(header, None, f"kernel pair must name two of {names}")
            pairs[(header[1], header[2])] = self._kernel(header)
        if shared is None and len(pairs) < len(names) ** 2 and pairs:
            shared = Zero()
        if shared is None and not pairs:
            self._fail(("kernel",), None, "no kernel given")
        if not pairs:
            return KernelMatrix.shared_kernel(names, shared)
        return KernelMatrix.from_pairs(names, pairs, default=shared)

    def _reaction(self) -> Callable | None:
        spec = self.get(("model",), "reaction", "zero")
        if spec in ("zero", "none"):
            return None
        mod, _, attr = spec.partition(":")
        try:
            return getattr(importlib.import_module(mod), attr)
        except (ImportError, AttributeError, ValueError) as exc:
            self._fail(("model",), "reaction", f"cannot import {spec!r}: {exc}")

    def build_model(self) -> ModelSpec:
        m = ("model",)
        kind = self.get(m, "kind")
        if kind not in ("sir", "sis", "generic"):
            self._fail(m, "kind", f"must be sir, sis or generic, got {kind!r}")
        alpha = self.get(m, "alpha", 0.0)
        beta = self.get(m, "beta", 0.0)
        eps = self.get(m, "epsilon", 0.0)
        for key, v in (("alpha", alpha), ("beta", beta), ("epsilon", eps)):
            if not (math.isfinite(v) and v >= 0):
                self._fail(m, key, f"must be finite and >= 0, got {v}")
        km = self.build_kernels()
        try:
            if kind == "sir":
                return make_sir(alpha, beta, km, eps)
            if kind == "sis":
                if not km.shared:
                    self._fail(("kernel",), None, "sis models use one shared kernel")
                return make_sis(alpha, beta, km[("S", "S")], eps)
            return make_generic(km, self._reaction(), eps, bool(self.get(m, "conservative", False)))
        except AggsirError as exc:
            if isinstance(exc, ConfigValidationError):
                raise
            self._fail(m, None, str(exc))

    def _profile(self, grid: Grid, header) -> np.ndarray:
        sec = self.section(header)
        kind = sec.get("profile")
        d = grid.dim
        try:
            if kind == "constant":
                return np.full(grid.shape, float(sec["value"]))
            if kind == "indicator":
                lo, hi = sec["lo"], sec["hi"]
                if len(lo) != d or len(hi) != d:
                    self._fail(header, "lo", f"needs {d} entries")
                return project_function(grid, indicator(lo, hi, sec["value"])).values
            if kind == "gaussian":
                c = np.asarray(sec["center"], dtype=float)
                w, mass = sec["width"], sec["mass"]
                if len(c) != d:
                    self._fail(header, "center", f"needs {d} entries")
                if not w > 0:
                    self._fail(header, "width", "must be > 0")
                norm = mass / (2 * math.pi * w * w) ** (d / 2)

                def bump(*x):
                    r2 = sum((xa - ca) ** 2 for xa, ca in zip(x, c))
                    return norm * np.exp(-r2 / (2 * w * w))

                return project_function(grid, bump).values
        except KeyError as exc:
            self._fail(header, exc.args[0], "missing")
        except AggsirError as exc:
            self._fail(header, None, str(exc))
        self._fail(header, "profile", f"unknown profile {kind!r}")

    def build_state(self, grid: Grid) -> State:
        names = self.compartments
        for header in self.sections:
            if header[0] == "init" and (len(header) != 2 or header[1] not in names):
                self._fail(header, None, f"init section must name one of {names}")
        rows = []
        for name in names:
            header = ("init", name)
            rows.append(np.zeros(grid.shape) if header not in self.sections else self._profile(grid, header))
        data = np.stack(rows)
        if np.any(data < 0):
            self._fail(("init",), None, "initial densities must be nonnegative")
        return State(grid, names, data, 0.0)

    def build_solver(self) -> SolverConfig:
        s = ("solver",)
        sec = self.section(s)
        if "t_final" not in sec:
            self._fail(s, "t_final", "missing")
        try:
            return SolverConfig(
                t_final=sec["t_final"],
                dt=sec.get("dt"),
                cfl=sec.get("cfl"),
                rk=sec.get("rk", "ssp2"),
                snapshot_every=sec.get("snapshot_every", 1),
                strict_cfl=sec.get("strict_cfl", True),
                cfl_limit=sec.get("cfl_limit", 0.5),
            )
        except ValueError as exc:
            self._fail(s, None, str(exc))

    def build(self):
        """(model, grid, initial state, solver config)."""
        model = self.build_model()
        grid = self.build_grid()
        state = self.build_state(grid)
        return model, grid, state, self.build_solver()

    @property
    def output_dir(self) -> Path:
        return Path(self.get(("output",), "directory", "out"))

    @property
    def prefix(self) -> str:
        return self.get(("output",), "prefix", "run")


def parse_config(text: str, base_dir: Path | str | None = None, validate: bool = True) -> RunConfig:
    """Parse and (by default) fully validate a run description."""
    cfg = RunConfig(base_dir=Path(base_dir) if base_dir else Path.cwd())
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(f"malformed section header {raw.strip()!r}", lineno)
            header = tuple(line[1:-1].split())
            if not header or header[0] not in SCHEMA:
                raise ConfigParseError(f"unknown section {line!r}", lineno)
            if header in cfg.sections:
                raise ConfigParseError(f"duplicate section {line!r}", lineno)
            cfg.sections[header] = {}
            cfg.lines[(header, None)] = lineno
            continue
        if header is None:
            raise ConfigParseError("key outside of any section", lineno)
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        schema = SCHEMA[header[0]]
        if key not in schema:
            raise ConfigParseError(f"unknown key {key!r} in section [{' '.join(header)}]", lineno)
        if key in cfg.sections[header]:
            raise ConfigParseError(f"duplicate key {key!r}", lineno)
        try:
            cfg.sections[header][key] = schema[key](value)
        except ValueError as exc:
            raise ConfigValidationError(".".join(header) + "." + key, f"bad value {value.strip()!r}: {exc}", lineno)
        cfg.lines[(header, key)] = lineno
    if validate:
        for required in ("model", "grid", "solver"):
            if (required,) not in cfg.sections:
                raise ConfigValidationError(required, "section missing")
        cfg.build()
        study = cfg.section(("study",))
        if "eps" in study and not study["eps"]:
            cfg._fail(("study",), "eps", "empty list")
        if "dx" in study and not study["dx"]:
            cfg._fail(("study",), "dx", "empty list")
    return cfg


def load_config(path: str | Path, validate: bool = True) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent, validate=validate)


def print_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(print_config(c))`` equals ``c``."""

    def order(header):
        return (_SECTION_ORDER.index(header[0]), header[1:])

    out = []
    for header in sorted(cfg.sections, key=order):
        out.append(f"[{' '.join(header)}]")
        for key, value in cfg.sections[header].items():
            out.append(f"{key} = {_fmt(value)}")
        out.append("")
    return "\n".join(out)
