"""Experiment configuration in a flat ``section.key = value`` format.

Example::

    # KdV, Strang splitting
    equation.preset = kdv
    grid.n = 256
    split.method = strang
    split.dt = 0.0625
    split.T = 0.5
    u0.source = random
    u0.seed = 7

Every violation in a document is collected and reported together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .grid import GridSpec, RealField, SpectralField, random_band_limited_field, to_spectral
from .io import read_snapshot
from .operators import (
    ASpec,
    Burgers,
    ConvolutionKernel,
    CustomMultiplier,
    DerivativeTerm,
    FractionalLaplacian,
    MixedTerm,
    SQG,
)
from .presets import PRESETS, Preset, custom, make_preset
from .splitting import GODUNOV, STRANG, SplitConfig
from .subflows import BFlowControl

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "REQUIRED_KEYS"]

REQUIRED_KEYS = ("equation.preset", "grid.n", "split.method", "split.dt", "split.T")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


def _float(s: str) -> float:
    x = float(s)
    if not math.isfinite(x):
        raise ValueError(f"{s!r} is not finite")
    return x


def _int(s: str) -> int:
    return int(s, 10)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(_float(p) for p in s.split(",") if p.strip())


def _methods(s: str) -> tuple[str, ...]:
    out = tuple(p.strip().lower() for p in s.split(",") if p.strip())
    for m in out:
        if m not in (GODUNOV, STRANG):
            raise ValueError(f"unknown method {m!r}")
    return out


def _ints(s: str) -> tuple[int, ...]:
    return tuple(_int(p.strip()) for p in s.split(","))


def parse_aspec(text: str) -> ASpec:
    """``coef:deriv:l1,l2 ; coef:frac:alpha ; coef:mixed:alpha:l1,l2``."""
    terms = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(":")]
        if len(parts) < 3:
            raise ValueError(f"bad A term {chunk!r}")
        coef, kind = _float(parts[0]), parts[1]
        if kind == "deriv" and len(parts) == 3:
            terms.append((coef, DerivativeTerm(_ints(parts[2]))))
        elif kind == "frac" and len(parts) == 3:
            terms.append((coef, FractionalLaplacian(_float(parts[2]))))
        elif kind == "mixed" and len(parts) == 4:
            terms.append((coef, MixedTerm(_float(parts[2]), _ints(parts[3]))))
        else:
            raise ValueError(f"bad A term {chunk!r}")
    return ASpec(terms)


def parse_vspec(text: str, dims: int):
    """``burgers:a`` | ``sqg:beta`` | ``kernel:gaussian`` | ``zero``."""
    kind, _, arg = text.strip().partition(":")
    if kind == "burgers":
        return Burgers(_float(arg) if arg else 1.0)
    if kind == "sqg":
        return SQG(_float(arg) if arg else 1.0)
    if kind == "kernel":
        return ConvolutionKernel(arg or "gaussian")
    if kind == "zero":
        if dims == 1:
            return Burgers(0.0)
        return CustomMultiplier(lambda g: np.zeros((g.dims,) + g.shape))
    raise ValueError(f"unknown velocity {text!r}")


# key -> (parser, default); default None means "no default"
_SCHEMA: dict[str, tuple[Callable, object]] = {
    "equation.preset": (str, None),
    "equation.alpha": (_float, None),
    "equation.beta": (_float, None),
    "equation.kernel": (str, None),
    "equation.A": (str, None),
    "equation.v": (str, None),
    "grid.dims": (_int, None),
    "grid.n": (_int, None),
    "u0.source": (str, "function"),
    "u0.function": (str, None),
    "u0.seed": (_int, 0),
    "u0.decay": (_float, 6.0),
    "u0.amplitude": (_float, 1.0),
    "u0.file": (str, None),
    "split.method": (lambda s: s.strip().lower(), None),
    "split.dt": (_float, None),
    "split.T": (_float, None),
    "split.record_every": (_int, 1),
    "bflow.substep_cap": (_float, 0.5),
    "bflow.max_substeps": (_int, 200_000),
    "bflow.blowup_threshold": (_float, None),
    "bflow.blowup_factor": (_float, 100.0),
    "bflow.guard_index": (_float, 4.0),
    "study.n_dt": (_int, 5),
    "study.refinement": (_int, 6),
    "study.methods": (_methods, None),
    "admit.trials": (_int, 50),
    "admit.seed": (_int, 0),
    "admit.commutator_index": (_int, 3),
    "output.dir": (str, "out"),
    "output.norms": (_floats, (0.0, 2.0)),
}


def _u0_function(name: str, grid: GridSpec) -> np.ndarray:
    xs = grid.coordinates()
    if name == "sin":
        return np.sin(xs[0])
    if name == "cos":
        return np.cos(xs[0])
    if name == "two_mode":
        if grid.dims != 2:
            raise ValueError("two_mode initial data is two-dimensional")
        x, y = xs
        return np.sin(x) * np.cos(y) + 0.5 * np.cos(2 * x + y)
    if name == "bump":
        r2 = sum((x - np.pi) ** 2 for x in xs)
        return np.exp(-r2)
    raise ValueError(f"unknown initial function {name!r}")


_DEFAULT_U0 = {1: "sin", 2: "two_mode", 3: "bump"}


@dataclass
class ExperimentConfig:
    preset: Preset
    grid: GridSpec
    method: str
    dt: float
    T: float
    record_every: int
    bflow: BFlowControl
    u0_source: str
    u0_function: Optional[str]
    u0_seed: int
    u0_decay: float
    u0_amplitude: float
    u0_file: Optional[str]
    n_dt: int
    refinement: int
    methods: tuple[str, ...]
    admit_trials: int
    admit_seed: int
    commutator_index: int
    out_dir: str
    norms: tuple[float, ...]
    source: dict = field(default_factory=dict, repr=False)

    def split_config(self, method: Optional[str] = None, dt: Optional[float] = None) -> SplitConfig:
        return SplitConfig(
            method or self.method,
            self.dt if dt is None else dt,
            self.T,
            self.preset.a,
            self.preset.v,
            self.bflow,
            self.record_every,
        )

    def initial_field(self, seed: Optional[int] = None) -> SpectralField:
        if self.u0_source == "random":
            f = random_band_limited_field(
                self.grid,
                self.u0_seed if seed is None else seed,
                self.u0_decay,
                amplitude=self.u0_amplitude,
            )
        elif self.u0_source == "snapshot":
            f, _ = read_snapshot(self.u0_file)
            if f.grid != self.grid:
                raise ValueError(f"snapshot grid {f.grid} differs from configured grid {self.grid}")
        else:
            name = self.u0_function or _DEFAULT_U0[self.grid.dims]
            f = RealField(self.grid, self.u0_amplitude * _u0_function(name, self.grid))
        return to_spectral(f)

    def dt_list(self) -> list[float]:
        return [self.dt / 2**j for j in range(self.n_dt)]


def parse_config(text: str) -> ExperimentConfig:
    problems: list[str] = []
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected 'section.key = value', got {line.strip()!r}")
            continue
        if key not in _SCHEMA:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            problems.append(f"line {lineno}: duplicate key {key!r} (first on line {raw[key][0]})")
            continue
        raw[key] = (lineno, value)

    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        problems.append("missing required keys: " + ", ".join(missing))

    vals: dict[str, object] = {}
    where: dict[str, str] = {}
    for key, (parser, default) in _SCHEMA.items():
        if key in raw:
            lineno, text_value = raw[key]
            where[key] = f"line {lineno}"
            try:
                vals[key] = parser(text_value)
            except ValueError as exc:
                problems.append(f"line {lineno}: {key}: {exc}")
                vals[key] = None
        else:
            where[key] = "default"
            vals[key] = default

    def bad(key, msg):
        problems.append(f"{where.get(key, key)}: {key}: {msg}")

    # grid
    n, dims = vals["grid.n"], vals["grid.dims"]
    name = vals["equation.preset"]
    preset_dims = None
    if name is not None and name not in PRESETS and name != "custom":
        bad("equation.preset", f"unknown preset {name!r}; choose from {sorted(PRESETS) + ['custom']}")
        name = None
    if name in ("kdv", "viscous_burgers", "kawahara"):
        preset_dims = (1,)
    elif name == "sqg":
        preset_dims = (2,)
    elif name == "aggregation":
        preset_dims = (2, 3)
    if dims is None:
        dims = preset_dims[0] if preset_dims else 1
    if preset_dims and dims not in preset_dims:
        bad("grid.dims", f"preset {name} requires dims in {list(preset_dims)}, got {dims}")
    grid = None
    if n is not None:
        try:
            grid = GridSpec(dims, n)
        except ValueError as exc:
            bad("grid.n" if dims in (1, 2, 3) else "grid.dims", str(exc))

    # equation
    preset = None
    if name == "custom":
        if vals["equation.A"] is None or vals["equation.v"] is None:
            problems.append("equation.preset = custom requires equation.A and equation.v")
        else:
            try:
                a = parse_aspec(vals["equation.A"])
                v = parse_vspec(vals["equation.v"], dims)
                if grid is not None:
                    v.check_grid(grid)
                    a.symbol(grid)
                preset = custom(a, v, dims)
            except ValueError as exc:
                bad("equation.A", str(exc))
    elif name is not None:
        params = {}
        allowed = {
            "viscous_burgers": ("alpha",),
            "sqg": ("alpha", "beta"),
            "aggregation": ("alpha", "kernel"),
        }.get(name, ())
        for p in ("alpha", "beta", "kernel"):
            if vals[f"equation.{p}"] is not None:
                if p in allowed:
                    params[p] = vals[f"equation.{p}"]
                else:
                    bad(f"equation.{p}", f"not a parameter of preset {name}")
        try:
            preset = make_preset(name, **params)
            if grid is not None:
                preset.v.check_grid(grid)
        except ValueError as exc:
            bad("equation.preset", str(exc))

    # split
    method, dt, T = vals["split.method"], vals["split.dt"], vals["split.T"]
    if method is not None and method not in (GODUNOV, STRANG):
        bad("split.method", f"must be godunov or strang, got {method!r}")
    if dt is not None and not dt > 0:
        bad("split.dt", "must be positive")
    if T is not None and not T > 0:
        bad("split.T", "must be positive")
    if dt is not None and T is not None and dt > 0 and T > 0 and dt > T:
        bad("split.dt", f"dt={dt} exceeds T={T}")
    if vals["split.record_every"] is not None and vals["split.record_every"] < 1:
        bad("split.record_every", "must be >= 1")

    bflow = None
    try:
        bflow = BFlowControl(
            substep_cap=vals["bflow.substep_cap"],
            max_substeps=vals["bflow.max_substeps"],
            blowup_threshold=vals["bflow.blowup_threshold"],
            guard_index=vals["bflow.guard_index"],
            blowup_factor=vals["bflow.blowup_factor"],
        )
    except (ValueError, TypeError) as exc:
        problems.append(f"bflow: {exc}")

    source = vals["u0.source"]
    if source not in ("function", "random", "snapshot"):
        bad("u0.source", f"must be function, random or snapshot, got {source!r}")
    if source == "snapshot" and not vals["u0.file"]:
        bad("u0.file", "required when u0.source = snapshot")
    if source == "random" and vals["u0.decay"] is not None and not vals["u0.decay"] > 0:
        bad("u0.decay", "must be positive")
    if source == "function" and grid is not None:
        fname = vals["u0.function"] or _DEFAULT_U0[grid.dims]
        try:
            _u0_function(fname, GridSpec(grid.dims, 8))
        except ValueError as exc:
            bad("u0.function", str(exc))

    if vals["study.n_dt"] is not None and vals["study.n_dt"] < 1:
        bad("study.n_dt", "must be >= 1")
    if vals["study.refinement"] is not None and vals["study.refinement"] < 4:
        bad("study.refinement", "must be >= 4")
    if vals["admit.trials"] is not None and vals["admit.trials"] < 1:
        bad("admit.trials", "must be >= 1")
    norms = vals["output.norms"]
    if norms is not None and any(s < 0 for s in norms):
        bad("output.norms", "Sobolev indices must be non-negative")

    if problems:
        raise ConfigError(problems)

    return ExperimentConfig(
        preset=preset,
        grid=grid,
        method=method,
        dt=dt,
        T=T,
        record_every=vals["split.record_every"],
        bflow=bflow,
        u0_source=source,
        u0_function=vals["u0.function"],
        u0_seed=vals["u0.seed"],
        u0_decay=vals["u0.decay"],
        u0_amplitude=vals["u0.amplitude"],
        u0_file=vals["u0.file"],
        n_dt=vals["study.n_dt"],
        refinement=vals["study.refinement"],
        methods=vals["study.methods"] or (method,),
        admit_trials=vals["admit.trials"],
        admit_seed=vals["admit.seed"],
        commutator_index=vals["admit.commutator_index"],
        out_dir=vals["output.dir"],
        norms=norms,
        source={k: v for k, (_, v) in raw.items()},
    )


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
