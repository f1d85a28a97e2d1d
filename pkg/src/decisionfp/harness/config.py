"""Experiment configuration: a single TOML file, validated into dataclasses.

Schema (every table and key is optional; unknown keys are rejected)::

    seed = 0
    output_dir = "runs"                  # else $DECISIONFP_OUTPUT_ROOT, else ./runs
    backends = ["reduced", "fp2d"]       # subset of sde, fp2d, reduced
    cases = ["unbiased", "biased"]

    [model]
    preset = "decision"                  # or "literal"; field overrides below
    delta_lambda = 0.01                  # bias of the "biased" case
    nu_c = 20.0  alpha = 4.0  w = 0.45  w_hat = -1.5  lambda2 = 15.0  beta = 0.3  nu_max = 20.0

    [grids]
    nx = 128  ny = 128  n1d = 1001  t_end = 20000.0  dt_2d = 10.0  dt_1d = 10.0
    y_max_factor = 1.25  snapshots = 4

    [sde]
    n_paths = 100000  dt = 0.001  t_end = 5.0  match_dt = 0.005  compare_nx = 64
    fpt_paths = 10000  fpt_dt = 0.01  horizon = 20000.0  workers = 1

    [sweep]
    delta_lambda = [0.0, 0.005, 0.01, 0.02, 0.04]
    w_plus = [2.5685, 2.5695, 2.5705]
    workers = 1

    [three_well]                         # fields of ThreeWellParams except w_plus
    family = "cubic-quintic"
"""
from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ParseError, ValidationError
from ..model import PRESET_ALIASES, PRESET_BIAS, PRESETS, ModelParams, resolve_preset
from ..threewell import ThreeWellParams

BACKENDS = ("sde", "fp2d", "reduced")
CASES = ("unbiased", "biased")
OUTPUT_ENV = "DECISIONFP_OUTPUT_ROOT"


@dataclass(frozen=True)
class GridConfig:
    nx: int = 128
    ny: int = 128
    n1d: int = 1001
    t_end: float = 20000.0
    dt_2d: float = 10.0
    dt_1d: float = 10.0
    y_max_factor: float = 1.25
    snapshots: int = 4


@dataclass(frozen=True)
class SdeConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    t_end: float = 5.0
    match_dt: float = 5e-3
    compare_nx: int = 64
    fpt_paths: int = 10_000
    fpt_dt: float = 0.01
    horizon: float = 20000.0
    workers: int = 1


@dataclass(frozen=True)
class SweepConfig:
    delta_lambda: tuple[float, ...] = (0.0, 0.005, 0.01, 0.02, 0.04)
    w_plus: tuple[float, ...] = (2.5685, 2.5695, 2.5705)
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams = field(default_factory=lambda: PRESETS["decision"])
    delta_lambda: float = 0.01
    preset: str | None = "decision"
    grids: GridConfig = field(default_factory=GridConfig)
    sde: SdeConfig = field(default_factory=SdeConfig)
    sweep: SweepConfig | None = None
    three_well: ThreeWellParams = field(default_factory=ThreeWellParams)
    backends: tuple[str, ...] = ("reduced", "fp2d")
    cases: tuple[str, ...] = CASES
    seed: int = 0
    output_dir: str | None = None

    def output_root(self) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return Path(os.environ.get(OUTPUT_ENV, "runs"))

    def to_dict(self) -> dict:
        """Plain-data view used for hashing and the run record."""
        out = dataclasses.asdict(self)
        out.pop("output_dir")
        return out


def _positive(section: str, obj, names, strict=True):
    for name in names:
        v = getattr(obj, name)
        if (v <= 0) if strict else (v < 0):
            raise ValidationError(f"{section}.{name}", "must be > 0" if strict else "must be >= 0")


def _build(cls, section: str, data: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ValidationError(f"{section}.{key}", "unknown key")
        f = known[key]
        ftype = str(f.type)
        try:
            if ftype == "int":
                if isinstance(value, bool) or not float(value).is_integer():
                    raise TypeError
                value = int(value)
            elif ftype == "float":
                if isinstance(value, bool):
                    raise TypeError
                value = float(value)
            elif ftype.startswith("tuple"):
                if not isinstance(value, list):
                    raise TypeError
                value = tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ValidationError(f"{section}.{key}", f"expected {ftype}") from None
        kwargs[key] = value
    return cls(**kwargs)


def _model(data: dict) -> tuple[ModelParams, float, str | None]:
    data = dict(data)
    preset = data.pop("preset", "decision")
    if preset is not None:
        try:
            preset = resolve_preset(preset)
        except (KeyError, TypeError):
            names = sorted(PRESETS) + sorted(PRESET_ALIASES)
            raise ValidationError("model.preset", f"unknown preset {preset!r}; choose from {names}") from None
    base = PRESETS[preset] if preset else ModelParams()
    delta = data.pop("delta_lambda", PRESET_BIAS.get(preset, 0.01))
    if "lambda1" in data:
        raise ValidationError("model.lambda1", "set lambda2 and delta_lambda instead")
    overrides = {}
    names = {f.name for f in dataclasses.fields(ModelParams)}
    for key, value in data.items():
        if key not in names:
            raise ValidationError(f"model.{key}", "unknown key")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"model.{key}", "expected a number")
        overrides[key] = float(value)
    if "lambda2" in overrides:
        overrides["lambda1"] = overrides["lambda2"]
    params = base.replace(**overrides)  # ModelParams raises ValidationError naming the field
    if isinstance(delta, bool) or not isinstance(delta, (int, float)):
        raise ValidationError("model.delta_lambda", "expected a number")
    return params.replace(lambda1=params.lambda2), float(delta), preset


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    allowed = {"seed", "output_dir", "backends", "cases", "model", "grids", "sde", "sweep", "three_well"}
    for key in data:
        if key not in allowed:
            raise ValidationError(key, "unknown key")
    for key in ("model", "grids", "sde", "sweep", "three_well"):
        if key in data and not isinstance(data[key], dict):
            raise ValidationError(key, "must be a table")
    model, delta, preset = _model(data.get("model", {}))
    grids = _build(GridConfig, "grids", data.get("grids", {}))
    sde = _build(SdeConfig, "sde", data.get("sde", {}))
    sweep = _build(SweepConfig, "sweep", data["sweep"]) if "sweep" in data else None
    tw_data = dict(data.get("three_well", {}))
    if "w_plus" in tw_data:
        raise ValidationError("three_well.w_plus", "w_plus values belong in [sweep]")
    tw_fields = {f.name for f in dataclasses.fields(ThreeWellParams)}
    for key in tw_data:
        if key not in tw_fields:
            raise ValidationError(f"three_well.{key}", "unknown key")
    try:
        three_well = ThreeWellParams(**tw_data)
    except ValidationError as exc:
        raise ValidationError(f"three_well.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    except TypeError as exc:
        raise ValidationError("three_well", str(exc)) from None

    backends = tuple(data.get("backends", ("reduced", "fp2d")))
    if not backends:
        raise ValidationError("backends", "at least one backend is required")
    for b in backends:
        if b not in BACKENDS:
            raise ValidationError("backends", f"unknown backend {b!r}")
    cases = tuple(data.get("cases", CASES))
    for c in cases:
        if c not in CASES:
            raise ValidationError("cases", f"unknown case {c!r}")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed", "must be a non-negative integer")
    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ValidationError("output_dir", "must be a string")

    _positive("grids", grids, ("nx", "ny", "n1d", "dt_2d", "dt_1d", "y_max_factor"))
    _positive("grids", grids, ("t_end", "snapshots"), strict=False)
    if grids.nx < 8 or grids.ny < 8:
        raise ValidationError("grids.nx", "2D grids need at least 8 cells per axis")
    if grids.y_max_factor <= 1:
        raise ValidationError("grids.y_max_factor", "must be > 1")
    _positive("sde", sde, ("n_paths", "dt", "t_end", "match_dt", "compare_nx", "fpt_paths", "fpt_dt",
                           "horizon", "workers"))
    if grids.nx % sde.compare_nx or grids.ny % sde.compare_nx:
        raise ValidationError("sde.compare_nx", "must divide grids.nx and grids.ny")
    if sweep is not None:
        if not sweep.delta_lambda:
            raise ValidationError("sweep.delta_lambda", "must be nonempty")
        if not sweep.w_plus:
            raise ValidationError("sweep.w_plus", "must be nonempty")
        if any(w <= 0 for w in sweep.w_plus):
            raise ValidationError("sweep.w_plus", "values must be > 0")
        _positive("sweep", sweep, ("workers",))
    return ExperimentConfig(model=model, delta_lambda=delta, preset=preset, grids=grids, sde=sde, sweep=sweep,
                            three_well=three_well, backends=backends, cases=cases, seed=seed,
                            output_dir=output_dir)


_KEY_LINE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def _line_of(text: str, key: str) -> int | None:
    leaf = key.split(".")[-1]
    for i, line in enumerate(text.splitlines(), start=1):
        m = _KEY_LINE.match(line)
        if m and m.group(1) == leaf:
            return i
    return None


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file.

    Raises :class:`ParseError` (with line number) for malformed TOML and
    :class:`ValidationError` naming the offending field otherwise.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc), line=getattr(exc, "lineno", None)) from None
    return config_from_dict(data)


def config_key_line(path, key: str) -> int | None:
    """Best-effort line number of ``key`` in a config file (for error messages)."""
    return _line_of(Path(path).read_text(), key)
