"""Experiment configuration: JSON parsing with strict key checking.

Schema (see docs/config.md):

    model       alpha, beta, c (number or {breaks, values}), mu0, sigma0
    reference   alpha_star, beta_star, mu0_star, sigma0_star
    penalty     c_alpha, c_beta, w1, w2, k1, k2
    simulation  dt, T, seed
    grid        optional; z1_half, z2_half, n1, n2, m_trunc, theta,
                s_min, lambda_floor, dt_floor, scheme
    output_times  optional list in [0, T]; default 10 evenly spaced
    functionals   optional list of {"type": ...}; default [identity]
    output_dir    optional; default "out"

Unknown keys anywhere are an error.  Validation failures name the offending
field and exit with code 2 when reached through the CLI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, MissingInputError
from .hjb import GridSpec
from .model import (CallPayoff, Constant, Functional, Gain, Identity,
                    ModelParameters, PenaltyConfig, ReferenceParameters,
                    Square, Tabulated)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParameters
    reference: ReferenceParameters
    penalty: PenaltyConfig
    dt: float
    T: float
    seed: int
    grid: GridSpec
    output_times: tuple[float, ...]
    functionals: tuple[Functional, ...]
    output_dir: str


def _section(raw: dict, name: str, required: bool = True) -> dict:
    if name not in raw:
        if required:
            raise ConfigError(f"{name}: missing required section")
        return {}
    val = raw[name]
    if not isinstance(val, dict):
        raise ConfigError(f"{name}: expected an object")
    return dict(val)


def _number(sec: dict, section: str, key: str, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"{section}.{key}: missing required value")
        return default
    val = sec.pop(key)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number")
    if not math.isfinite(val):
        raise ConfigError(f"{section}.{key}: must be finite")
    return float(val)


def _check_empty(sec: dict, section: str):
    if sec:
        raise ConfigError(f"{section}: unknown key(s) {sorted(sec)}")


def _integer(sec: dict, section: str, key: str, default: int) -> int:
    val = _number(sec, section, key, float(default))
    if val != int(val):
        raise ConfigError(f"{section}.{key}: expected an integer")
    return int(val)


def _parse_gain(sec: dict):
    if "c" not in sec:
        raise ConfigError("model.c: missing required value")
    val = sec.pop("c")
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if isinstance(val, dict):
        extra = set(val) - {"breaks", "values"}
        if extra:
            raise ConfigError(f"model.c: unknown key(s) {sorted(extra)}")
        try:
            return Gain(tuple(float(b) for b in val["breaks"]),
                        tuple(float(v) for v in val["values"]))
        except KeyError as exc:
            raise ConfigError(f"model.c: missing {exc.args[0]}") from None
    raise ConfigError("model.c: expected a number or {breaks, values}")


def _parse_functional(entry, idx: int) -> Functional:
    where = f"functionals[{idx}]"
    if not isinstance(entry, dict) or "type" not in entry:
        raise ConfigError(f"{where}: expected an object with a 'type' key")
    entry = dict(entry)
    kind = entry.pop("type")
    if kind == "identity":
        _check_empty(entry, where)
        return Identity()
    if kind == "square":
        _check_empty(entry, where)
        return Square()
    if kind == "call":
        strike = _number(entry, where, "strike")
        _check_empty(entry, where)
        return CallPayoff(strike)
    if kind == "constant":
        value = _number(entry, where, "value")
        _check_empty(entry, where)
        return Constant(value)
    if kind == "tabulated":
        try:
            xs = tuple(float(v) for v in entry.pop("x"))
            ys = tuple(float(v) for v in entry.pop("y"))
        except KeyError as exc:
            raise ConfigError(f"{where}: missing {exc.args[0]}") from None
        _check_empty(entry, where)
        return Tabulated(xs, ys)
    raise ConfigError(f"{where}.type: unknown type '{kind}' "
                      "(expected identity, square, call, constant or tabulated)")


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    raw = dict(raw)

    msec = _section(raw, "model")
    model = ModelParameters(alpha=_number(msec, "model", "alpha"),
                            beta=_number(msec, "model", "beta"),
                            c=_parse_gain(msec),
                            mu0=_number(msec, "model", "mu0"),
                            sigma0=_number(msec, "model", "sigma0"))
    _check_empty(msec, "model")

    rsec = _section(raw, "reference")
    reference = ReferenceParameters(alpha_star=_number(rsec, "reference", "alpha_star"),
                                    beta_star=_number(rsec, "reference", "beta_star"),
                                    mu0_star=_number(rsec, "reference", "mu0_star"),
                                    sigma0_star=_number(rsec, "reference", "sigma0_star"))
    _check_empty(rsec, "reference")

    psec = _section(raw, "penalty")
    penalty = PenaltyConfig(c_alpha=_number(psec, "penalty", "c_alpha"),
                            c_beta=_number(psec, "penalty", "c_beta"),
                            w1=_number(psec, "penalty", "w1"),
                            w2=_number(psec, "penalty", "w2"),
                            k1=_number(psec, "penalty", "k1"),
                            k2=_number(psec, "penalty", "k2"))
    _check_empty(psec, "penalty")
    if penalty.w2 <= 0:
        raise ConfigError("penalty.w2: must be > 0 (the HJB solve requires an "
                          "initial cost that blows up toward z2 = 0)")

    ssec = _section(raw, "simulation")
    dt = _number(ssec, "simulation", "dt")
    T = _number(ssec, "simulation", "T")
    seed_val = ssec.pop("seed", None)
    if not isinstance(seed_val, int) or isinstance(seed_val, bool):
        raise ConfigError("simulation.seed: missing or not an integer")
    _check_empty(ssec, "simulation")
    if dt <= 0:
        raise ConfigError("simulation.dt: must be > 0")
    if T < dt:
        raise ConfigError("simulation.T: must be >= dt")

    gsec = _section(raw, "grid", required=False)
    grid = GridSpec(
        z1_half=_number(gsec, "grid", "z1_half", 4.0),
        z2_half=_number(gsec, "grid", "z2_half", 4.0),
        n1=_integer(gsec, "grid", "n1", 81),
        n2=_integer(gsec, "grid", "n2", 81),
        m_trunc=_number(gsec, "grid", "m_trunc", 10.0),
        theta=_number(gsec, "grid", "theta", 0.8),
        s_min=_number(gsec, "grid", "s_min", 1.0e-6),
        lambda_floor=_number(gsec, "grid", "lambda_floor", 1.0e-9),
        dt_floor=_number(gsec, "grid", "dt_floor", 1.0e-12),
        scheme=gsec.pop("scheme", "upwind"),
        grad_limiter=gsec.pop("grad_limiter", "minmod"),
    )
    _check_empty(gsec, "grid")

    if "output_times" in raw:
        times = raw.pop("output_times")
        if not isinstance(times, list) or not times:
            raise ConfigError("output_times: expected a nonempty list")
        output_times = tuple(sorted(float(t) for t in times))
        if output_times[0] < 0 or output_times[-1] > T + 1e-12:
            raise ConfigError("output_times: values must lie in [0, T]")
    else:
        output_times = tuple((k + 1) * T / 10.0 for k in range(10))

    if "functionals" in raw:
        entries = raw.pop("functionals")
        if not isinstance(entries, list) or not entries:
            raise ConfigError("functionals: expected a nonempty list")
        functionals = tuple(_parse_functional(e, i) for i, e in enumerate(entries))
    else:
        functionals = (Identity(),)

    output_dir = raw.pop("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string")

    for consumed in ("model", "reference", "penalty", "simulation", "grid"):
        raw.pop(consumed, None)
    _check_empty(raw, "config")

    return ExperimentConfig(model=model, reference=reference, penalty=penalty,
                            dt=dt, T=T, seed=seed_val, grid=grid,
                            output_times=output_times, functionals=functionals,
                            output_dir=output_dir)
