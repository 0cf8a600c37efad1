"""Flat ``section.key = value`` run configuration.

Every quantity carries its unit in the key name. Example::

    growth.m_per_day = 1e-3
    therapy.endo.preset = endostatin
    therapy.endo.times = every 1 day from 5 to 10
    discretization.T_days = 15

Omitted growth keys take the values of :data:`angiometa.pkpd.TABLE1`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .pkpd import (TABLE1, DrugSchedule, GrowthParams, Therapy, angiostatin, endostatin,
                   every, tnp470)
from .transport import Discretization, Model, VISIBLE_THRESHOLD_MM3


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


GROWTH_KEYS = {
    "a_per_day": "a",
    "c_per_day": "c",
    "d_per_day_mm2": "d",
    "m_per_day": "m",
    "alpha": "alpha",
    "x0_mm3": "x0",
    "theta0_mm3": "theta0",
    "delta_theta_mm3": "delta_theta",
}

DRUG_KEYS = ("role", "preset", "efficacy_per_day", "clearance_per_day", "dose_mg", "times",
             "threshold_mm3", "heaviside_slope")

PRESETS = {"endostatin": endostatin, "tnp470": tnp470, "angiostatin": angiostatin}

DISC_KEYS = {
    "T_days": "T",
    "dt_days": "dt",
    "dsigma_mm3": "dsigma",
    "dx_mm3": "dx",
    "quadrature": "quadrature",
    "dirac": "dirac_mode",
    "data_mode": "data_mode",
}

SIMPLE_KEYS = {
    "run.name": "name",
    "model.drug_effect": "drug_effect",
    "model.primary_x0_mm3": "primary_x0",
    "model.theta_low_mm3": "theta_low",
    "model.birth_profile": "birth_profile",
    "model.primary_source": "primary_source",
    "initial.density": "initial_density",
    "initial.value_per_mm6": "initial_value",
    "outputs.visible_threshold_mm3": "visible_threshold",
    "outputs.path": "output",
    "outputs.check_bounds": "check_bounds",
    "sweep.key": "sweep_key",
    "sweep.values": "sweep_values",
    "converge.levels": "converge_levels",
    "converge.ref_factor": "converge_ref_factor",
    "converge.min_order": "converge_min_order",
}

_RULE = re.compile(
    r"every\s+(?P<n>[0-9.eE+-]+)\s+days?\s+from\s+(?P<a>[0-9.eE+-]+)\s+to\s+(?P<b>[0-9.eE+-]+)"
    r"(?P<twice>\s+twice-daily)?\s*$")


@dataclass(frozen=True)
class Drug:
    name: str
    role: str
    schedule: DrugSchedule


@dataclass(frozen=True)
class RunConfig:
    growth: GrowthParams = TABLE1
    drugs: tuple = ()
    drug_effect: str = "absolute"
    primary_x0: Optional[float] = None
    theta_low: Optional[float] = None
    birth_profile: str = "uniform"
    primary_source: bool = True
    disc: Discretization = field(default_factory=Discretization)
    initial_density: str = "zero"
    initial_value: float = 0.0
    visible_threshold: float = VISIBLE_THRESHOLD_MM3
    output: Optional[str] = None
    check_bounds: bool = False
    sweep_key: Optional[str] = None
    sweep_values: tuple = ()
    converge_levels: int = 4
    converge_ref_factor: int = 32
    converge_min_order: Optional[float] = None
    name: str = ""

    @property
    def therapy(self) -> Therapy:
        roles = {d.role: d.schedule for d in self.drugs}
        return Therapy(aa=roles.get("aa"), ct=roles.get("ct"), effect=self.drug_effect)

    def build_model(self) -> Model:
        model = Model.tumor(self.growth, self.therapy, primary_x0=self.primary_x0,
                            theta_low=self.theta_low, profile=self.birth_profile)
        if not self.primary_source:
            model = replace(model, primary_source=False)
        return model

    def rho0(self):
        if self.initial_density == "zero":
            return None
        kappa = self.initial_value
        return lambda x, theta: np.full(np.broadcast(x, theta).shape, kappa)


def parse_times(text: str, key="times") -> tuple:
    """``"5, 6, 7"`` or ``"every N day(s) from a to b [twice-daily]"``.

    ``twice-daily`` adds a second bolus half a day after each scheduled one.
    """
    text = text.strip()
    if not text:
        return ()
    m = _RULE.match(text)
    try:
        if m:
            base = every(float(m["n"]), float(m["a"]), float(m["b"]))
            if m["twice"]:
                base = tuple(sorted(set(base) | {t + 0.5 for t in base}))
            return base
        return tuple(sorted(float(v) for v in text.split(",")))
    except ValueError as exc:
        raise ConfigError(key, f"cannot read administration times {text!r} ({exc})") from None


def read_mapping(text: str) -> dict:
    """``key = value`` lines to an ordered dict; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def _float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {v!r}") from None


def _bool(key, v):
    low = v.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(key, f"expected true/false, got {v!r}")


def _optional_float(key, v):
    return None if v.strip().lower() in ("", "none", "default") else _float(key, v)


def _build_drug(name, entries) -> Drug:
    prefix = f"therapy.{name}"
    role = entries.get("role")
    if role not in ("aa", "ct"):
        raise ConfigError(f"{prefix}.role", "must be 'aa' or 'ct'")
    base = None
    if "preset" in entries:
        preset = entries["preset"].strip().lower()
        if preset not in PRESETS:
            raise ConfigError(f"{prefix}.preset", f"unknown preset {preset!r} (known: {sorted(PRESETS)})")
        base = PRESETS[preset]()
    kw = {}
    for key, attr in (("efficacy_per_day", "efficacy"), ("clearance_per_day", "clearance"),
                      ("dose_mg", "dose"), ("heaviside_slope", "heaviside_slope")):
        if key in entries:
            kw[attr] = _float(f"{prefix}.{key}", entries[key])
        elif base is None and attr != "heaviside_slope":
            raise ConfigError(f"{prefix}.{key}", "missing (and no preset given)")
    if "times" in entries:
        kw["admin_times"] = parse_times(entries["times"], f"{prefix}.times")
    elif base is None:
        raise ConfigError(f"{prefix}.times", "missing (and no preset given)")
    if "threshold_mm3" in entries:
        kw["action_threshold"] = _optional_float(f"{prefix}.threshold_mm3", entries["threshold_mm3"])
    try:
        sched = replace(base, **kw) if base is not None else DrugSchedule(**kw)
    except ValueError as exc:
        raise ConfigError(prefix, str(exc)) from None
    return Drug(name, role, sched)


def from_mapping(raw: dict) -> RunConfig:
    growth, disc, simple, drugs = {}, {}, {}, {}
    for key, value in raw.items():
        section, _, rest = key.partition(".")
        if key == "therapy":
            if value.strip().lower() not in ("", "none"):
                raise ConfigError(key, "only 'none' is allowed here; use therapy.<name>.<field>")
        elif section == "growth" and rest in GROWTH_KEYS:
            growth[GROWTH_KEYS[rest]] = _float(key, value)
        elif section == "discretization" and rest in DISC_KEYS:
            disc[DISC_KEYS[rest]] = value
        elif section == "therapy" and rest.count(".") == 1:
            name, fld = rest.split(".")
            if fld not in DRUG_KEYS:
                raise ConfigError(key, f"unknown drug field (known: {', '.join(DRUG_KEYS)})")
            drugs.setdefault(name, {})[fld] = value
        elif key in SIMPLE_KEYS:
            simple[SIMPLE_KEYS[key]] = value
        else:
            raise ConfigError(key, "unknown key")

    try:
        params = replace(TABLE1, **growth)
    except ValueError as exc:
        raise ConfigError("growth", str(exc)) from None

    built = tuple(_build_drug(n, e) for n, e in drugs.items())
    roles = [d.role for d in built]
    for r in ("aa", "ct"):
        if roles.count(r) > 1:
            raise ConfigError("therapy", f"at most one drug with role {r!r}")

    dkw = {}
    for attr, v in disc.items():
        key = "discretization." + next(k for k, a in DISC_KEYS.items() if a == attr)
        if attr == "dirac_mode":
            dkw[attr] = _bool(key, v)
        elif attr in ("quadrature", "data_mode"):
            dkw[attr] = v.strip().lower()
        else:
            dkw[attr] = _float(key, v)
    try:
        discretization = Discretization(**dkw)
    except ValueError as exc:
        raise ConfigError("discretization", str(exc)) from None

    kw = {}
    for attr, v in simple.items():
        key = next(k for k, a in SIMPLE_KEYS.items() if a == attr)
        if attr in ("primary_x0", "theta_low", "converge_min_order"):
            kw[attr] = _optional_float(key, v)
        elif attr in ("initial_value", "visible_threshold"):
            kw[attr] = _float(key, v)
        elif attr in ("primary_source", "check_bounds"):
            kw[attr] = _bool(key, v)
        elif attr in ("converge_levels", "converge_ref_factor"):
            kw[attr] = int(_float(key, v))
        elif attr == "sweep_values":
            kw[attr] = tuple(s.strip() for s in v.split(",") if s.strip())
        elif attr in ("output", "sweep_key"):
            kw[attr] = v or None
        else:
            kw[attr] = v
    cfg = RunConfig(growth=params, drugs=built, disc=discretization, **kw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.drug_effect not in ("absolute", "proportional"):
        raise ConfigError("model.drug_effect", "must be 'absolute' or 'proportional'")
    if cfg.birth_profile not in ("uniform", "tent", "cosine"):
        raise ConfigError("model.birth_profile", "must be uniform, tent or cosine")
    if cfg.initial_density not in ("zero", "constant"):
        raise ConfigError("initial.density", "must be 'zero' or 'constant'")
    if cfg.sweep_key is not None and cfg.sweep_key.startswith("sweep."):
        raise ConfigError("sweep.key", "cannot sweep a sweep setting")
    if cfg.converge_ref_factor < 2 ** cfg.converge_levels:
        raise ConfigError("converge.ref_factor", "must exceed the finest level factor")
    try:
        cfg.build_model()
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None


def parse_config(text: str) -> RunConfig:
    return from_mapping(read_mapping(text))


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(text)


def to_mapping(cfg: RunConfig) -> dict:
    """Canonical mapping; ``from_mapping(to_mapping(cfg)) == cfg``."""
    out = {}
    if cfg.name:
        out["run.name"] = cfg.name
    for key, attr in GROWTH_KEYS.items():
        out[f"growth.{key}"] = repr(getattr(cfg.growth, attr))
    for d in cfg.drugs:
        s, p = d.schedule, f"therapy.{d.name}"
        out[f"{p}.role"] = d.role
        out[f"{p}.efficacy_per_day"] = repr(s.efficacy)
        out[f"{p}.clearance_per_day"] = repr(s.clearance)
        out[f"{p}.dose_mg"] = repr(s.dose)
        out[f"{p}.times"] = ", ".join(repr(t) for t in s.admin_times)
        out[f"{p}.threshold_mm3"] = "default" if s.action_threshold is None else repr(s.action_threshold)
        out[f"{p}.heaviside_slope"] = repr(s.heaviside_slope)
    for key, attr in DISC_KEYS.items():
        v = getattr(cfg.disc, attr)
        if attr == "dirac_mode":
            out[f"discretization.{key}"] = "true" if v else "false"
        elif attr in ("quadrature", "data_mode"):
            out[f"discretization.{key}"] = v.value
        else:
            out[f"discretization.{key}"] = repr(v)
    for key, attr in SIMPLE_KEYS.items():
        if attr == "name":
            continue
        v = getattr(cfg, attr)
        if isinstance(v, bool):
            out[key] = "true" if v else "false"
        elif v is None:
            if attr in ("output", "sweep_key"):
                continue
            out[key] = "default"
        elif isinstance(v, tuple):
            if v:
                out[key] = ", ".join(v)
        elif isinstance(v, float):
            out[key] = repr(v)
        else:
            out[key] = str(v)
    return out


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in to_mapping(cfg).items())


def with_override(cfg: RunConfig, key: str, value: str) -> RunConfig:
    """Re-parse ``cfg`` with one entry replaced (used by sweeps)."""
    raw = to_mapping(cfg)
    raw[key] = value
    return from_mapping(raw)


def same_discretization(a: RunConfig, b: RunConfig) -> bool:
    return all(getattr(a.disc, f.name) == getattr(b.disc, f.name) for f in fields(Discretization))
