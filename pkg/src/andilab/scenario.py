"""Scenario files: flat ``key = value`` sections parsed into simulation configs.

Angular quantities carry a ``_deg`` suffix and are given in degrees (deg/s for
rates); gains and bandwidths are in 1/s and rad/s.  Every key is checked
against the schema below, and the whole file is validated before anything
runs.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .controllers import (
    AndiController,
    AndiGeneralizedController,
    ContractError,
    ControllerKind,
    IndiActuatorController,
    IndiController,
    RmFeedforwardController,
    ScaledIndiController,
)
from .error_spec import ErrorDynamicsSpec, cascade_polynomial
from .model import FirstOrderActuatorBank, RollPlant, first_order_as_generalized, second_order_actuator
from .refmodel import FilterRefModel, IndiRollRefModel, PhysicalRefModel, RollRefModel
from .sim import DEG, Command, ConfigError, SimConfig

STUDIES = ("step", "perturbation", "sweep", "limit", "compare")
REFERENCE_KINDS = ("auto", "roll", "indi_roll", "filter", "physical")
ACTUATOR_KINDS = ("first_order", "second_order")

# section -> key -> default (None marks a required key)
SCHEMA: dict[str, dict[str, object]] = {
    "scenario": {"name": None, "study": None, "controllers": None, "description": ""},
    "plant": {"model": "roll", "L_p": -6.6, "L_u": 0.25},
    "actuator": {"kind": "first_order", "omega": 20.0, "zeta": 0.7},
    "reference": {"kind": "auto", "L_pd": -13.2, "omega_d": 20.0, "zeta": 0.7, "omega": 20.0},
    "error": {"K": "13.2", "omega_y": 20.0, "coefficients": ""},
    "controller": {"scaling": 1.0, "omega_d": 20.0},
    "hat": {"L_p": None, "L_u": None, "omega": None},
    "command": {"amplitude_deg": 5.0, "step_time": 0.0},
    "sim": {
        "dt_integration": 1e-4,
        "dt_control": 1e-3,
        "t_final": 2.0,
        "integrator": "rk4",
        "continuous": False,
        "p0_deg": 5.0,
        "p_ref0_deg": 0.0,
    },
    "sweep": {"omegas": "5, 10, 20, 50, 100, 200", "workers": 1},
    "limit": {
        "p_deg": 5.0,
        "u_deg": 2.0,
        "p_ref_deg": 3.0,
        "p_ref_dot_deg": 10.0,
        "p_ref_ddot_deg": -40.0,
        "omegas": "10, 20, 40, 100, 200, 1000",
    },
}


class ScenarioError(ConfigError):
    pass


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ScenarioError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from exc


@dataclass
class Scenario:
    """Parsed scenario: raw values per section plus the derived run configs."""

    name: str
    study: str
    controllers: list[str]
    values: dict[str, dict[str, object]]
    source: Path | None = None
    configs: dict[str, SimConfig] = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def number(self, section: str, key: str) -> float:
        raw = self.get(section, key)
        try:
            return float(raw)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"[{section}] {key}: expected a number, got {raw!r}") from exc

    def flag(self, section: str, key: str) -> bool:
        raw = self.get(section, key)
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "yes", "true", "on"):
            return True
        if text in ("0", "no", "false", "off"):
            return False
        raise ScenarioError(f"[{section}] {key}: expected a boolean, got {raw!r}")

    def floats(self, section: str, key: str) -> list[float]:
        return _floats(self.get(section, key), f"[{section}] {key}")


def parse_scenario(text: str, source: Path | None = None) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(source or "<scenario>"))
    except configparser.Error as exc:
        raise ScenarioError(f"cannot parse scenario: {exc}") from exc
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ScenarioError(f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        given = dict(parser[section]) if parser.has_section(section) else {}
        for key in given:
            if key not in keys:
                raise ScenarioError(f"unknown key '{key}' in section [{section}]")
        merged = {}
        for key, default in keys.items():
            if key in given:
                merged[key] = given[key]
            elif default is None and section == "scenario":
                raise ScenarioError(f"missing required key '{key}' in section [scenario]")
            else:
                merged[key] = default
        values[section] = merged
    head = values["scenario"]
    study = str(head["study"]).strip()
    if study not in STUDIES:
        raise ScenarioError(f"[scenario] study: unknown study {study!r}; choose from {', '.join(STUDIES)}")
    kinds = [k.strip() for k in str(head["controllers"]).split(",") if k.strip()]
    known = {k.value for k in ControllerKind}
    for k in kinds:
        if k not in known:
            raise ScenarioError(f"[scenario] controllers: unknown controller kind {k!r}; choose from {', '.join(sorted(known))}")
    if not kinds:
        raise ScenarioError("[scenario] controllers: list at least one controller kind")
    if study == "compare" and len(kinds) < 2:
        raise ScenarioError("[scenario] controllers: compare needs at least two controller kinds")
    scen = Scenario(str(head["name"]).strip(), study, kinds, values, source)
    validate(scen)
    return scen


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text, path)


def shipped_scenarios() -> dict[str, Path]:
    root = resources.files("andilab") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".ini")}


def resolve_scenario(name_or_path: str) -> Path:
    """A path to an existing file, or the name of a shipped scenario."""
    p = Path(name_or_path)
    if p.exists():
        return p
    shipped = shipped_scenarios()
    if name_or_path in shipped:
        return shipped[name_or_path]
    raise ScenarioError(f"no scenario file or shipped scenario named {name_or_path!r}")


def build_plant(s: Scenario) -> RollPlant:
    model = str(s.get("plant", "model")).strip()
    if model != "roll":
        raise ScenarioError(f"[plant] model: unknown model {model!r}; only 'roll' is built in")
    return RollPlant(L_p=s.number("plant", "L_p"), L_u=s.number("plant", "L_u"))


def build_actuator(s: Scenario, omega: float | None = None):
    kind = str(s.get("actuator", "kind")).strip()
    w = s.number("actuator", "omega") if omega is None else omega
    if w <= 0:
        raise ScenarioError("[actuator] omega: bandwidth must be positive")
    if kind == "first_order":
        return FirstOrderActuatorBank((w,))
    if kind == "second_order":
        return second_order_actuator(w, s.number("actuator", "zeta"))
    raise ScenarioError(f"[actuator] kind: unknown kind {kind!r}; choose from {', '.join(ACTUATOR_KINDS)}")


def build_spec(s: Scenario) -> ErrorDynamicsSpec:
    gains = s.floats("error", "K")
    if not gains:
        raise ScenarioError("[error] K: at least one gain is required")
    w = s.number("error", "omega_y")
    if w <= 0:
        raise ScenarioError("[error] omega_y: must be positive")
    return ErrorDynamicsSpec.siso(gains, w)


def _hat(s: Scenario, plant: RollPlant, act: FirstOrderActuatorBank):
    h = s.values["hat"]
    L_p = plant.L_p if h["L_p"] is None else s.number("hat", "L_p")
    L_u = plant.L_u if h["L_u"] is None else s.number("hat", "L_u")
    w = act.bandwidths[0] if h["omega"] is None else s.number("hat", "omega")
    return RollPlant(L_p=L_p, L_u=L_u), FirstOrderActuatorBank((w,))


def default_reference_kind(kind: str) -> str:
    if kind in (ControllerKind.INDI.value, ControllerKind.INDI_SCALED.value):
        return "indi_roll"
    if kind == ControllerKind.RM_FEEDFORWARD.value:
        return "physical"
    return "roll"


def build_reference(s: Scenario, kind: str, plant, act):
    ref_kind = str(s.get("reference", "kind")).strip()
    if ref_kind not in REFERENCE_KINDS:
        raise ScenarioError(f"[reference] kind: unknown kind {ref_kind!r}; choose from {', '.join(REFERENCE_KINDS)}")
    if ref_kind == "auto":
        ref_kind = default_reference_kind(kind)
    if ref_kind == "roll":
        return RollRefModel(L_pd=s.number("reference", "L_pd"), omega_d=s.number("reference", "omega_d"))
    if ref_kind == "indi_roll":
        return IndiRollRefModel(L_pd=s.number("reference", "L_pd"))
    if ref_kind == "filter":
        return FilterRefModel(zeta=s.number("reference", "zeta"), omega=s.number("reference", "omega"))
    if not isinstance(act, FirstOrderActuatorBank):
        raise ScenarioError("[reference] kind: the physical reference model needs a first-order actuator")
    hat_plant, hat_act = _hat(s, plant, act)
    return PhysicalRefModel(hat_plant, hat_act, spec=build_spec(s))


def build_controller(s: Scenario, kind: str, plant, act, spec: ErrorDynamicsSpec):
    first = isinstance(act, FirstOrderActuatorBank)
    if kind == ControllerKind.ANDI_GENERALIZED.value:
        coeffs = s.floats("error", "coefficients")
        if first:
            gen = first_order_as_generalized(act)
            return AndiGeneralizedController(plant, actuator=gen, spec=coeffs or spec)
        if not coeffs:
            w, zeta = s.number("actuator", "omega"), s.number("actuator", "zeta")
            coeffs = list(cascade_polynomial([K[0, 0] for K in spec.gains], [w * w, 2.0 * zeta * w]))
        if len(coeffs) != plant.r + act.order:
            raise ScenarioError(f"[error] coefficients: need {plant.r + act.order} values, got {len(coeffs)}")
        return AndiGeneralizedController(plant, actuator=act, spec=np.asarray(coeffs))
    if not first:
        raise ScenarioError(f"[scenario] controllers: {kind} needs a first-order actuator")
    if kind == ControllerKind.ANDI.value:
        return AndiController(plant, actuator=act, spec=spec)
    if kind == ControllerKind.INDI.value:
        return IndiController(plant, spec=spec)
    if kind == ControllerKind.INDI_ACTUATORS_EQUAL_BW.value:
        return IndiActuatorController(plant, actuator=act, spec=spec, variant="equal_bw")
    if kind == ControllerKind.INDI_ACTUATORS_RAAB.value:
        return IndiActuatorController(plant, actuator=act, spec=spec, variant="raab")
    if kind == ControllerKind.INDI_SCALED.value:
        return ScaledIndiController(plant, actuator=act, spec=spec, scaling=s.number("controller", "scaling"))
    hat_plant, hat_act = _hat(s, plant, act)
    return RmFeedforwardController(hat_plant, omega_hat=hat_act, omega_d=s.number("controller", "omega_d"))


def build_config(s: Scenario, kind: str, dt_control: float | None = None) -> SimConfig:
    plant = build_plant(s)
    act = build_actuator(s)
    spec = build_spec(s)
    sim = s.values["sim"]
    integrator = str(sim["integrator"]).strip()
    try:
        ref = build_reference(s, kind, plant, act)
        ctrl = build_controller(s, kind, plant, act, spec)
    except (ContractError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{kind}: {exc}") from exc
    dt_int = s.number("sim", "dt_integration")
    dt_c = s.number("sim", "dt_control") if dt_control is None else float(dt_control)
    continuous = s.flag("sim", "continuous")
    if continuous:
        dt_int = dt_c = min(dt_int, dt_c)
    cfg = SimConfig(
        plant=plant,
        actuator=act,
        reference=ref,
        controller=ctrl,
        command=Command(s.number("command", "amplitude_deg") / DEG, s.number("command", "step_time")),
        dt_integration=dt_int,
        dt_control=dt_c,
        t_final=s.number("sim", "t_final"),
        integrator=integrator,
        continuous=continuous,
        name=f"{s.name}:{kind}",
    )
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ScenarioError(f"{kind}: {exc}") from exc
    return cfg


def validate(s: Scenario, dt_control: float | None = None) -> None:
    """Build every run config so all errors surface before a run starts."""
    s.configs = {kind: build_config(s, kind, dt_control) for kind in dict.fromkeys(s.controllers)}
    for key in ("p0_deg", "p_ref0_deg"):
        s.number("sim", key)
    if s.study == "sweep":
        omegas = s.floats("sweep", "omegas")
        if not omegas or any(w <= 0 for w in omegas) or any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise ScenarioError("[sweep] omegas: must be positive and strictly increasing")
        for kind, cfg in s.configs.items():
            if not isinstance(cfg.actuator, FirstOrderActuatorBank) or kind == ControllerKind.RM_FEEDFORWARD.value:
                raise ScenarioError(f"[scenario] controllers: {kind} cannot be swept over actuator bandwidth")
        workers = s.number("sweep", "workers")
        if workers < 1 or workers != int(workers):
            raise ScenarioError("[sweep] workers: must be a positive integer")
    if s.study == "limit":
        omegas = s.floats("limit", "omegas")
        if len(omegas) < 2 or any(w <= 0 for w in omegas):
            raise ScenarioError("[limit] omegas: need at least two positive bandwidths")
        for key in ("p_deg", "u_deg", "p_ref_deg", "p_ref_dot_deg", "p_ref_ddot_deg"):
            s.number("limit", key)


def with_dt(s: Scenario, dt_control: float) -> Scenario:
    """Copy of the scenario with every run's control step replaced."""
    clone = dataclasses.replace(s, configs={})
    validate(clone, dt_control)
    return clone
