"""JSON scenarios: parsing with path-qualified diagnostics, and one-call runs."""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .calibration import calibrate
from .controllers import Echo, PassThrough, PidController, PidGains, RstController, design_rst
from .executor import (
    DEFAULT_MAX_RETRIES,
    DEFAULT_TOL_FRAC,
    MODES,
    PACING,
    Reference,
    RunReport,
    TimeBase,
    run_loop,
    write_trace_csv,
)
from .plant import PRESETS, make_plant, preset
from .poly_lti import c2d_zoh
from .transport import ControllerLaw, EchoLaw, HilClient, HilEndpointConfig
from .vdevice import CardConfig, DelayModel, VirtualAddaCard


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class PlantSection:
    preset: str = "heat_exchanger"
    overrides: dict = field(default_factory=dict)
    init_output: float = 0.0


@dataclass(frozen=True)
class RstSection:
    p: list[float]
    a: list[float] | None = None
    b: list[float] | None = None
    d: int | None = None
    t_mode: str = "unit_dc_gain"


@dataclass(frozen=True)
class PidSection:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    out_min_V: float = 0.0
    out_max_V: float = 4.5
    anti_windup: bool = True


@dataclass(frozen=True)
class ExternalSection:
    """No in-process law; the controller lives behind the HiL transport."""


@dataclass(frozen=True)
class PassthroughSection:
    pass


@dataclass(frozen=True)
class EchoSection:
    pass


CONTROLLER_KINDS = {
    "pid": PidSection,
    "rst": RstSection,
    "external": ExternalSection,
    "passthrough": PassthroughSection,
    "echo": EchoSection,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str
    base_step_s: float
    duration_s: float
    plant: PlantSection
    controller: dict  # {kind: section}
    seed: int = 0
    controller_period_s: float | None = None
    card: CardConfig = field(default_factory=CardConfig)
    reference: Reference = field(default_factory=Reference)
    tolerance: float = DEFAULT_TOL_FRAC
    max_retries: int = DEFAULT_MAX_RETRIES
    pacing: str | None = None
    transport: HilEndpointConfig = field(default_factory=HilEndpointConfig)

    @property
    def controller_kind(self) -> str:
        return next(iter(self.controller))

    @property
    def controller_section(self):
        return self.controller[self.controller_kind]

    @property
    def effective_period_s(self) -> float:
        return self.controller_period_s if self.controller_period_s is not None else self.base_step_s

    @property
    def effective_pacing(self) -> str:
        if self.pacing is not None:
            return self.pacing
        return "as_fast_as_possible" if self.mode == "sim" else "wall_clock_paced"

    def replace(self, **changes) -> "Scenario":
        """Copy with overrides; a new ``seed`` also reseeds the card."""
        if "seed" in changes and "card" not in changes:
            changes["card"] = dataclasses.replace(self.card, rng_seed=changes["seed"])
        new = dataclasses.replace(self, **changes)
        _check_scenario(new)
        return new


# ------------------------------------------------------------------ parsing

_NoneType = type(None)


def _convert(value, typ, path):
    origin = typing.get_origin(typ)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(typ)
        if value is None and _NoneType in args:
            return None
        (inner,) = [a for a in args if a is not _NoneType]
        return _convert(value, inner, path)
    if dataclasses.is_dataclass(typ):
        return _build(typ, value, path)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{path}: expected an integer, got {value!r}")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ScenarioError(f"{path}: expected true/false, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ScenarioError(f"{path}: expected a string, got {value!r}")
        return value
    if origin is list:
        if not isinstance(value, list):
            raise ScenarioError(f"{path}: expected a list, got {value!r}")
        (inner,) = typing.get_args(typ)
        return [_convert(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if typ is dict or origin is dict:
        if not isinstance(value, dict):
            raise ScenarioError(f"{path}: expected an object, got {value!r}")
        return dict(value)
    raise TypeError(f"unsupported field type {typ!r} at {path}")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected an object, got {data!r}")
    hints = typing.get_type_hints(cls)
    flds = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(flds))
    if unknown:
        where = ", ".join(f"{path}.{k}" for k in unknown)
        raise ScenarioError(f"{where}: unknown key; allowed under {path}: {', '.join(flds)}")
    kwargs = {}
    for name, f in flds.items():
        sub = f"{path}.{name}"
        if name in data:
            kwargs[name] = _convert(data[name], hints[name], sub)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ScenarioError(f"{sub}: missing required field")
    try:
        return cls(**kwargs)
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def _build_controller(data, path):
    if not isinstance(data, dict) or len(data) != 1:
        raise ScenarioError(f"{path}: expected exactly one of {', '.join(CONTROLLER_KINDS)}")
    (kind, body), = data.items()
    if kind not in CONTROLLER_KINDS:
        raise ScenarioError(f"{path}: unknown controller kind {kind!r}; allowed: {', '.join(CONTROLLER_KINDS)}")
    return {kind: _build(CONTROLLER_KINDS[kind], body, f"{path}.{kind}")}


def _check_scenario(s: Scenario):
    if s.mode not in MODES:
        raise ScenarioError(f"$.mode: must be one of {', '.join(MODES)}, got {s.mode!r}")
    if not s.base_step_s > 0:
        raise ScenarioError("$.base_step_s: must be > 0")
    if not s.duration_s > 0:
        raise ScenarioError("$.duration_s: must be > 0")
    if s.seed < 0:
        raise ScenarioError("$.seed: must be >= 0")
    if s.controller_period_s is not None and s.controller_period_s < s.base_step_s * (1 - 1e-12):
        raise ScenarioError("$.controller_period_s: must be >= base_step_s")
    if s.pacing is not None and s.pacing not in PACING:
        raise ScenarioError(f"$.pacing: must be one of {', '.join(PACING)}")
    if s.plant.preset not in PRESETS:
        raise ScenarioError(f"$.plant.preset: unknown preset {s.plant.preset!r}; choose from {', '.join(PRESETS)}")
    try:
        preset(s.plant.preset, s.plant.init_output, **s.plant.overrides)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"$.plant.overrides: {exc}") from None
    if s.controller_kind == "external" and s.mode != "hil":
        raise ScenarioError(f"$.controller.external: only valid in hil mode, scenario mode is {s.mode!r}")
    if not s.tolerance > 0:
        raise ScenarioError("$.tolerance: must be > 0")
    if s.max_retries < 0:
        raise ScenarioError("$.max_retries: must be >= 0")


def parse_scenario_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("$: expected an object")
    data = dict(data)
    for required in ("plant", "controller"):
        if required not in data:
            raise ScenarioError(f"$.{required}: missing required section")
    controller = _build_controller(data.pop("controller"), "$.controller")
    card = data.get("card", {})
    if isinstance(card, dict) and "rng_seed" not in card:
        data["card"] = {**card, "rng_seed": data.get("seed", 0)}
    data["controller"] = {}
    s = _build(Scenario, data, "$")
    s = dataclasses.replace(s, controller=controller)
    _check_scenario(s)
    return s


PRESET_DIR = "presets"


def preset_names() -> list[str]:
    return sorted(p.name for p in resources.files("hilsim").joinpath(PRESET_DIR).iterdir() if p.name.endswith(".json"))


def resolve_scenario_path(path):
    """Filesystem path if it exists, otherwise a shipped preset of that name."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else p.name + ".json"
    shipped = resources.files("hilsim").joinpath(PRESET_DIR, name)
    if shipped.is_file():
        return shipped
    raise ScenarioError(f"{path}: no such file or shipped preset (presets: {', '.join(preset_names())})")


def parse_scenario(path) -> Scenario:
    src = resolve_scenario_path(path)
    try:
        data = json.loads(src.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_scenario_dict(data)


def scenario_to_dict(s: Scenario) -> dict:
    """Effective configuration with every default filled in."""
    out = dataclasses.asdict(s)
    out["controller"] = {s.controller_kind: dataclasses.asdict(s.controller_section)}
    return out


# ------------------------------------------------------------------ running


def build_plant_spec(s: Scenario):
    return preset(s.plant.preset, s.plant.init_output, **s.plant.overrides)


def build_rst_design(s: Scenario, section: RstSection):
    a, b, d = section.a, section.b, section.d
    if a is None or b is None or d is None:
        model = c2d_zoh(build_plant_spec(s).tf, s.effective_period_s)
        a = model.a.tolist() if a is None else a
        b = model.b.tolist() if b is None else b
        d = model.delay_d if d is None else d
    return design_rst(a, b, d, section.p, section.t_mode)


def build_controller(s: Scenario):
    kind, sec = s.controller_kind, s.controller_section
    period = s.effective_period_s
    if kind == "pid":
        gains = PidGains(sec.kp, sec.ki, sec.kd, sec.out_min_V, sec.out_max_V)
        return PidController(gains, period, anti_windup=sec.anti_windup)
    if kind == "rst":
        return RstController(build_rst_design(s, sec), period)
    if kind == "passthrough":
        return PassThrough(period)
    if kind == "echo":
        return Echo(period)
    return None


def build_peer_law(s: Scenario | None, law: str):
    """Law served by the reference HiL peer: ``echo``, or the scenario's own controller."""
    if law == "echo":
        return EchoLaw()
    if s is None:
        raise ScenarioError(f"law {law!r} needs a scenario")
    kind = s.controller_kind
    if kind == "external" or (law != "scenario" and law != kind):
        raise ScenarioError(f"law {law!r} does not match the scenario controller {kind!r}")
    return ControllerLaw(lambda: build_controller(s), s.reference, s.card)


@dataclass
class RunArtifacts:
    trace: list
    report: RunReport
    effective: dict
    trace_path: Path | None = None
    plot_path: Path | None = None

    def report_dict(self) -> dict:
        return {**self.report.as_dict(), "scenario": self.effective}


def run(s: Scenario, out=None, plot=None) -> RunArtifacts:
    """Wire the modules for ``s.mode`` and execute one run."""
    tb = TimeBase.for_duration(s.base_step_s, s.duration_s, s.effective_pacing)
    plant = make_plant(build_plant_spec(s), s.base_step_s)
    controller = build_controller(s)
    card = table = None
    if s.mode != "sim":
        card = VirtualAddaCard(s.card)
        table = calibrate(s.card)
    kw = dict(
        controller_period_s=s.effective_period_s,
        mode=s.mode,
        tol_frac=s.tolerance,
        max_retries=s.max_retries,
    )
    if s.mode == "hil":
        with HilClient(s.transport, s.base_step_s) as client:
            trace, report = run_loop(plant, None, card, table, tb, s.reference, transport=client, **kw)
    else:
        trace, report = run_loop(plant, controller, card, table, tb, s.reference, **kw)
    arts = RunArtifacts(trace, report, scenario_to_dict(s))
    if out is not None:
        arts.trace_path = Path(out)
        write_trace_csv(trace, arts.trace_path)
    if plot is not None:
        from .plot import plot_trace_records

        arts.plot_path = Path(plot)
        plot_trace_records(trace, arts.plot_path, title=s.name)
    return arts


__all__ = [
    "CardConfig",
    "DelayModel",
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "parse_scenario_dict",
    "run",
    "scenario_to_dict",
]
