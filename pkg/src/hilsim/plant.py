"""Process models discretized at the executor base step, plus named presets."""
from __future__ import annotations

from dataclasses import dataclass, field

from .poly_lti import ContinuousTf, DiscreteLti, Polynomial, c2d_zoh

# Non-authoritative heat-exchanger defaults: K e^{-Ls} / ((tau1 s + 1)(tau2 s + 1)).
HEAT_EXCHANGER_DEFAULTS = {"gain": 1.0, "tau1_s": 10.0, "tau2_s": 2.0, "dead_time_s": 1.0}
FIRST_ORDER_DEFAULTS = {"gain": 1.0, "tau_s": 10.0, "dead_time_s": 0.0}
STATIC_GAIN_DEFAULTS = {"gain": 1.0, "dead_time_s": 0.0}


@dataclass(frozen=True)
class PlantSpec:
    name: str
    tf: ContinuousTf
    output_unit: str = "V"
    init_output: float = 0.0

    def is_stable(self) -> bool:
        return bool(all(p.real < 0 for p in self.tf.poles()))


@dataclass
class PlantInstance:
    spec: PlantSpec
    sys: DiscreteLti
    last_output_V: float = field(default=0.0)

    @property
    def period_s(self) -> float:
        return self.sys.period_s


def heat_exchanger(gain=1.0, tau1_s=10.0, tau2_s=2.0, dead_time_s=1.0, init_output=0.0) -> PlantSpec:
    den = Polynomial([1.0, tau1_s]) * Polynomial([1.0, tau2_s])
    return PlantSpec("heat_exchanger", ContinuousTf([gain], den, dead_time_s), init_output=init_output)


def first_order(gain=1.0, tau_s=10.0, dead_time_s=0.0, init_output=0.0) -> PlantSpec:
    return PlantSpec("first_order", ContinuousTf([gain], [1.0, tau_s], dead_time_s), init_output=init_output)


def static_gain(gain=1.0, dead_time_s=0.0, init_output=0.0) -> PlantSpec:
    return PlantSpec("static_gain", ContinuousTf([gain], [1.0], dead_time_s), init_output=init_output)


PRESETS = {
    "heat_exchanger": (heat_exchanger, HEAT_EXCHANGER_DEFAULTS),
    "first_order": (first_order, FIRST_ORDER_DEFAULTS),
    "static_gain": (static_gain, STATIC_GAIN_DEFAULTS),
}


def preset(name: str, init_output: float = 0.0, **overrides) -> PlantSpec:
    """Build a named preset; ``overrides`` replace the default parameters."""
    try:
        factory, defaults = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown plant preset {name!r}; choose from {sorted(PRESETS)}") from None
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    return factory(**{**defaults, **overrides}, init_output=init_output)


def make_plant(spec: PlantSpec, base_step_s: float) -> PlantInstance:
    sys = c2d_zoh(spec.tf, base_step_s)
    sys.reset(spec.init_output)
    return PlantInstance(spec, sys, spec.init_output)


def plant_step(p: PlantInstance, u_V: float) -> float:
    y = p.sys.step(u_V)
    p.last_output_V = y
    return y
