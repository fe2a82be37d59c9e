"""Fixed-step loop: wall-clock pacing, multi-rate scheduling, compensated reads."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, NamedTuple

import numpy as np

from .calibration import CalibrationTable, calibrate, corrected_write
from .plant import PlantInstance, plant_step
from .vdevice import VirtualAddaCard, dequantize, quantize

ACTUATOR = 0
SENSOR = 1
EPS_ABS_V = 0.05
DEFAULT_TOL_FRAC = 0.02
DEFAULT_MAX_RETRIES = 20
SPIN_MARGIN_S = 0.001
MODES = ("sim", "rt", "hil")
PACING = ("as_fast_as_possible", "wall_clock_paced")

TRACE_HEADER = (
    "step,t_sim_s,r_V,e_V,u_cmd_V,u_code,u_actual_V,y_plant_V,y_code,y_read_V,"
    "retries,saturated,overrun,wall_dt_ms"
)


class ToleranceNotMet(RuntimeWarning):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class TimeBase:
    base_step_s: float
    n_steps: int
    mode: str = "as_fast_as_possible"

    def __post_init__(self):
        if not self.base_step_s > 0:
            raise ConfigurationError("base_step_s must be > 0")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be >= 0")
        if self.mode not in PACING:
            raise ConfigurationError(f"pacing mode must be one of {PACING}")

    def sim_time(self, k: int) -> float:
        return k * self.base_step_s

    @classmethod
    def for_duration(cls, base_step_s: float, duration_s: float, mode: str = "as_fast_as_possible"):
        # tolerate 0.3/0.1 style float noise before flooring
        n = math.floor(duration_s / base_step_s + 1e-9)
        return cls(base_step_s, n, mode)


@dataclass
class RateSpec:
    """A block that runs every ``period_s`` on a ``base_step_s`` grid.

    It fires at the first base step at or after each due time ``m * period_s``;
    due times are computed from the index ``m`` so nothing drifts.
    """

    block_id: str
    period_s: float
    base_step_s: float
    next_due_index: int = 0

    def __post_init__(self):
        if self.period_s < self.base_step_s * (1 - 1e-12):
            raise ConfigurationError(
                f"{self.block_id}: period {self.period_s} s is shorter than the base step {self.base_step_s} s"
            )

    @property
    def next_due_step(self) -> int:
        return first_step_at_or_after(self.next_due_index * self.period_s, self.base_step_s)

    def due(self, k: int) -> bool:
        """True when the block executes at step ``k``; advances the schedule."""
        if k >= self.next_due_step:
            self.next_due_index += 1
            while self.next_due_step <= k:
                self.next_due_index += 1
            return True
        return False


def first_step_at_or_after(t_s: float, base_step_s: float) -> int:
    k = math.ceil(t_s / base_step_s - 1e-9)
    return max(k, 0)


def schedule_steps(base_step_s: float, period_s: float, n_steps: int) -> list[int]:
    rate = RateSpec("block", period_s, base_step_s)
    return [k for k in range(n_steps) if rate.due(k)]


@dataclass(frozen=True)
class Reference:
    kind: str = "step"  # step | square | const
    amplitude_V: float = 1.0
    start_s: float = 0.0
    period_s: float | None = None

    def __post_init__(self):
        if self.kind not in ("step", "square", "const"):
            raise ConfigurationError(f"unknown reference kind {self.kind!r}")
        if self.kind == "square" and not (self.period_s and self.period_s > 0):
            raise ConfigurationError("square reference needs period_s > 0")

    def __call__(self, t_s: float) -> float:
        if self.kind == "const":
            return self.amplitude_V
        if t_s < self.start_s - 1e-12:
            return 0.0
        if self.kind == "step":
            return self.amplitude_V
        phase = ((t_s - self.start_s) % self.period_s) / self.period_s
        return self.amplitude_V if phase < 0.5 else 0.0


@dataclass(slots=True)
class TraceRecord:
    step: int
    t_sim_s: float
    r_V: float
    e_V: float
    u_cmd_V: float
    u_code: int
    u_actual_V: float
    y_plant_V: float
    y_code: int
    y_read_V: float
    retries: int
    saturated: bool
    overrun: bool
    wall_dt_ms: float


@dataclass
class RunReport:
    steps_total: int
    overruns: int
    mean_period_ms: float
    p99_period_ms: float
    max_retries: int
    settle_step: int | None
    steady_state_error_V: float
    tolerance_failures: int = 0
    timeouts: int = 0
    controller_steps: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


class CompensatedRead(NamedTuple):
    v_V: float
    retries: int
    code: int
    met: bool


class PaceResult(NamedTuple):
    met: bool
    lateness_ms: float


def within_tolerance(read_V: float, expected_V: float, tol_frac: float = DEFAULT_TOL_FRAC) -> bool:
    return abs(read_V - expected_V) <= tol_frac * max(abs(expected_V), EPS_ABS_V)


def read_compensated(
    card: VirtualAddaCard,
    channel: int,
    expected_V: float,
    tol_frac: float = DEFAULT_TOL_FRAC,
    max_retries: int = DEFAULT_MAX_RETRIES,
    on_cycle: Callable[[], None] | None = None,
    strict: bool = False,
) -> CompensatedRead:
    """Re-read an ADC channel until it agrees with the value the block just wrote.

    ``expected_V`` is snapped to the ADC grid first, so a settled noiseless
    channel always matches. Each retry advances the card one cycle. If the
    budget runs out the last reading is returned with ``met=False`` (or
    :class:`ToleranceNotMet` is raised when ``strict``).
    """
    if not tol_frac > 0:
        raise ValueError("tol_frac must be > 0")
    cfg = card.config
    target = dequantize(quantize(expected_V, cfg), cfg)
    retries = 0
    while True:
        code = card.adc_read(channel)
        v = dequantize(code, cfg)
        if within_tolerance(v, target, tol_frac):
            return CompensatedRead(v, retries, code, True)
        if retries >= max_retries:
            if strict:
                raise ToleranceNotMet(
                    f"channel {channel}: read {v:.4f} V, expected {target:.4f} V after {retries} retries"
                )
            return CompensatedRead(v, retries, code, False)
        card.advance_cycle()
        if on_cycle is not None:
            on_cycle()
        retries += 1


def pace(deadline_wall: float, clock=time.monotonic, spin_s: float = SPIN_MARGIN_S) -> PaceResult:
    """Sleep until ``deadline_wall`` (monotonic seconds), spinning the last ``spin_s``."""
    now = clock()
    if now > deadline_wall:
        return PaceResult(False, (now - deadline_wall) * 1e3)
    remaining = deadline_wall - now
    if remaining > spin_s:
        time.sleep(remaining - spin_s)
    while clock() < deadline_wall:
        pass
    return PaceResult(True, 0.0)


def _settle_card(card: VirtualAddaCard, limit: int = 10_000):
    for _ in range(limit):
        if not any(card.pending(ch) for ch in (ACTUATOR, SENSOR)):
            return
        card.advance_cycle()


def run_loop(
    plant: PlantInstance,
    controller,
    card: VirtualAddaCard | None,
    table: CalibrationTable | None,
    timebase: TimeBase,
    reference: Reference,
    controller_period_s: float | None = None,
    mode: str = "rt",
    transport=None,
    tol_frac: float = DEFAULT_TOL_FRAC,
    max_retries: int = DEFAULT_MAX_RETRIES,
    clock=time.monotonic,
):
    """Run the closed loop for ``timebase.n_steps`` base steps.

    Per step: sample r; read the sensor channel; if the controller is due,
    compute u (in process or over ``transport``), else hold; write u through
    the calibrated DAC; read it back; step the plant; write y to the sensor
    channel; log; pace. ``sim`` mode skips the card entirely. ``hil`` mode
    cannot re-read: the remote side's signals carry the card delay as is.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    base = timebase.base_step_s
    if abs(plant.period_s - base) > 1e-12 * base:
        raise ConfigurationError(f"plant period {plant.period_s} s != base step {base} s")
    if mode == "sim":
        card = table = None
    else:
        if card is None:
            raise ConfigurationError(f"{mode} mode needs a card")
        table = table or calibrate(card.config)
    if mode == "hil":
        if transport is None:
            raise ConfigurationError("hil mode needs a transport")
    elif controller is None:
        raise ConfigurationError(f"{mode} mode needs an in-process controller")
    period = controller_period_s if controller_period_s is not None else base
    rate = RateSpec("controller", period, base)

    paced = timebase.mode == "wall_clock_paced"
    cycle_cost = card.config.cycle_time_s if (paced and card is not None) else 0.0
    on_cycle = (lambda: time.sleep(cycle_cost)) if cycle_cost > 0 else None

    def advance():
        card.advance_cycle()
        if on_cycle:
            on_cycle()

    y_expected = plant.last_output_V
    if card is not None:
        card.connect(ACTUATOR, ACTUATOR)
        card.connect(SENSOR, SENSOR)
        y_expected = corrected_write(card, SENSOR, plant.last_output_V, table).expected_V
        _settle_card(card)

    trace: list[TraceRecord] = []
    controller_steps: list[int] = []
    u_cmd = 0.0
    u_code_hold = 0
    tol_fail = timeouts = 0
    t0 = clock()
    step_start = t0

    for k in range(timebase.n_steps):
        t = timebase.sim_time(k)
        r = reference(t)
        retries = 0
        overrun = False
        saturated = False

        if card is None:
            y_code, y_read = -1, plant.last_output_V
        elif mode == "rt":
            rd = read_compensated(card, SENSOR, y_expected, tol_frac, max_retries, on_cycle)
            y_code, y_read, retries = rd.code, rd.v_V, rd.retries
            tol_fail += not rd.met
        else:
            y_code = card.adc_read(SENSOR)
            y_read = dequantize(y_code, card.config)

        if rate.due(k):
            controller_steps.append(k)
            if mode == "hil":
                u_code_hold, timed_out = transport.round_trip(y_code, k)
                if timed_out:
                    timeouts += 1
                    overrun = True
                u_cmd = dequantize(u_code_hold, card.config)
            else:
                u_cmd = controller.step(r, y_read)
        saturated = bool(getattr(controller, "saturated", False))

        if card is None:
            u_code, u_actual = -1, u_cmd
        else:
            w = corrected_write(card, ACTUATOR, u_cmd, table)
            saturated = saturated or w.saturated
            advance()
            if mode == "rt":
                rd = read_compensated(card, ACTUATOR, w.expected_V, tol_frac, max_retries, on_cycle)
                u_code, u_actual = rd.code, rd.v_V
                retries += rd.retries
                tol_fail += not rd.met
            else:
                u_code = card.adc_read(ACTUATOR)
                u_actual = dequantize(u_code, card.config)

        y_plant = plant_step(plant, u_actual)
        if card is not None:
            y_expected = corrected_write(card, SENSOR, y_plant, table).expected_V

        if paced:
            pr = pace(t0 + (k + 1) * base, clock)
            overrun = overrun or not pr.met
        now = clock()
        trace.append(
            TraceRecord(
                k, t, r, r - y_read, u_cmd, u_code, u_actual, y_plant, y_code, y_read,
                retries, saturated, overrun, (now - step_start) * 1e3,
            )
        )
        step_start = now

    return trace, make_report(trace, reference, tol_fail, timeouts, controller_steps)


def make_report(trace, reference: Reference, tolerance_failures=0, timeouts=0, controller_steps=()) -> RunReport:
    n = len(trace)
    if n == 0:
        return RunReport(0, 0, 0.0, 0.0, 0, None, 0.0, tolerance_failures, timeouts, list(controller_steps))
    dt = np.array([rec.wall_dt_ms for rec in trace])
    y = np.array([rec.y_plant_V for rec in trace])
    tail = max(1, n // 10)
    y_final = float(np.mean(y[-tail:]))
    r_final = trace[-1].r_V
    band = 0.02 * max(abs(reference.amplitude_V), EPS_ABS_V)
    outside = np.flatnonzero(np.abs(y - y_final) > band)
    settle = 0 if outside.size == 0 else int(outside[-1]) + 1
    return RunReport(
        steps_total=n,
        overruns=int(sum(rec.overrun for rec in trace)),
        mean_period_ms=float(np.mean(dt)),
        p99_period_ms=float(np.percentile(dt, 99)),
        max_retries=int(max(rec.retries for rec in trace)),
        settle_step=settle if settle < n else None,
        steady_state_error_V=abs(r_final - y_final),
        tolerance_failures=tolerance_failures,
        timeouts=timeouts,
        controller_steps=list(controller_steps),
    )


# ------------------------------------------------------------------ CSV I/O

_FIELDS = [f.name for f in fields(TraceRecord)]
assert ",".join(_FIELDS) == TRACE_HEADER


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for rec in trace:
            fh.write(",".join(_fmt(getattr(rec, name)) for name in _FIELDS) + "\n")


class TraceFormatError(ValueError):
    pass


def read_trace_csv(path) -> list[TraceRecord]:
    types = {f.name: f.type for f in fields(TraceRecord)}
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != TRACE_HEADER:
            raise TraceFormatError(f"{path}:1: bad or missing header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_FIELDS):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(_FIELDS)} fields, got {len(row)}")
            vals = {}
            try:
                for name, raw in zip(_FIELDS, row):
                    typ = types[name]
                    if typ == "int":
                        vals[name] = int(raw)
                    elif typ == "bool":
                        if raw not in ("0", "1"):
                            raise ValueError(f"{name}={raw!r} is not 0/1")
                        vals[name] = raw == "1"
                    else:
                        vals[name] = float(raw)
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            out.append(TraceRecord(**vals))
    return out
