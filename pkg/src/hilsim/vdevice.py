"""Virtual 2-in/2-out ADDA card with the defects of a low-cost USB board.

Emulated defects: 8-bit quantization, a 0..4.5 V real DAC span on a
nominal 0..5 V scale, a quadratic DAC bow, a random write-to-wire delay
measured in card cycles, and Gaussian noise on the ADC input.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .poly_lti import round_half_away

N_CHANNELS = 2


@dataclass(frozen=True)
class DelayModel:
    kind: str = "uniform_int"  # "fixed" | "uniform_int"
    min_cycles: int = 3
    max_cycles: int = 7

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform_int"):
            raise ValueError(f"delay kind must be 'fixed' or 'uniform_int', got {self.kind!r}")
        if not 0 <= self.min_cycles <= self.max_cycles:
            raise ValueError("need 0 <= min_cycles <= max_cycles")
        if self.kind == "fixed" and self.min_cycles != self.max_cycles:
            raise ValueError("fixed delay needs min_cycles == max_cycles")

    @property
    def mean(self) -> float:
        return 0.5 * (self.min_cycles + self.max_cycles)

    @classmethod
    def fixed(cls, cycles: int) -> "DelayModel":
        return cls("fixed", cycles, cycles)


@dataclass(frozen=True)
class CardConfig:
    nominal_fullscale_V: float = 5.0
    actual_max_V: float = 4.5
    bits: int = 8
    delay_model: DelayModel = field(default_factory=DelayModel)
    nonlin_alpha: float = 0.1
    noise_std_V: float = 0.01
    rng_seed: int = 0
    # wall time one card I/O cycle costs when the loop is paced
    cycle_time_s: float = 0.002

    def __post_init__(self):
        if not 0 < self.actual_max_V <= self.nominal_fullscale_V:
            raise ValueError("need 0 < actual_max_V <= nominal_fullscale_V")
        if not 1 <= self.bits <= 16:
            raise ValueError("bits must be in [1, 16]")
        if self.noise_std_V < 0:
            raise ValueError("noise_std_V must be >= 0")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")
        if self.cycle_time_s < 0:
            raise ValueError("cycle_time_s must be >= 0")

    @property
    def max_code(self) -> int:
        return (1 << self.bits) - 1

    @property
    def lsb_V(self) -> float:
        return self.nominal_fullscale_V / self.max_code

    @classmethod
    def ideal(cls, rng_seed: int = 0, **kw) -> "CardConfig":
        """Card with every defect disabled except quantization."""
        base = dict(
            actual_max_V=5.0,
            delay_model=DelayModel.fixed(0),
            nonlin_alpha=0.0,
            noise_std_V=0.0,
            rng_seed=rng_seed,
        )
        base.update(kw)
        return cls(**base)


def quantize(v_V, cfg: CardConfig):
    """Voltage -> code on the nominal scale, clamped, ties rounded away from zero."""
    v = np.clip(v_V, 0.0, cfg.nominal_fullscale_V)
    code = round_half_away(v / cfg.nominal_fullscale_V * cfg.max_code)
    if np.ndim(code) == 0:
        return int(code)
    return code.astype(int)


def dequantize(code, cfg: CardConfig):
    v = np.asarray(code, dtype=float) / cfg.max_code * cfg.nominal_fullscale_V
    return float(v) if v.ndim == 0 else v


def dac_transfer(code, cfg: CardConfig):
    """Volts actually produced for ``code``: ``Vmax (x + alpha x (1 - x))``."""
    c = np.asarray(code)
    if np.any(c < 0) or np.any(c > cfg.max_code):
        raise ValueError(f"code out of range [0, {cfg.max_code}]: {code}")
    x = c / cfg.max_code
    v = cfg.actual_max_V * (x + cfg.nonlin_alpha * x * (1.0 - x))
    return float(v) if np.ndim(v) == 0 else v


def _check_channel(channel):
    if channel not in range(N_CHANNELS):
        raise ValueError(f"invalid channel {channel!r}; card has channels 0 and 1")


class VirtualAddaCard:
    """Stateful card emulation; all randomness comes from one seeded generator."""

    def __init__(self, config: CardConfig | None = None):
        self.config = config or CardConfig()
        self.rng = np.random.default_rng(self.config.rng_seed)
        self.dac_pipeline = [deque() for _ in range(N_CHANNELS)]
        self.dac_settled_V = [0.0] * N_CHANNELS
        self.adc_last_code = [0] * N_CHANNELS
        self._adc_source: list[int | None] = [None] * N_CHANNELS
        self._adc_input_V = [0.0] * N_CHANNELS
        self._write_seq = 0
        self._settled_seq = [0] * N_CHANNELS
        self.cycles = 0

    # wiring -------------------------------------------------------------
    def connect(self, dac_channel: int, adc_channel: int):
        _check_channel(dac_channel)
        _check_channel(adc_channel)
        self._adc_source[adc_channel] = dac_channel

    def drive_input(self, adc_channel: int, v_V: float):
        """Set the voltage on an ADC input that is not looped back."""
        _check_channel(adc_channel)
        self._adc_source[adc_channel] = None
        self._adc_input_V[adc_channel] = float(v_V)

    def wire_V(self, adc_channel: int) -> float:
        src = self._adc_source[adc_channel]
        return self.dac_settled_V[src] if src is not None else self._adc_input_V[adc_channel]

    # DAC ----------------------------------------------------------------
    def draw_delay(self) -> int:
        dm = self.config.delay_model
        if dm.kind == "fixed":
            return dm.min_cycles
        return int(self.rng.integers(dm.min_cycles, dm.max_cycles + 1))

    def dac_write(self, channel: int, code: int) -> int:
        """Queue ``code`` on ``channel``; returns the drawn delay in cycles."""
        _check_channel(channel)
        volts = dac_transfer(int(code), self.config)
        k = self.draw_delay()
        self._write_seq += 1
        if k == 0:
            self._settle(channel, self._write_seq, volts)
        else:
            self.dac_pipeline[channel].append([self._write_seq, volts, k])
        return k

    def _settle(self, channel, seq, volts):
        # an older write landing late never overrides a newer settled one
        if seq > self._settled_seq[channel]:
            self._settled_seq[channel] = seq
            self.dac_settled_V[channel] = volts

    def advance_cycle(self):
        self.cycles += 1
        for ch, pipe in enumerate(self.dac_pipeline):
            if not pipe:
                continue
            pending = deque()
            for entry in pipe:
                entry[2] -= 1
                if entry[2] <= 0:
                    self._settle(ch, entry[0], entry[1])
                else:
                    pending.append(entry)
            self.dac_pipeline[ch] = pending

    def pending(self, channel: int) -> int:
        return len(self.dac_pipeline[channel])

    # ADC ----------------------------------------------------------------
    def adc_read(self, channel: int) -> int:
        _check_channel(channel)
        v = self.wire_V(channel)
        if self.config.noise_std_V > 0:
            v += self.rng.normal(0.0, self.config.noise_std_V)
        code = quantize(v, self.config)
        self.adc_last_code[channel] = code
        return code

    def read_V(self, channel: int) -> float:
        return dequantize(self.adc_read(channel), self.config)


def dac_write(card: VirtualAddaCard, channel: int, code: int) -> int:
    return card.dac_write(channel, code)


def adc_read(card: VirtualAddaCard, channel: int) -> int:
    return card.adc_read(channel)


def advance_cycle(card: VirtualAddaCard):
    card.advance_cycle()
