"""DAC linearization by a voltage-domain gain and a code-domain inverse table."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .poly_lti import round_half_away
from .vdevice import CardConfig, VirtualAddaCard, dac_transfer


@dataclass(frozen=True)
class CalibrationTable:
    gain: float
    inverse_lut: np.ndarray
    achieved_max_V: float
    residual_max_V: float
    bits: int

    @property
    def max_code(self) -> int:
        return (1 << self.bits) - 1

    @property
    def effective_lsb_V(self) -> float:
        return self.achieved_max_V / self.max_code

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.inverse_lut, np.arange(self.max_code + 1)))

    def target_code(self, v_V: float) -> int:
        """Requested voltage -> code on the linearized [0, achieved_max_V] scale."""
        v = min(max(v_V, 0.0), self.achieved_max_V)
        return int(round_half_away(v / self.achieved_max_V * self.max_code))

    def rows(self, cfg: CardConfig):
        """(target_code, corrected_code, residual_V) for every target."""
        curve = dac_transfer(self.inverse_lut, cfg)
        target = np.arange(self.max_code + 1) / self.max_code * self.achieved_max_V
        return [(t, int(c), float(r)) for t, c, r in zip(range(self.max_code + 1), self.inverse_lut, curve - target)]

    def summary(self) -> dict:
        return {
            "gain": self.gain,
            "achieved_max_V": self.achieved_max_V,
            "residual_max_V": self.residual_max_V,
            "effective_lsb_V": self.effective_lsb_V,
            "identity": self.is_identity(),
        }


class WriteResult(NamedTuple):
    code: int
    expected_V: float
    saturated: bool


def calibrate(card_cfg: CardConfig) -> CalibrationTable:
    """Sweep the noiseless DAC curve and build the nearest-code inverse table.

    Ties go to the lower code (``argmin`` returns the first minimum).
    """
    n = card_cfg.max_code
    curve = dac_transfer(np.arange(n + 1), card_cfg)
    achieved = card_cfg.actual_max_V
    target = np.arange(n + 1) / n * achieved
    err = np.abs(curve[None, :] - target[:, None])
    lut = np.argmin(err, axis=1)
    residual = float(np.max(np.abs(curve[lut] - target)))
    lut.setflags(write=False)
    return CalibrationTable(
        gain=card_cfg.nominal_fullscale_V / achieved,
        inverse_lut=lut,
        achieved_max_V=achieved,
        residual_max_V=residual,
        bits=card_cfg.bits,
    )


def corrected_write(card: VirtualAddaCard, channel: int, v_V: float, table: CalibrationTable) -> WriteResult:
    """Write ``v_V`` through the table; requests outside [0, achieved_max_V] saturate."""
    saturated = v_V > table.achieved_max_V or v_V < 0.0
    code = int(table.inverse_lut[table.target_code(v_V)])
    card.dac_write(channel, code)
    return WriteResult(code, dac_transfer(code, card.config), saturated)
