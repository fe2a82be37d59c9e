"""What the virtual ADDA card does to a signal, and what calibration buys back.

Walks through the defects one at a time: quantization, the short 4.5 V
output span, the quadratic bow, the random write delay and ADC noise.
"""
import numpy as np

from hilsim import CardConfig, VirtualAddaCard, calibrate, corrected_write, dac_transfer, quantize

cfg = CardConfig(rng_seed=1)
print(f"8-bit card: LSB on the nominal 5 V scale = {cfg.lsb_V * 1e3:.2f} mV")
print("quantize(2.5 V) =", quantize(2.5, cfg), "(127.5 rounds away from zero)")

# the DAC never reaches 5 V and bows upward in the middle
codes = np.array([0, 64, 128, 192, 255])
for c, v in zip(codes, dac_transfer(codes, cfg)):
    print(f"  code {c:3d} -> {v:.4f} V   (ideal {c / 255 * 5:.4f} V)")

# random settle delay, mean 5 cycles
card = VirtualAddaCard(cfg)
delays = np.array([card.draw_delay() for _ in range(10_000)])
print(f"write delay: min {delays.min()}, max {delays.max()}, mean {delays.mean():.3f} cycles")

# calibration: gain into the achievable span, then a nearest-code lookup table
table = calibrate(cfg)
print(f"\ncalibration gain {table.gain:.4f}, worst residual {table.residual_max_V * 1e3:.2f} mV "
      f"(one effective LSB is {table.effective_lsb_V * 1e3:.2f} mV)")

quiet = CardConfig(noise_std_V=0.0, delay_model=cfg.delay_model.fixed(0))
raw_card, cal_card = VirtualAddaCard(quiet), VirtualAddaCard(quiet)
grid = np.linspace(0, 4.5, 1000)
raw_err, cal_err = [], []
for v in grid:
    raw_card.dac_write(0, quantize(v, quiet))
    raw_err.append(raw_card.dac_settled_V[0] - v)
    corrected_write(cal_card, 0, v, table)
    cal_err.append(cal_card.dac_settled_V[0] - v)
print(f"max |error| over 0..4.5 V: uncorrected {np.max(np.abs(raw_err)):.3f} V, "
      f"calibrated {np.max(np.abs(cal_err)) * 1e3:.2f} mV")

res = corrected_write(cal_card, 0, 4.8, table)
print(f"asking for 4.8 V: code {res.code}, output {res.expected_V} V, saturated={res.saturated}")

# ADC noise, seen through the quantizer
card.drive_input(1, 2.5)
reads = np.array([card.read_V(1) for _ in range(10_000)])
print(f"\n10^4 reads of a 2.5 V wire: mean {reads.mean():.4f} V, std {reads.std() * 1e3:.2f} mV")
