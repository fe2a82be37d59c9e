"""PID on the heat exchanger: simulation, then the same loop through the card.

Runs the shipped preset in sim mode and in rt mode with an ideal card and
the default defective one, and compares how far each drifts from sim.
"""
import numpy as np

from hilsim import CardConfig, parse_scenario, run

s = parse_scenario("pid_heat_exchanger").replace(pacing="as_fast_as_possible")
sim = run(s.replace(mode="sim"))
ideal = run(s.replace(mode="rt", card=CardConfig.ideal(rng_seed=s.seed)))
real = run(s.replace(mode="rt"), out="pid_rt.csv", plot="pid_rt.svg")


def rms(a, b):
    return np.sqrt(np.mean([(x.y_plant_V - y.y_plant_V) ** 2 for x, y in zip(a.trace, b.trace)]))


for label, arts in (("sim", sim), ("rt, ideal card", ideal), ("rt, default card", real)):
    rep = arts.report
    print(f"{label:18s} steady-state error {rep.steady_state_error_V:.4f} V, settle step {rep.settle_step}, "
          f"max retries {rep.max_retries}")
print(f"\nRMS deviation from sim: ideal card {rms(ideal, sim) * 1e3:.2f} mV, default card {rms(real, sim) * 1e3:.2f} mV")
print("trace written to pid_rt.csv, plot to pid_rt.svg")
