"""Pole placement by hand, then for the heat exchanger.

The small example shows the Diophantine equation at work; the second part
discretizes the heat-exchanger model at 1 s and places a double pole at 0.7.
"""
import numpy as np

from hilsim import DiscreteLti, RstController, c2d_zoh, design_rst, heat_exchanger

# A = 1 - 0.9 q^-1, B = 0.5 q^-1, wanted P = 1 - 0.6 q^-1
d1 = design_rst([1, -0.9], [0, 0.5], 0, [1, -0.6])
print("S =", d1.s.tolist(), " R =", d1.r.tolist(), " T =", d1.t.tolist())
print("residual of A S + B R - P:", d1.residual)
lit = design_rst([1, -0.9], [0, 0.5], 0, [1, -0.6], t_mode="paper_literal")
print("T = A P / B(1) instead:", lit.t.tolist(), "-> static gain", round(lit.closed_loop_dc_gain(), 3))

# heat exchanger, sampled at the controller rate
spec = heat_exchanger()
model = c2d_zoh(spec.tf, 1.0)
print(f"\nheat exchanger at 1 s: A = {np.round(model.a.coeffs, 4)}, B = {np.round(model.b.coeffs, 4)}, "
      f"d = {model.delay_d}")
design = design_rst(model.a, model.b, model.delay_d, [1, -1.4, 0.49])
print("R =", np.round(design.r.coeffs, 4), "S =", np.round(design.s.coeffs, 4))

# closed loop on the model itself: y(t) is produced from u(t-1)
plant = DiscreteLti(model.b.coeffs[1:], model.a, model.delay_d)
ctl = RstController(design, 1.0)
u, ys, us = 0.0, [], []
for _ in range(25):
    y = plant.step(u)
    u = ctl.step(1.0, y)
    ys.append(y)
    us.append(u)
print("unit step response:", np.round(ys[:12], 3))
print(f"final {ys[-1]:.6f}; control action spans {min(us):.2f} .. {max(us):.2f} V")
print("(the card can only produce 0..4.5 V, which is why the real-time run saturates)")
