"""RST at 1 s over a 45 ms base step.

1 s is not a multiple of 45 ms, so the controller fires at the first base
step at or after each whole second and holds its output in between.
"""
from hilsim import parse_scenario, run, schedule_steps

s = parse_scenario("rst_heat_exchanger").replace(pacing="as_fast_as_possible")
print("controller steps:", schedule_steps(s.base_step_s, s.controller_period_s, 200))

arts = run(s)
tr = arts.trace
for k in arts.report.controller_steps[:6]:
    held = tr[k].u_cmd_V == tr[min(k + 5, len(tr) - 1)].u_cmd_V
    print(f"  step {k:3d} t={tr[k].t_sim_s:6.3f} s  u_cmd={tr[k].u_cmd_V:8.3f} V  saturated={tr[k].saturated}  "
          f"held={held}")
rep = arts.report
print(f"\nsteady-state error {rep.steady_state_error_V:.4f} V, {len(rep.controller_steps)} controller runs "
      f"in {rep.steps_total} base steps")
