"""Hardware-in-the-loop without hardware: the RST law in a UDP peer.

The peer runs in a thread here; `hilsim hil-peer --law rst --scenario
rst_heat_exchanger_hil` does the same from another terminal.
"""
import numpy as np

from hilsim import CardConfig, HilEndpointConfig, HilPeer, build_peer_law, parse_scenario, run

s = parse_scenario("rst_heat_exchanger_hil").replace(pacing="as_fast_as_possible")

with HilPeer(build_peer_law(s, "rst"), port=0) as peer:
    print("peer listening on %s:%d" % peer.address)
    transport = HilEndpointConfig(peer_port=peer.address[1], step_timeout_ms=500)
    hil = run(s.replace(transport=transport))

rt = run(s.replace(mode="rt"))
sim = run(s.replace(mode="sim"))


def rms(a, b):
    return np.sqrt(np.mean([(x.y_plant_V - y.y_plant_V) ** 2 for x, y in zip(a.trace, b.trace)]))


print(f"hil: {hil.report.timeouts} timeouts, steady-state error {hil.report.steady_state_error_V:.4f} V")
print(f"RMS deviation from sim: rt {rms(rt, sim):.4f} V, hil {rms(hil, sim):.4f} V")

# with every defect off, hil and in-process rt agree sample for sample
ideal = s.replace(card=CardConfig.ideal(rng_seed=s.seed))
with HilPeer(build_peer_law(ideal, "rst"), port=0) as peer:
    hil_ideal = run(ideal.replace(transport=HilEndpointConfig(peer_port=peer.address[1], step_timeout_ms=500)))
rt_ideal = run(ideal.replace(mode="rt"))
same = sum(a.y_plant_V == b.y_plant_V for a, b in zip(hil_ideal.trace, rt_ideal.trace))
print(f"ideal card: {same}/{len(rt_ideal.trace)} samples identical")
