"""``hilsim`` command line: run, design-rst, calibrate, hil-peer, plot."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys

from .calibration import calibrate
from .controllers import T_MODES, design_rst
from .executor import TraceFormatError
from .scenario import ScenarioError, build_peer_law, parse_scenario, run
from .transport import HilPeer, default_port
from .vdevice import CardConfig

log = logging.getLogger("hilsim")


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def cmd_run(args) -> int:
    s = parse_scenario(args.scenario)
    changes = {}
    if args.mode:
        changes["mode"] = args.mode
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration_s"] = args.duration
    if args.pacing:
        changes["pacing"] = args.pacing
    if changes:
        s = s.replace(**changes)
    arts = run(s, out=args.out, plot=args.plot)
    json.dump(arts.report_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_design_rst(args) -> int:
    if args.json:
        spec = json.loads(args.json)
        a, b, d, p = spec["a"], spec["b"], spec.get("d", 0), spec["p"]
        t_mode = spec.get("t_mode", args.t_mode)
    else:
        if args.a is None or args.b is None or args.p is None:
            raise ScenarioError("design-rst needs --a, --b and --p (or --json)")
        a, b, d, p, t_mode = _floats(args.a), _floats(args.b), args.d, _floats(args.p), args.t_mode
    design = design_rst(a, b, d, p, t_mode)
    json.dump(design.as_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_calibrate(args) -> int:
    cfg = parse_scenario(args.scenario).card if args.scenario else CardConfig()
    overrides = {}
    if args.alpha is not None:
        overrides["nonlin_alpha"] = args.alpha
    if args.actual_max is not None:
        overrides["actual_max_V"] = args.actual_max
    if args.bits is not None:
        overrides["bits"] = args.bits
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    table = calibrate(cfg)
    json.dump(table.summary(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["target_code", "corrected_code", "residual_V"])
            for row in table.rows(cfg):
                w.writerow([row[0], row[1], repr(row[2])])
    return 0


def cmd_hil_peer(args) -> int:
    s = parse_scenario(args.scenario) if args.scenario else None
    law = build_peer_law(s, args.law)
    port = args.port if args.port is not None else default_port()
    peer = HilPeer(law, args.host, port)
    log.info("hil-peer (%s) listening on %s:%d", args.law, *peer.address)
    print(f"listening {peer.address[0]}:{peer.address[1]}", flush=True)
    try:
        peer.serve(max_sessions=args.sessions)
    except KeyboardInterrupt:
        pass
    finally:
        peer.sock.close()
    return 0


def cmd_plot(args) -> int:
    from .plot import plot

    plot(args.trace, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hilsim", description="Real-time and hardware-in-the-loop control simulation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file or shipped preset")
    p.add_argument("scenario")
    p.add_argument("--mode", choices=("sim", "rt", "hil"))
    p.add_argument("--out", help="trace CSV path")
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--plot", help="SVG path")
    pace = p.add_mutually_exclusive_group()
    pace.add_argument("--paced", dest="pacing", action="store_const", const="wall_clock_paced")
    pace.add_argument("--fast", dest="pacing", action="store_const", const="as_fast_as_possible")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("design-rst", help="solve the pole-placement equation and print R, S, T")
    p.add_argument("--a", help="A coefficients, ascending powers of q^-1")
    p.add_argument("--b", help="B coefficients")
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--p", help="desired closed-loop polynomial P")
    p.add_argument("--t-mode", choices=T_MODES, default="unit_dc_gain")
    p.add_argument("--json", help='inline JSON {"a": [...], "b": [...], "d": 0, "p": [...]}')
    p.set_defaults(func=cmd_design_rst)

    p = sub.add_parser("calibrate", help="build the DAC linearization table")
    p.add_argument("--scenario", help="take the card section from this scenario")
    p.add_argument("--alpha", type=float)
    p.add_argument("--actual-max", type=float)
    p.add_argument("--bits", type=int)
    p.add_argument("--csv", help="dump target_code,corrected_code,residual_V")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("hil-peer", help="reference external controller over UDP")
    p.add_argument("--law", choices=("echo", "rst", "pid", "scenario"), default="echo")
    p.add_argument("--scenario")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--sessions", type=int, help="exit after this many BYE frames")
    p.set_defaults(func=cmd_hil_peer)

    p = sub.add_parser("plot", help="render a trace CSV as SVG")
    p.add_argument("trace")
    p.add_argument("out")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, TraceFormatError, ValueError, OSError) as exc:
        print(f"hilsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
