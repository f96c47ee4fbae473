"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 numerical contract violation
(including a failed entropy audit).
"""

import argparse
import sys
from pathlib import Path

from . import diagnostics as dg
from . import harness
from . import kernel as kmod
from .errors import NumericalError, ValidationError
from .grid import fmt

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _parse_set(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_simulate(args):
    cfg = harness.parse_config(Path(args.config).read_text())
    for p in harness.run_config(cfg):
        print(p)
    return EXIT_OK


def cmd_preset(args):
    for p in harness.run_preset(args.name, _parse_set(args.set)):
        print(p)
    return EXIT_OK


def cmd_check_kernel(args):
    spec = kmod.validate(kmod.preset(args.kernel))
    eta = args.eta
    print(f"kernel {spec.name}: admissible (delta={fmt(spec.delta)}, gamma'(0)={fmt(spec.gamma_prime_at_zero)}, "
          f"tv={fmt(spec.tv)})")
    print(f"c_eta({fmt(eta)}) = {fmt(kmod.c_eta(spec, eta))}")
    if eta < 0.5:
        lo, hi = kmod.c_eta_bounds(spec, eta)
        print(f"bracket = [{fmt(lo)}, {fmt(hi)}]")
    a = -1.0 / spec.gamma_prime_at_zero
    d1, d2 = kmod.d_constants(spec, a)
    print(f"combo_l1_norm = {fmt(kmod.combo_l1_norm(spec, eta, a))} (eta*D1 = {fmt(eta * d1)})")
    return EXIT_OK


def cmd_entropy_audit(args):
    traj = harness.read_trajectory(args.trajectory)
    g = traj.grid
    margin = 0.1 * (g.x_max - g.x_min)
    bank = dg.test_bank(float(traj.times[-1]), g.x_min + margin, g.x_max - margin)
    audit = dg.entropy_audit(traj, bank)
    print(f"min residual {fmt(audit.min_residual)} against tolerance {fmt(audit.tol)} "
          f"over {audit.residuals.size} (k, phi) pairs")
    if not audit.passed:
        print("entropy audit FAILED")
        return EXIT_NUMERICAL
    print("entropy audit passed")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nlcl", description="Nonlocal conservation law simulator and analysis harness")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", help="run an experiment config file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("preset", help="run a named figure preset")
    s.add_argument("name", choices=sorted(harness.PRESETS))
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.set_defaults(func=cmd_preset)
    s = sub.add_parser("check-kernel", help="validate a kernel preset and print its constants")
    s.add_argument("--kernel", required=True)
    s.add_argument("--eta", required=True, type=float)
    s.set_defaults(func=cmd_check_kernel)
    s = sub.add_parser("entropy-audit", help="check a stored LWR trajectory against the entropy bank")
    s.add_argument("--trajectory", required=True)
    s.set_defaults(func=cmd_entropy_audit)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
