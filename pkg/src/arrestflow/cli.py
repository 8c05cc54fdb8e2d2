"""Command line entry point ``arrestflow``.

Thread caps for the numerical libraries must be set before numpy loads, so
this module imports nothing numerical at top level.
"""

import argparse
import json
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def configure_threads(serial=False, environ=os.environ):
    """Apply ``ARRESTFLOW_THREADS`` (0 means serial) to the BLAS thread pools.

    Returns the thread count applied, or None when nothing was requested.
    """
    raw = environ.get("ARRESTFLOW_THREADS")
    if serial:
        count = 1
    elif raw is None or raw == "":
        return None
    else:
        try:
            count = int(raw)
        except ValueError:
            raise SystemExit(f"ARRESTFLOW_THREADS must be an integer, got {raw!r}")
        if count < 0:
            raise SystemExit(f"ARRESTFLOW_THREADS must be >= 0, got {count}")
        count = max(count, 1)
    for var in THREAD_VARS:
        environ[var] = str(count)
    return count


def _load(source):
    from . import config, scenarios

    if not os.path.exists(source) and source in scenarios.SCENARIOS:
        return config.config_from_dict(scenarios.scenario(source))
    return config.load_config(source)


def _cmd_simulate(args):
    from . import app

    cfg = _load(args.config)
    out = args.out or "run_output"
    result = app.simulate(cfg, out)
    for ev in result.events:
        print(f"t={ev['t']:.6g} {ev['type']} {json.dumps(ev['payload'], sort_keys=True)}")
    print(f"outputs written to {out}")
    return result.exit_code


def _cmd_diagnose(args):
    from . import app

    report = app.diagnose_file(args.snapshot, args.kernel)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_validate_kernel(args):
    from . import app

    rep = app.validate_kernel_file(args.fragment)
    print(f"family: {rep['family']} {json.dumps(rep['params'], sort_keys=True)}")
    print(f"flags: {', '.join(rep['flags']) or '(none)'}")
    print(f"c0*: {rep['c0star']:.10g}")
    print(f"c1*: {rep['c1star']:.10g}")
    for kind in ("self", "cross", "self_experimental"):
        routes = rep["routes"][kind]
        print(f"routes ({kind.replace('_', ', ')}): {', '.join(routes) or 'none'}")
    for w in rep["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _cmd_convergence(args):
    from . import app

    rep = app.convergence(_load(args.config), args.levels)
    tmp = rep["temporal"]
    print("dt          error(dt, dt/2)   ratio")
    for k, err in enumerate(tmp["errors"]):
        ratio = tmp["ratios"][k - 1] if k > 0 else float("nan")
        print(f"{tmp['dt'][k]:<11.4g} {err:<17.6e} {ratio:.4f}")
    if tmp["floor"]:
        print("temporal errors at the round-off floor: ratios not meaningful (floor)")
    sp = rep["spatial"]
    flag = "  (floor)" if sp["floor"] else ""
    print(f"spatial M={sp['M'][0]} vs {sp['M'][1]} at dt={sp['dt']:.4g}: {sp['error']:.6e}{flag}")
    return 0


def _cmd_scenario(args):
    from . import config, scenarios

    sys.stdout.write(config.dump_config(config.config_from_dict(scenarios.scenario(args.name))))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="arrestflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a configuration and write outputs")
    s.add_argument("config", help="JSON config file or a built-in scenario name")
    s.add_argument("--out", help="output directory (default: run_output)")
    s.add_argument("--serial", action="store_true", help="force single-threaded numerics")
    s.set_defaults(func=_cmd_simulate)

    d = sub.add_parser("diagnose", help="embeddedness report for a snapshot")
    d.add_argument("snapshot")
    d.add_argument("--kernel", default="pseudo", choices=["pseudo", "mobius", "kl"])
    d.add_argument("--out", help="write the JSON report here instead of stdout")
    d.set_defaults(func=_cmd_diagnose)

    v = sub.add_parser("validate-kernel", help="classify a kernel config fragment")
    v.add_argument("fragment")
    v.set_defaults(func=_cmd_validate_kernel)

    c = sub.add_parser("convergence", help="self-convergence table in dt and M")
    c.add_argument("config", help="JSON config file or a built-in scenario name")
    c.add_argument("--levels", type=int, default=3)
    c.set_defaults(func=_cmd_convergence)

    n = sub.add_parser("scenario", help="print a built-in scenario as normalized JSON")
    n.add_argument("name")
    n.set_defaults(func=_cmd_scenario)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_threads(serial=getattr(args, "serial", False))
    from .errors import ArrestflowError

    try:
        return args.func(args)
    except (ArrestflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
