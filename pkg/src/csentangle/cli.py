"""Command-line interface: ``csentangle <subcommand> [options]``."""

from __future__ import annotations

import argparse
import sys

from .config import describe_keys, load_config
from .errors import ConfigError
from .experiments import run_bvp, run_ho_check, run_kerr_purity, run_propagator, run_property_suite

RUNNERS = {
    "ho-check": (run_ho_check, "harmonic propagator: semiclassical against exact on a (z1, z2, T, xi) grid"),
    "kerr-purity": (run_kerr_purity, "Kerr purity curves: pipeline, printed closed form and exact oracle"),
    "bvp-solve": (run_bvp, "solve the boundary-value problem for given z1, z2, T, xi"),
    "propagator": (run_propagator, "semiclassical propagator over a time grid"),
    "property-suite": (run_property_suite, "measure every module invariant with fixed seeds"),
}


def _parser():
    epilog = describe_keys() + "\n\nexit status: 0 when every check of the run passes, 1 otherwise, 2 on bad input."
    parser = argparse.ArgumentParser(
        prog="csentangle",
        description="Semiclassical coherent-state propagators and bipartite purity from complex trajectories.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in RUNNERS.items():
        p = sub.add_parser(name, help=text, description=text, epilog=epilog,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="CSV destination ('-' for stdout)")
        p.add_argument("--threads", help="worker threads")
        p.add_argument("--seed", help="random seed of the property suite")
        if name == "bvp-solve":
            p.add_argument("--z1", help="initial amplitude(s), e.g. '1+0.5i, 0.3'")
            p.add_argument("--z2", help="final amplitude(s)")
            p.add_argument("--T", help="duration")
            p.add_argument("--xi", help="+1 or -1")
            p.add_argument("--guess", action="append", help="free-end guess (repeatable)")
            p.add_argument("--tol", help="Newton tolerance")
            p.add_argument("--max-iter", dest="max_iter", help="evaluations per guess")
    return parser


def _overrides(args):
    o = {"out": args.out, "threads": args.threads, "seed": args.seed}
    if args.command == "bvp-solve":
        o.update(z1=args.z1, z2=args.z2, xi=args.xi, bvp_tol=args.tol, max_iter=args.max_iter)
        if args.T is not None:
            o.update(T_start=args.T, T_stop=args.T, T_count="1")
        if args.guess:
            o["guess"] = ";".join(args.guess)
    return o


def main(argv=None):
    args = _parser().parse_args(argv)
    runner = RUNNERS[args.command][0]
    try:
        config = load_config(args.command, args.config, _overrides(args))
        report = runner(config)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = report.csv_text()
    if config.out == "-":
        sys.stdout.write(text)
        summary_stream = sys.stderr
    else:
        with open(config.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        summary_stream = sys.stdout
    for line in report.summary:
        print(line, file=summary_stream)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
