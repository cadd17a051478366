"""Command line entry point: ``virecon run <config>`` and ``virecon selftest``.

Exit codes: 0 success, 1 a failed acceptance check or a failed experiment,
2 configuration, parse or output errors.
"""

import argparse
import sys
from pathlib import Path

from virecon.errors import ParseError


def _run(args):
    from virecon.config import load_config_file
    from virecon.experiment import ExperimentError, run_experiment
    from virecon.output import write_outputs

    try:
        config = load_config_file(args.config)
    except ParseError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    out_dir = args.output or config.output_dir
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {out_dir}: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(config, echo=print)
    except ExperimentError as exc:
        print(f"experiment failed at {exc}", file=sys.stderr)
        return 1
    try:
        paths = write_outputs(report, out_dir)
    except OSError as exc:
        print(f"cannot write outputs to {out_dir}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(paths)} files to {out_dir}")
    return 0


def _selftest(args):
    from virecon.acceptance import CRITERIA, run_all

    if args.only:
        wanted = set(args.only)
        unknown = wanted - set(range(1, len(CRITERIA) + 1))
        if unknown:
            print(f"unknown criteria: {sorted(unknown)}", file=sys.stderr)
            return 2
        checks = tuple(c for i, c in enumerate(CRITERIA, 1) if i in wanted)
    else:
        checks = CRITERIA
    results = run_all(echo=print, checks=checks)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="virecon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("-o", "--output", help="output directory (overrides output_dir)")
    run.set_defaults(func=_run)
    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--only", type=int, nargs="+", metavar="N",
                    help="run only the listed criteria")
    st.set_defaults(func=_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
