"""Uniform convergence study: prints the level table and observed rates."""

import argparse
import dataclasses

import numpy as np

from virecon.config import load_config_file
from virecon.experiment import run_experiment
from virecon.output import write_outputs


def rates(values, h):
    values, h = np.asarray(values, float), np.asarray(h, float)
    return np.log(values[:-1] / values[1:]) / np.log(h[:-1] / h[1:])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config")
    parser.add_argument("--levels", type=int, help="override the number of levels")
    parser.add_argument("-o", "--output", help="also write CSV/VTK here")
    args = parser.parse_args(argv)
    config = load_config_file(args.config)
    if args.levels:
        config = dataclasses.replace(config, levels=args.levels)
    report = run_experiment(config, echo=print)
    h = report.column("h_max")
    for name in ("err_LinfL2", "eta0_T", "eta_total"):
        col = report.column(name)
        if np.all(np.isfinite(col)) and len(col) > 1:
            print(f"{name:>10s} rates: " + " ".join(f"{r:6.3f}" for r in rates(col, h)))
    if args.output:
        write_outputs(report, args.output)


if __name__ == "__main__":
    main()
