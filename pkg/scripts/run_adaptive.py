"""Adaptive loop on the pyramid obstacle with a configurable marking fraction and budget."""

import argparse

from virecon.config import load_config
from virecon.experiment import run_experiment, top_fraction_share
from virecon.output import write_outputs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--theta", type=float, default=0.5)
    parser.add_argument("--budget", type=int, default=20000)
    parser.add_argument("--k", type=int, default=1, choices=(1, 2))
    parser.add_argument("-o", "--output")
    args = parser.parse_args(argv)
    config = load_config(f"problem=pyramid_adaptive\nrefinement=adaptive\nk={args.k}\n"
                         f"theta={args.theta}\nbudget={args.budget}")
    report = run_experiment(config, echo=print)
    print("level ndofs top10%-share")
    for lv in report.levels:
        share = top_fraction_share(lv.analysis.breakdown.eta0_elem_sq, 0.1)
        print(f"{lv.row.level:5d} {lv.row.ndofs:6d} {share:.3f}")
    if args.output:
        write_outputs(report, args.output)


if __name__ == "__main__":
    main()
