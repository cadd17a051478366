"""Where does eta0 concentrate?  Top-fraction shares on uniform meshes for the pyramid."""

import argparse

from virecon.config import load_config
from virecon.experiment import run_experiment, top_fraction_share


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=8)
    parser.add_argument("--levels", type=int, default=3)
    parser.add_argument("--fraction", type=float, default=0.1)
    args = parser.parse_args(argv)
    config = load_config(f"problem=pyramid_adaptive\nn={args.n}\nlevels={args.levels}")
    report = run_experiment(config)
    for lv in report.levels:
        sq = lv.analysis.breakdown.eta0_elem_sq
        print(f"level {lv.row.level}: {len(sq)} elements, top {args.fraction:.0%} share "
              f"{top_fraction_share(sq, args.fraction):.3f}")


if __name__ == "__main__":
    main()
