"""Fit exponential and power-law trends to a results CSV and tabulate teraquop projections.

    python scripts/projection_table.py out/fig5_sweep/results.csv
"""

import argparse
from collections import defaultdict

from corrsurf import analysis
from corrsurf.experiment import read_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("results")
    args = ap.parse_args()

    groups = defaultdict(list)
    for r in read_csv(args.results):
        if r["p_round"] > 0:
            groups[(r["model"], r["p"])].append((r["d"], r["p_round"]))
    print(f"{'model':32s} {'p':>8s} {'fit':12s} {'amplitude':>10s} {'rate':>7s} {'resid':>7s} {'d*':>5s}")
    for (model, p), pts in sorted(groups.items()):
        if len(pts) < 3:
            continue
        for kind in (analysis.EXPONENTIAL, analysis.POWERLAW):
            fr = analysis.fit(sorted(pts), kind)
            tq = analysis.teraquop_distance(fr)
            print(f"{model:32s} {p:8.2e} {kind:12s} {fr.amplitude:10.3e} {fr.rate:7.3f} "
                  f"{fr.residual:7.3f} {tq if tq is not None else '-':>5}")


if __name__ == "__main__":
    main()
