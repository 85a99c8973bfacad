"""Run the bundled reproduction recipes at a chosen scale.

    python scripts/run_recipes.py --scale 0.1 fig3_pairwise fig3_streaky
    python scripts/run_recipes.py --scale 1          # every recipe
"""

import argparse
import json
import logging
from pathlib import Path

from corrsurf.experiment import ExperimentConfig, run_experiment

RECIPES = Path(__file__).resolve().parent.parent / "recipes"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", help="recipe names (default: all)")
    ap.add_argument("--scale", type=float, default=1.0, help="multiply configured shots")
    ap.add_argument("--out", default="out", help="parent directory for results")
    ap.add_argument("--max-distance", type=int, help="drop distances above this")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    names = args.names or sorted(p.stem for p in RECIPES.glob("*.yaml"))
    for name in names:
        cfg = ExperimentConfig.load(RECIPES / f"{name}.yaml")
        cfg.shots = max(1, round(cfg.shots * args.scale))
        if args.max_distance:
            cfg.distances = [d for d in cfg.distances if d <= args.max_distance]
        out = Path(args.out) / name
        run_experiment(cfg, out)
        summary = json.loads((out / "summary.json").read_text())
        print(f"== {name} ({cfg.shots} shots) -> {out}")
        print(json.dumps(summary, indent=1))


if __name__ == "__main__":
    main()
