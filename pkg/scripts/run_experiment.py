"""Run one search on the synthetic oracle and write every analysis table.

    python3 scripts/run_experiment.py --out runs/seed0 --seed 0
"""
import argparse
import json
import sys
from pathlib import Path

from blockswarm.cli import ANALYSES, main

ROOT = Path(__file__).resolve().parents[1]


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=str(ROOT / "configs" / "default.json"))
    p.add_argument("--parallel", type=int, default=1)
    return p.parse_args()


def run() -> int:
    args = parse_args()
    code = main(["search", "--config", args.config, "--out", args.out,
                 "--seed", str(args.seed), "--parallel", str(args.parallel)])
    if code:
        return code
    for which in ANALYSES:
        code = main(["analyze", args.out, which])
        if code:
            return code
    summary = {w: json.loads((Path(args.out) / "analysis" / f"{w}.json").read_text()) for w in ANALYSES}
    print(json.dumps(summary, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(run())
