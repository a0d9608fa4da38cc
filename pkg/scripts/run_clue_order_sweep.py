#!/usr/bin/env python3
"""Evaluate every permutation of the four clue kinds on a steering fixture."""

import argparse
from pathlib import Path

from i2cr.evaluation import format_report_table
from i2cr.fixtures import run_clue_order_sweep

from run_steering_experiment import fixture_from_dir


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("fixture_dir", help="directory created by make_steering_fixture.py")
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    results = run_clue_order_sweep(fixture_from_dir(Path(args.fixture_dir)), workers=args.workers)
    print(format_report_table([report for _, report in results]))
    accuracies = {report.accuracies[1] for _, report in results}
    spread = max(accuracies) - min(accuracies)
    print(f"\n24 orders; top-1 accuracy spread: {spread:.4f}")


if __name__ == "__main__":
    main()
