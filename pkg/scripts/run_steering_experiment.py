#!/usr/bin/env python3
"""Round-by-round accuracy curve on a steering fixture.

Compares the text-only baseline, cumulative clue-round budgets, and the
all-clues-in-one-round mode. Generates the fixture first if needed:

    python scripts/make_steering_fixture.py /tmp/steering
    python scripts/run_steering_experiment.py /tmp/steering
"""

import argparse
from pathlib import Path

from i2cr.fixtures import SteeringFixture, run_steering_experiment


def fixture_from_dir(root: Path) -> SteeringFixture:
    return SteeringFixture(
        root=root,
        kg_path=root / "kg.jsonl",
        dataset_path=root / "dataset.jsonl",
        transcript_path=root / "transcript.jsonl",
        config_path=root / "run.conf",
        sample_kinds=(),
        expected_round_accuracy={},
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("fixture_dir", help="directory created by make_steering_fixture.py")
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    outcome = run_steering_experiment(fixture_from_dir(Path(args.fixture_dir)), workers=args.workers)
    print(outcome.table())
    full = outcome.full.accuracies[1]
    base = outcome.text_only.accuracies[1]
    print(f"\nfull minus text-only: {full - base:+.3f}")


if __name__ == "__main__":
    main()
