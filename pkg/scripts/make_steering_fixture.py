#!/usr/bin/env python3
"""Generate the synthetic steering corpus (KG, dataset, images, transcript)."""

import argparse

from i2cr.fixtures import make_steering_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", help="directory to create the fixture in")
    parser.add_argument("--samples", type=int, default=200, help="multiple of 10")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k", type=int, default=10)
    args = parser.parse_args()

    fixture = make_steering_fixture(args.out_dir, n_samples=args.samples, seed=args.seed, k=args.k)
    print(f"kg:         {fixture.kg_path}")
    print(f"dataset:    {fixture.dataset_path}")
    print(f"transcript: {fixture.transcript_path}")
    print(f"config:     {fixture.config_path}")
    print(f"expected round-by-round top-1 accuracy: {fixture.expected_round_accuracy}")


if __name__ == "__main__":
    main()
