#!/usr/bin/env python3
"""Constrained-random baselines: seed-averaged coverage per device.

Runs N seeds x `--count` stimuli against each device and prints one summary
row per device (average covered bins, average coverage rate, worst per-seed
wall time). These are the reference numbers the dialogue-driven agent is
measured against.
"""
from __future__ import annotations

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from covstim.agents import CrtAgent
from covstim.duts import DUT_KINDS, make_dut
from covstim.runtime import run_crt_trial


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=1_000_000, help="stimuli per seed")
    parser.add_argument("--seeds", type=int, default=5, help="number of seeds")
    parser.add_argument(
        "--dut", choices=DUT_KINDS, default=None, help="one device (default: all)"
    )
    args = parser.parse_args()
    kinds = [args.dut] if args.dut else list(DUT_KINDS)
    print(f"{'dut':<8} {'plan':>5} {'avg bins':>9} {'avg rate%':>9} {'worst s':>8}")
    for kind in kinds:
        rates: list[float] = []
        covered: list[int] = []
        worst = 0.0
        plan_size = len(make_dut(kind).plan)
        for seed in range(args.seeds):
            dut = make_dut(kind)
            agent = CrtAgent(kind, random.Random(seed))
            t0 = time.perf_counter()
            trial = run_crt_trial(dut, agent, args.count, chunk=max(1, args.count // 10))
            worst = max(worst, time.perf_counter() - t0)
            rates.append(100 * trial.rate)
            covered.append(trial.max_coverage)
        print(
            f"{kind:<8} {plan_size:>5} {sum(covered) / len(covered):>9.1f} "
            f"{sum(rates) / len(rates):>9.2f} {worst:>8.1f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
