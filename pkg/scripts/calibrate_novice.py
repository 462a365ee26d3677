#!/usr/bin/env python3
"""Calibration sweep behind the default novice degradation parameters.

Scores candidate (noise, delay, drift) settings on three axes: solo success
rate in the 5-20% band targeting ~10%, the shared-control gain under the
expert-sourced model, and trial duration. The shipped PilotConfig defaults
come from this sweep; rerun after any physics or policy change.

Usage: python scripts/calibrate_novice.py [--seeds 100]
"""

import argparse
import tempfile
import time
from pathlib import Path

from koopland.harness import (EXPERT, USER_ONLY, StudyConfig, build_models,
                              run_condition)
from koopland.pilots import PilotConfig

GRID = [
    # (noise_main, noise_side, delay_steps, drift_sigma, drift_decay)
    (0.15, 0.30, 2, 0.06, 0.995),
    (0.15, 0.30, 2, 0.08, 0.995),   # shipped default
    (0.15, 0.30, 2, 0.10, 0.995),
    (0.20, 0.35, 2, 0.08, 0.990),
    (0.20, 0.40, 2, 0.10, 0.990),
    (0.25, 0.45, 2, 0.08, 0.990),
]


def evaluate(pilot: PilotConfig, seeds: int) -> tuple[float, float, float]:
    config = StudyConfig(seed=0, pilot=pilot, conditions=(USER_ONLY, EXPERT),
                         trials_per_condition=seeds)
    with tempfile.TemporaryDirectory() as td:
        models = build_models(config, Path(td))
        solo = run_condition(USER_ONLY, config)
        shared = run_condition(EXPERT, config, models)
    rate = sum(r.success for r in solo) / seeds
    shared_rate = sum(r.success for r in shared) / seeds
    duration = sum(r.duration for r in solo) / seeds
    return rate, shared_rate, duration


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=100)
    args = parser.parse_args()
    print(f"{'noise':>12} {'delay':>5} {'drift':>12} {'solo':>6} {'shared':>7}"
          f" {'gap':>6} {'dur':>6}")
    for nm, ns, delay, drift, decay in GRID:
        pilot = PilotConfig(noise_main=nm, noise_side=ns, delay_steps=delay,
                            drift_sigma=drift, drift_decay=decay)
        t0 = time.perf_counter()
        solo, shared, duration = evaluate(pilot, args.seeds)
        in_band = "ok" if 0.05 <= solo <= 0.20 else "  "
        print(f"({nm:.2f},{ns:.2f}) {delay:>5} ({drift:.2f},{decay:.3f})"
              f" {solo:>6.2f} {shared:>7.2f} {shared-solo:>6.2f}"
              f" {duration:>5.1f}s {in_band} [{time.perf_counter()-t0:.0f}s]")


if __name__ == "__main__":
    main()
