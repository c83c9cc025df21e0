#!/usr/bin/env python3
"""Seed-averaged identification study: how stable are the fitted gains
across noise realizations of the training experiment?"""

import argparse

import numpy as np

from buckvrft.circuit import CircuitParameters
from buckvrft.pipeline import (CHIRP_AMPLITUDE_AW, CHIRP_AMPLITUDE_CLASSIC,
                               CHIRP_OFFSET_AW, CHIRP_OFFSET_CLASSIC,
                               collect_open_loop, fit_from_training)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--plant", choices=("averaged", "switched"),
                    default="switched")
    args = ap.parse_args()

    p = CircuitParameters()
    classic, aw = [], []
    for seed in range(args.seeds):
        train = collect_open_loop(p, CHIRP_OFFSET_CLASSIC,
                                  CHIRP_AMPLITUDE_CLASSIC, seed, args.plant)
        g = fit_from_training(p, train, anti_windup=False).gains
        classic.append((g.kp, g.ki))
        train = collect_open_loop(p, CHIRP_OFFSET_AW, CHIRP_AMPLITUDE_AW,
                                  seed, args.plant)
        g = fit_from_training(p, train, anti_windup=True).gains
        aw.append((g.kp, g.ki, g.kaw))

    classic = np.asarray(classic)
    aw = np.asarray(aw)
    print(f"{args.seeds} seeds, plant={args.plant}")
    print(f"classic: kp = {classic[:, 0].mean():.5f} +/- {classic[:, 0].std():.5f}  "
          f"ki = {classic[:, 1].mean():.5f} +/- {classic[:, 1].std():.5f}")
    print(f"aw:      kp = {aw[:, 0].mean():.5f} +/- {aw[:, 0].std():.5f}  "
          f"ki = {aw[:, 1].mean():.5f} +/- {aw[:, 1].std():.5f}  "
          f"kaw = {aw[:, 2].mean():.1f} +/- {aw[:, 2].std():.1f}")


if __name__ == "__main__":
    main()
