#!/usr/bin/env python3
"""Run the whole tuning study end to end and print the headline numbers.

Collects open-loop training data, tunes all three controllers, validates
them in closed loop against a 10 V reference on the switched plant, and
cross-checks the switched simulator against the averaged model.  All
artifacts land under --out.
"""

import argparse
from pathlib import Path

from buckvrft.circuit import CircuitParameters, load_parameters
from buckvrft.pipeline import (run_collect_ol, run_compare, run_fig4_check,
                               run_tune_vrft, run_tune_vrft_aw, run_tune_zn)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/reproduction")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", default=None)
    ap.add_argument("--plant", choices=("averaged", "switched"),
                    default="switched")
    args = ap.parse_args()

    p = load_parameters(args.config) if args.config else CircuitParameters()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print("== switched vs averaged cross-check ==")
    fig4 = run_fig4_check(p, out, args.seed)
    for duty, rel in fig4.items():
        if duty != "worst":
            print(f"  d={duty}: discrepancy {rel * 100:.4f}%")

    print("== data collection ==")
    run_collect_ol(p, out, args.seed, args.plant)

    print("== tuning ==")
    zn = run_tune_zn(p, out, args.seed, args.plant)
    print(f"  relay search: ku={zn['result'].ku:.4g}, tu={zn['result'].tu:.4g} s")
    for name, runner in (("vrft", run_tune_vrft), ("vrft-aw", run_tune_vrft_aw)):
        fit = runner(p, out, args.seed, args.plant)["fit"]
        g = fit.gains
        kaw = f", kaw={g.kaw:.4g}" if g.kaw is not None else ""
        print(f"  {name}: kp={g.kp:.4g}, ki={g.ki:.4g}{kaw}")

    print("== closed-loop comparison (V_ref = 10 V, cold start) ==")
    reports = run_compare(p, out, args.seed, args.plant)
    print(f"  {'controller':10s} {'undershoot%':>12s} {'settling[ms]':>13s} "
          f"{'sat[ms]':>8s}")
    for name, rep in reports.items():
        settling = ("never" if rep.settling_time_5pct is None
                    else f"{rep.settling_time_5pct * 1e3:.3f}")
        print(f"  {name:10s} {rep.undershoot_pct:12.2f} {settling:>13s} "
              f"{rep.saturation_duration * 1e3:8.3f}")
    print(f"artifacts in {out}")


if __name__ == "__main__":
    main()
