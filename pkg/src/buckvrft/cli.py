"""Command-line entry point for the experiment recipes."""

from __future__ import annotations

import argparse
import sys

from .circuit import CircuitParameters, load_parameters
from .pipeline import RECIPES, V_REF_DEFAULT, run_pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buckvrft",
        description="Two-leg buck converter simulation and data-driven "
                    "PI / PI-anti-windup tuning.",
    )
    sub = parser.add_subparsers(dest="recipe", required=True)
    for recipe in RECIPES:
        sp = sub.add_parser(recipe, help=f"run the {recipe} recipe")
        sp.add_argument("--out", required=True, help="artifact directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", default=None,
                        help="circuit parameter key=value file")
        sp.add_argument("--plant", "--mode", dest="plant",
                        choices=("averaged", "switched"), default="switched",
                        help="plant simulation mode")
        sp.add_argument("--duration", type=float, default=None,
                        help="override the recipe's simulation horizon [s]")
        sp.add_argument("--v-ref", type=float, default=V_REF_DEFAULT,
                        help="reference voltage for closed-loop recipes [V]")
        if recipe == "validate":
            sp.add_argument("--controller", default="vrft",
                            choices=("zn", "vrft", "vrft-aw"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = (load_parameters(args.config) if args.config
                  else CircuitParameters())
        result = run_pipeline(
            args.recipe, params, args.out, seed=args.seed, mode=args.plant,
            v_ref=args.v_ref, duration=args.duration,
            controller=getattr(args, "controller", "vrft"),
        )
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _summarize(args.recipe, result)
    return 0


def _summarize(recipe: str, result) -> None:
    if recipe == "compare":
        print("controller  undershoot%%  settling[ms]")
        for name, rep in result.items():
            settling = ("never" if rep.settling_time_5pct is None
                        else f"{rep.settling_time_5pct * 1e3:.3f}")
            print(f"{name:10s}  {rep.undershoot_pct:10.2f}  {settling}")
    elif recipe == "validate":
        settling = ("never" if result.settling_time_5pct is None
                    else f"{result.settling_time_5pct * 1e3:.3f} ms")
        print(f"{result.controller_name}: undershoot "
              f"{result.undershoot_pct:.2f}%, settling {settling}")
    elif recipe == "tune-zn":
        res, gains = result["result"], result["gains"]
        print(f"ku={res.ku:.4g} tu={res.tu:.4g} s -> "
              f"kp={gains.kp:.4g} ki={gains.ki:.4g}")
    elif recipe in ("tune-vrft", "tune-vrft-aw"):
        g = result["fit"].gains
        kaw = f" kaw={g.kaw:.4g}" if g.kaw is not None else ""
        print(f"kp={g.kp:.4g} ki={g.ki:.4g}{kaw} "
              f"(residual rms {result['fit'].residual_rms:.3g})")
    elif recipe == "fig4-check":
        print(f"worst switched/averaged discrepancy: "
              f"{result['worst'] * 100:.3f}%")
    else:
        for key, value in result.items():
            print(f"{key}: {value}")


if __name__ == "__main__":
    raise SystemExit(main())
