"""End-to-end experiment recipes: data collection, tuning, validation.

Every recipe writes its artifacts (CSV traces, key=value reports) under
an output directory and embeds the configuration and seed so any file
can be regenerated from scratch.  Recipes are deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import BilinearModel, CircuitParameters, build_model, equilibrium
from .metrics import PerformanceReport, compute_metrics
from .plant import SimulationPlan, integrate_averaged, integrate_switched
from .reports import read_report, write_report
from .runtime import ControllerGains, closed_loop
from .signals import (ChirpSpec, chirp, discretize_first_order,
                      virtual_error, virtual_reference)
from .timeseries import TimeSeries, from_csv, to_csv
from .tuning import (FitResult, find_ultimate_gain, load_gains,
                     save_fit_report, vrft_fit, vrft_fit_aw, zn_gains)

RECIPES = ("collect-ol", "tune-zn", "tune-vrft", "tune-vrft-aw",
           "validate", "compare", "fig4-check")

# frozen experiment hyperparameters (ledgered choices where the method
# leaves them open)
TRAIN_DURATION = 0.05          # 501 samples at t_samp = 100 us
CHIRP_OFFSET_CLASSIC = 0.5
CHIRP_AMPLITUDE_CLASSIC = 0.1
CHIRP_OFFSET_AW = 0.15
CHIRP_AMPLITUDE_AW = 0.07
NOISE_AMPLITUDE = 0.5
V_REF_DEFAULT = 10.0
VALIDATE_DURATION = 0.01
ZN_GAIN_GRID = tuple(np.round(np.arange(0.005, 0.2001, 0.005), 4))
ZN_DURATION = 0.06
FIG4_DUTIES = (0.2, 0.5, 0.8)
FIG4_DURATION = 0.02


class PipelineError(RuntimeError):
    """Raised when a recipe is missing a prerequisite artifact."""


def reference_model(p: CircuitParameters):
    """Target closed-loop model: time constant 1/f_c with f_c = f_s/100."""
    f_c = 1.0 / p.t_s / 100.0
    return discretize_first_order(1.0 / f_c, p.t_samp)


def _params_meta(p: CircuitParameters) -> dict:
    return {f"param_{k}": v for k, v in vars(p).items()}


def _integrate(m: BilinearModel, plan: SimulationPlan) -> TimeSeries:
    if plan.mode == "switched":
        return integrate_switched(m, plan)
    return integrate_averaged(m, plan)


def collect_open_loop(p: CircuitParameters, offset: float, amplitude: float,
                      seed: int, mode: str = "switched") -> TimeSeries:
    """One open-loop training run: chirp duty, clipped to the actuator
    range, against the cold-started plant; noisy measured output.

    Returns a t_samp-sampled series with channels d (raw command),
    d_sat (applied command), u_d (saturation excess) and V_out (the
    measured output corrupted by uniform noise).
    """
    m = build_model(p)
    f_c = 1.0 / p.t_s / 100.0
    spec = ChirpSpec(f_start=f_c / 2.0, f_end=2.0 * f_c,
                     duration=TRAIN_DURATION, amplitude=amplitude,
                     offset=offset)
    d_ts = chirp(spec, p.t_samp)
    d_raw = d_ts.channel("d")
    d_sat = np.clip(d_raw, 0.1, 0.9)
    u_d = d_raw - d_sat
    plan = SimulationPlan(duration=TRAIN_DURATION, mode=mode,
                          duty=d_ts.with_channel("d", d_sat),
                          initial_state="zero",
                          v_in=p.v_in_nominal, rng_seed=seed)
    sim = _integrate(m, plan)
    step = int(round(p.t_samp / sim.dt))
    meas = "V_out_meas" if "V_out_meas" in sim.channels else "V_out"
    y = sim.channel(meas)[::step][:d_raw.size]
    rng = np.random.default_rng(seed)
    y = y + rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, size=y.size)
    return TimeSeries(t0=0.0, dt=p.t_samp,
                      channels={"d": d_raw, "d_sat": d_sat, "u_d": u_d,
                                "V_out": y})


def fit_from_training(p: CircuitParameters, train: TimeSeries,
                      anti_windup: bool) -> FitResult:
    """Run the virtual-reference identification on one training series."""
    ref = reference_model(p)
    y = train.channel("V_out")
    r = virtual_reference(y, ref)
    e = virtual_error(y[:-1], r)
    d = train.channel("d")[:-1]
    if anti_windup:
        return vrft_fit_aw(d, e, train.channel("u_d")[:-1], n_aw=1,
                           t_samp=p.t_samp)
    return vrft_fit(d, e, t_samp=p.t_samp)


def run_collect_ol(p: CircuitParameters, out_dir: Path, seed: int,
                   mode: str) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    for tag, offset, amp in (("classic", CHIRP_OFFSET_CLASSIC, CHIRP_AMPLITUDE_CLASSIC),
                             ("aw", CHIRP_OFFSET_AW, CHIRP_AMPLITUDE_AW)):
        ts = collect_open_loop(p, offset, amp, seed, mode)
        path = out_dir / f"train_{tag}.csv"
        meta = {"recipe": "collect-ol", "variant": tag, "seed": seed,
                "mode": mode, "chirp_offset": offset, "chirp_amplitude": amp,
                "noise_amplitude": NOISE_AMPLITUDE,
                "duration": TRAIN_DURATION}
        meta.update(_params_meta(p))
        to_csv(ts, path, meta=meta)
        artifacts[f"train_{tag}"] = path
    write_report(out_dir / "collect_report.txt",
                 {"recipe": "collect-ol", "seed": seed, "mode": mode,
                  "samples": 1 + int(round(TRAIN_DURATION / p.t_samp)),
                  "train_classic": str(artifacts["train_classic"]),
                  "train_aw": str(artifacts["train_aw"])})
    artifacts["report"] = out_dir / "collect_report.txt"
    return artifacts


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise PipelineError(
            f"missing prerequisite artifact {path.name}: run the "
            f"'{producer}' recipe first"
        )
    return path


def run_tune_vrft(p: CircuitParameters, out_dir: Path, seed: int,
                  mode: str) -> dict:
    train_path = _require(out_dir / "train_classic.csv", "collect-ol")
    train, meta = from_csv(train_path)
    fit = fit_from_training(p, train, anti_windup=False)
    report = out_dir / "vrft_report.txt"
    save_fit_report(report, fit,
                    provenance={"recipe": "tune-vrft",
                                "training_csv": str(train_path),
                                "training_seed": meta.get("seed", seed),
                                "mode": mode})
    return {"report": report, "fit": fit}


def run_tune_vrft_aw(p: CircuitParameters, out_dir: Path, seed: int,
                     mode: str) -> dict:
    train_path = _require(out_dir / "train_aw.csv", "collect-ol")
    train, meta = from_csv(train_path)
    fit = fit_from_training(p, train, anti_windup=True)
    report = out_dir / "vrft_aw_report.txt"
    save_fit_report(report, fit,
                    provenance={"recipe": "tune-vrft-aw",
                                "training_csv": str(train_path),
                                "training_seed": meta.get("seed", seed),
                                "mode": mode})
    return {"report": report, "fit": fit}


def make_p_only_plant(p: CircuitParameters, mode: str,
                      duration: float = ZN_DURATION):
    """Closed-loop simulator handle for the ultimate-gain search."""
    m = build_model(p)
    record = 50 if mode == "switched" else 5

    def plant(gain: float, v_ref: float) -> TimeSeries:
        g = ControllerGains(kp=gain, ki=0.0, kaw=None, t_samp=p.t_samp)
        plan = SimulationPlan(duration=duration, mode=mode, duty=None,
                              initial_state="zero", v_in=p.v_in_nominal,
                              record_every=record)
        return closed_loop(m, plan, g, v_ref)

    return plant


def run_tune_zn(p: CircuitParameters, out_dir: Path, seed: int, mode: str,
                v_ref: float = V_REF_DEFAULT) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    plant = make_p_only_plant(p, mode)
    result = find_ultimate_gain(plant, ZN_GAIN_GRID, v_ref)
    gains = zn_gains(result.ku, result.tu, t_samp=p.t_samp)
    report = out_dir / "zn_report.txt"
    entries = {
        "kp": gains.kp, "ki": gains.ki, "kaw": "none", "n_aw": 1,
        "t_samp": gains.t_samp, "sat_lo": gains.sat_lo,
        "sat_hi": gains.sat_hi,
        "ku": result.ku, "tu": result.tu,
        "recipe": "tune-zn", "mode": mode, "seed": seed,
        "v_ref": v_ref, "gain_grid_lo": ZN_GAIN_GRID[0],
        "gain_grid_hi": ZN_GAIN_GRID[-1],
        "gains_tried": len(result.gain_trace),
    }
    for k, (g, verdict, ratio) in enumerate(result.gain_trace):
        entries[f"trace_{k}"] = f"{g}:{verdict}:{ratio:.6g}"
    write_report(report, entries)
    return {"report": report, "result": result, "gains": gains}


CONTROLLER_REPORTS = {
    "zn": ("zn_report.txt", "tune-zn"),
    "vrft": ("vrft_report.txt", "tune-vrft"),
    "vrft-aw": ("vrft_aw_report.txt", "tune-vrft-aw"),
}


def first_transient_window(ts: TimeSeries, v_ref: float,
                           pad: float = 5e-3) -> tuple[float, float]:
    """Window covering the first transient: start until the output first
    enters the 5% band, plus a pad; the whole series when it never does."""
    t = ts.time()
    y = ts.channel("V_out")
    inside = np.abs(y - v_ref) <= 0.05 * v_ref
    hits = np.flatnonzero(inside)
    end = t[-1] if hits.size == 0 else min(t[hits[0]] + pad, t[-1])
    return (float(t[0]), float(end))


def run_validate(p: CircuitParameters, out_dir: Path, seed: int, mode: str,
                 controller: str, v_ref: float = V_REF_DEFAULT,
                 duration: float = VALIDATE_DURATION) -> PerformanceReport:
    if controller not in CONTROLLER_REPORTS:
        raise PipelineError(
            f"unknown controller {controller!r}; expected one of "
            f"{sorted(CONTROLLER_REPORTS)}"
        )
    report_name, producer = CONTROLLER_REPORTS[controller]
    gains = load_gains(_require(out_dir / report_name, producer))
    m = build_model(p)
    record = 10 if mode == "switched" else 1
    plan = SimulationPlan(duration=duration, mode=mode, duty=None,
                          initial_state="zero", v_in=p.v_in_nominal,
                          record_every=record)
    ts = closed_loop(m, plan, gains, v_ref)
    window = first_transient_window(ts, v_ref)
    rep = compute_metrics(ts, v_ref, window, controller_name=controller,
                          sat_limits=(gains.sat_lo, gains.sat_hi))
    trace_path = out_dir / f"validate_{controller}.csv"
    meta = {"recipe": "validate", "controller": controller, "seed": seed,
            "mode": mode, "v_ref": v_ref, "duration": duration,
            "kp": gains.kp, "ki": gains.ki,
            "kaw": gains.kaw if gains.kaw is not None else "none"}
    meta.update(_params_meta(p))
    to_csv(ts, trace_path, meta=meta)
    settling = (rep.settling_time_5pct
                if rep.settling_time_5pct is not None else "never")
    write_report(out_dir / f"validate_{controller}_report.txt", {
        "recipe": "validate", "controller": controller, "seed": seed,
        "mode": mode, "v_ref": v_ref,
        "undershoot_pct": rep.undershoot_pct,
        "settling_time_5pct": settling,
        "steady_state_error": rep.steady_state_error,
        "saturation_duration": rep.saturation_duration,
        "window_start": window[0], "window_end": window[1],
    })
    return rep


def run_compare(p: CircuitParameters, out_dir: Path, seed: int, mode: str,
                v_ref: float = V_REF_DEFAULT,
                duration: float = VALIDATE_DURATION) -> dict[str, PerformanceReport]:
    reports = {}
    for controller in ("zn", "vrft", "vrft-aw"):
        reports[controller] = run_validate(p, out_dir, seed, mode,
                                           controller, v_ref, duration)
    lines = ["controller,undershoot_pct,settling_time_5pct_ms,"
             "steady_state_error,saturation_duration_ms"]
    for name, rep in reports.items():
        settling = ("" if rep.settling_time_5pct is None
                    else f"{rep.settling_time_5pct * 1e3:.6g}")
        lines.append(f"{name},{rep.undershoot_pct:.6g},{settling},"
                     f"{rep.steady_state_error:.6g},"
                     f"{rep.saturation_duration * 1e3:.6g}")
    header = [f"# recipe=compare", f"# seed={seed}", f"# mode={mode}",
              f"# v_ref={v_ref}", f"# duration={duration}"]
    (out_dir / "comparison.csv").write_text("\n".join(header + lines) + "\n")
    return reports


def run_fig4_check(p: CircuitParameters, out_dir: Path, seed: int,
                   duties=FIG4_DUTIES, duration: float = FIG4_DURATION) -> dict:
    """Cross-validate the switched simulator against the averaged model.

    At each constant duty the steady-state one-period mean of the
    switched output is compared with the averaged-model equilibrium.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    m = build_model(p)
    rows = ["duty,v_equilibrium,v_switched_mean,v_averaged_final,rel_discrepancy"]
    worst = 0.0
    results = {}
    for d in duties:
        x_eq = equilibrium(m, d, [p.v_in_nominal, 0.0])
        plan_sw = SimulationPlan(duration=duration, mode="switched", duty=d,
                                 initial_state="zero", v_in=p.v_in_nominal)
        ts_sw = integrate_switched(m, plan_sw)
        v_sw = float(ts_sw.channel("V_out_avg")[-1])
        plan_av = SimulationPlan(duration=duration, mode="averaged", duty=d,
                                 initial_state="zero", v_in=p.v_in_nominal)
        v_av = float(integrate_averaged(m, plan_av).channel("V_out")[-1])
        rel = abs(v_sw - x_eq[5]) / abs(x_eq[5])
        worst = max(worst, rel)
        rows.append(f"{d},{x_eq[5]:.12g},{v_sw:.12g},{v_av:.12g},{rel:.6g}")
        results[d] = rel
    (out_dir / "crosscheck.csv").write_text(
        "\n".join([f"# recipe=fig4-check", f"# seed={seed}",
                   f"# duration={duration}"] + rows) + "\n")
    write_report(out_dir / "crosscheck_report.txt", {
        "recipe": "fig4-check", "seed": seed, "duration": duration,
        "worst_rel_discrepancy": worst,
        "within_2pct": "yes" if worst < 0.02 else "no",
    })
    results["worst"] = worst
    return results


def run_pipeline(recipe: str, p: CircuitParameters, out_dir, seed: int = 0,
                 mode: str = "switched", v_ref: float = V_REF_DEFAULT,
                 duration: float | None = None, controller: str = "vrft"):
    """Dispatch one named recipe; returns its artifact/report summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if recipe == "collect-ol":
        return run_collect_ol(p, out_dir, seed, mode)
    if recipe == "tune-zn":
        return run_tune_zn(p, out_dir, seed, mode, v_ref)
    if recipe == "tune-vrft":
        return run_tune_vrft(p, out_dir, seed, mode)
    if recipe == "tune-vrft-aw":
        return run_tune_vrft_aw(p, out_dir, seed, mode)
    if recipe == "validate":
        return run_validate(p, out_dir, seed, mode, controller, v_ref,
                            duration or VALIDATE_DURATION)
    if recipe == "compare":
        return run_compare(p, out_dir, seed, mode, v_ref,
                           duration or VALIDATE_DURATION)
    if recipe == "fig4-check":
        return run_fig4_check(p, out_dir, seed,
                              duration=duration or FIG4_DURATION)
    raise PipelineError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")
