"""Controller synthesis from data.

Three routes to PI gains:
  * relay-style auto-tuning: raise a proportional-only gain until the
    loop sustains oscillations, then apply the classic tuning rule;
  * one-shot least-squares identification of the controller from
    open-loop input-output data against a first-order target model;
  * the same identification extended with a saturation-excess regressor
    so an anti-windup gain is estimated alongside kp and ki.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .reports import read_report, write_report
from .runtime import ControllerGains
from .signals import ConditioningError, accumulate
from .timeseries import TimeSeries


class ExcitationError(ValueError):
    """Raised when training data cannot support the requested fit."""


class UltimateGainSearchError(RuntimeError):
    """Raised when no grid gain produces sustained oscillation."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class UltimateGainResult:
    """Outcome of the sustained-oscillation search."""

    ku: float
    tu: float
    gain_trace: tuple[tuple[float, str, float], ...]

    def __post_init__(self):
        if not (self.ku > 0.0 and self.tu > 0.0):
            raise ValueError("ku and tu must be > 0")


@dataclass(frozen=True)
class FitResult:
    """Identified gains plus the numbers a fit report carries."""

    gains: ControllerGains
    theta: tuple[float, ...]
    residual_rms: float
    condition: float
    n_samples: int


def _oscillation_verdict(t: np.ndarray, y: np.ndarray, floor: float,
                         n_periods: int = 20):
    """Classify the tail of a response: sustained / decaying / growing / none.

    Peaks of the mean-removed signal with prominence above `floor` are
    located (the floor screens out switching ripple and duty-quantization
    wobble); over the final n_periods peak intervals the amplitude trend
    is the ratio of the last to the first peak prominence.  Sustained
    means the ratio stays within [0.1, 10].  Returns
    (verdict, amplitude_ratio, period_estimate).
    """
    y = np.asarray(y, dtype=float)
    yc = y - y[y.size // 2:].mean()
    peaks, props = find_peaks(yc, prominence=floor)
    if peaks.size < n_periods + 1:
        return "no-oscillation", 0.0, 0.0
    peaks = peaks[-(n_periods + 1):]
    heights = props["prominences"][-(n_periods + 1):]
    ratio = heights[-1] / heights[0] if heights[0] > 0 else np.inf
    period = float(np.mean(np.diff(t[peaks])))
    if ratio < 0.1:
        return "decaying", float(ratio), period
    if ratio > 10.0:
        return "growing", float(ratio), period
    return "sustained", float(ratio), period


def find_ultimate_gain(plant, gain_grid, v_ref: float, n_periods: int = 20,
                       amplitude_floor: float = 0.02) -> UltimateGainResult:
    """Smallest grid gain whose proportional-only loop sustains oscillation.

    plant is a callable (gain, v_ref) -> TimeSeries with a "V_out"
    channel, simulating the closed loop under pure proportional control.
    Oscillations smaller than amplitude_floor * v_ref do not count (that
    screens out switching ripple).  The period tu is the mean peak
    spacing over the final n_periods oscillations at the winning gain.
    """
    gain_grid = [float(g) for g in gain_grid]
    if not gain_grid or any(g <= 0 for g in gain_grid):
        raise ValueError("gain_grid must be nonempty, positive")
    if any(b <= a for a, b in zip(gain_grid, gain_grid[1:])):
        raise ValueError("gain_grid must be strictly ascending")
    trace = []
    for gain in gain_grid:
        ts = plant(gain, v_ref)
        verdict, ratio, period = _oscillation_verdict(
            ts.time(), ts.channel("V_out"),
            floor=amplitude_floor * abs(v_ref), n_periods=n_periods)
        trace.append((gain, verdict, ratio))
        if verdict == "sustained":
            return UltimateGainResult(ku=gain, tu=period,
                                      gain_trace=tuple(trace))
    raise UltimateGainSearchError(
        f"no gain in [{gain_grid[0]}, {gain_grid[-1]}] sustained oscillation",
        trace=tuple(trace),
    )


def zn_gains(ku: float, tu: float, t_samp: float = 100e-6,
             sat_lo: float = 0.1, sat_hi: float = 0.9) -> ControllerGains:
    """Classic tuning rule: kp = 0.45 ku, KI = 0.54 ku / tu.

    The continuous integral gain is converted to the per-sample
    accumulator gain ki = KI * t_samp.
    """
    if not (ku > 0.0 and tu > 0.0):
        raise ValueError(f"ku and tu must be > 0, got {ku}, {tu}")
    kp = 0.45 * ku
    ki = 0.54 * ku / tu * t_samp
    return ControllerGains(kp=kp, ki=ki, kaw=None, t_samp=t_samp,
                           sat_lo=sat_lo, sat_hi=sat_hi)


def _lstsq(phi: np.ndarray, d: np.ndarray):
    """Least squares via SVD with a conditioning gate."""
    theta, _, rank, sv = np.linalg.lstsq(phi, d, rcond=None)
    if rank < phi.shape[1] or sv[0] <= 0 or sv[-1] / sv[0] < 1e-12:
        raise ConditioningError(
            f"regressor matrix rank-deficient: singular values {sv}"
        )
    residual = d - phi @ theta
    rms = float(np.sqrt(np.mean(residual ** 2)))
    return theta, rms, float(sv[0] / sv[-1])


def vrft_fit(d, e, t_samp: float = 100e-6, sat_lo: float = 0.1,
             sat_hi: float = 0.9, prefilter=None) -> FitResult:
    """Identify PI gains from recorded duty d and virtual error e.

    Solves min (1/N) sum (d - [e, accumulate(e)] theta)^2 by a stable
    factorization; theta = (kp, ki).  The optional prefilter is applied
    to both d and e before building the regressors (identity when None).
    """
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    if d.shape != e.shape:
        raise ExcitationError(f"misaligned channels: {d.shape} vs {e.shape}")
    if d.size < 3:
        raise ExcitationError(f"need at least 3 samples, got {d.size}")
    if prefilter is not None:
        d = np.asarray(prefilter(d), dtype=float)
        e = np.asarray(prefilter(e), dtype=float)
    phi = np.column_stack([e, accumulate(e)])
    theta, rms, cond = _lstsq(phi, d)
    gains = ControllerGains(kp=float(theta[0]), ki=float(theta[1]), kaw=None,
                            t_samp=t_samp, sat_lo=sat_lo, sat_hi=sat_hi)
    return FitResult(gains=gains, theta=tuple(float(v) for v in theta),
                     residual_rms=rms, condition=cond, n_samples=d.size)


def vrft_fit_aw(d, e, u_d, n_aw: int = 1, t_samp: float = 100e-6,
                sat_lo: float = 0.1, sat_hi: float = 0.9,
                prefilter=None) -> FitResult:
    """Identify PI + anti-windup gains from saturating training data.

    Extends the regressors with the summed lagged saturation excess
    sum_{j=1..n_aw} u_d(t-j), u_d = d - d_sat; theta = (kp, ki, -ki*kaw)
    so that kaw = -theta3/theta2 drops straight into the runtime law,
    which subtracts ki*kaw*u_d (back-calculation).  The training run
    must actually saturate (u_d not identically zero), otherwise the
    third column is void.
    """
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    u_d = np.asarray(u_d, dtype=float)
    if not (d.shape == e.shape == u_d.shape):
        raise ExcitationError(
            f"misaligned channels: {d.shape} / {e.shape} / {u_d.shape}")
    if n_aw < 1:
        raise ValueError("n_aw must be >= 1")
    if not np.any(u_d != 0.0):
        raise ExcitationError(
            "u_d is identically zero: the training experiment never hit "
            "saturation; re-run data collection with an excitation that "
            "drives the duty into its limits"
        )
    if prefilter is not None:
        d = np.asarray(prefilter(d), dtype=float)
        e = np.asarray(prefilter(e), dtype=float)
        u_d = np.asarray(prefilter(u_d), dtype=float)
    lagged = np.zeros(u_d.size)
    for j in range(1, n_aw + 1):
        lagged[j:] += u_d[:-j]
    phi = np.column_stack([e, accumulate(e), lagged])
    theta, rms, cond = _lstsq(phi, d)
    scale = max(abs(theta[0]), abs(theta[2]), 1e-30)
    if abs(theta[1]) < 1e-9 * scale:
        raise ConditioningError(
            f"integral gain estimate ~ 0 (theta = {theta}); "
            "kaw = theta3/theta2 is undefined"
        )
    gains = ControllerGains(kp=float(theta[0]), ki=float(theta[1]),
                            kaw=float(-theta[2] / theta[1]), n_aw=n_aw,
                            t_samp=t_samp, sat_lo=sat_lo, sat_hi=sat_hi)
    return FitResult(gains=gains, theta=tuple(float(v) for v in theta),
                     residual_rms=rms, condition=cond, n_samples=d.size)


def save_fit_report(path, fit: FitResult, provenance: dict | None = None) -> None:
    """Serialize a fit (gains + diagnostics + provenance) as key=value."""
    g = fit.gains
    entries = {
        "kp": g.kp,
        "ki": g.ki,
        "kaw": g.kaw if g.kaw is not None else "none",
        "n_aw": g.n_aw,
        "t_samp": g.t_samp,
        "sat_lo": g.sat_lo,
        "sat_hi": g.sat_hi,
        "residual_rms": fit.residual_rms,
        "condition": fit.condition,
        "n_samples": fit.n_samples,
    }
    if provenance:
        entries.update(provenance)
    write_report(path, entries)


def load_gains(path) -> ControllerGains:
    """Rebuild ControllerGains from a fit report file."""
    rep = read_report(path)
    kaw = None if rep.get("kaw", "none") == "none" else float(rep["kaw"])
    return ControllerGains(
        kp=float(rep["kp"]),
        ki=float(rep["ki"]),
        kaw=kaw,
        n_aw=int(rep.get("n_aw", 1)),
        t_samp=float(rep.get("t_samp", 100e-6)),
        sat_lo=float(rep.get("sat_lo", 0.1)),
        sat_hi=float(rep.get("sat_hi", 0.9)),
    )
