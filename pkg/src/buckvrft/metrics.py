"""Closed-loop transient metrics: undershoot, settling, saturation time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


@dataclass(frozen=True)
class PerformanceReport:
    """Transient quality numbers for one closed-loop run.

    settling_time_5pct is measured from the window start and is None
    when the output never enters the band for good.  undershoot_pct is
    the post-peak dip below the reference (see compute_metrics).
    """

    controller_name: str
    undershoot_pct: float
    settling_time_5pct: float | None
    steady_state_error: float
    saturation_duration: float

    def __post_init__(self):
        if self.undershoot_pct < 0.0:
            raise ValueError("undershoot_pct must be >= 0")
        if self.settling_time_5pct is not None and not self.settling_time_5pct >= 0.0:
            raise ValueError("settling_time_5pct must be >= 0 when present")


def compute_metrics(ts: TimeSeries, v_ref: float, window: tuple[float, float],
                    channel: str = "V_out", controller_name: str = "",
                    sat_limits: tuple[float, float] | None = None) -> PerformanceReport:
    """Transient metrics of one response over a time window.

    * undershoot_pct: dip below v_ref after the first upward crossing of
      v_ref, as a percentage of v_ref (when the output never crosses,
      the global minimum over the window is used instead);
    * settling_time_5pct: time from the window start until |y - v_ref|
      stays within 5% of v_ref for the rest of the window (None when
      that never happens);
    * steady_state_error: mean of (y - v_ref) over the last fifth of the
      window;
    * saturation_duration: total time the d_sat channel (when present)
      rests at either limit.
    """
    if not v_ref > 0.0:
        raise ValueError("v_ref must be > 0")
    t = ts.time()
    t_a, t_b = window
    if t_a < t[0] - 1e-12 or t_b > t[-1] + 1e-12 or t_b <= t_a:
        raise ValueError(f"window {window} not inside series [{t[0]}, {t[-1]}]")
    mask = (t >= t_a) & (t <= t_b)
    y = ts.channel(channel)[mask]
    tw = t[mask]

    above = y >= v_ref
    crossing = np.flatnonzero(above[1:] & ~above[:-1])
    first_up = crossing[0] + 1 if crossing.size else (0 if above[0] else None)
    if first_up is not None and first_up < y.size - 1:
        dip = y[first_up:].min()
    else:
        dip = y.min()
    undershoot_pct = max(0.0, (v_ref - dip) / v_ref * 100.0)

    inside = np.abs(y - v_ref) <= 0.05 * v_ref
    settling: float | None = None
    if inside[-1]:
        bad = np.flatnonzero(~inside)
        k_settle = 0 if bad.size == 0 else bad[-1] + 1
        settling = float(tw[k_settle] - t_a)

    tail = y[tw >= t_b - 0.2 * (t_b - t_a)]
    sse = float(np.mean(tail - v_ref))

    sat_time = 0.0
    if "d_sat" in ts.channels:
        lo, hi = sat_limits if sat_limits is not None else (0.1, 0.9)
        d_sat = ts.channel("d_sat")[mask]
        railed = np.isclose(d_sat, lo) | np.isclose(d_sat, hi)
        sat_time = float(np.count_nonzero(railed) * ts.dt)

    return PerformanceReport(
        controller_name=controller_name,
        undershoot_pct=float(undershoot_pct),
        settling_time_5pct=settling,
        steady_state_error=sse,
        saturation_duration=sat_time,
    )
