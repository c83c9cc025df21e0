"""Discrete PI / PI-anti-windup control law and closed-loop simulation.

The controller runs at the sample time t_samp.  Its integrator is the
plain running sum of the error (current sample included), matching the
accumulator regressor the tuning code fits against, so identified gains
drop in without conversion.  The anti-windup term feeds the last n_aw
values of the saturation excess u_d = d - d_sat back into the output
through the gain ki*kaw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import BilinearModel
from .plant import (SimulationPlan, _check_finite, _normalized_matrices,
                    _resolve_x0, _rk4_const_block, _rk4_switched_block,
                    pwm_pattern)
from .timeseries import PiecewiseConstant, TimeSeries


class SignalError(ValueError):
    """Raised when the controller is fed a non-finite error sample."""


@dataclass(frozen=True)
class ControllerGains:
    """PI(+anti-windup) gains, sample time and actuator limits.

    ki is the per-sample accumulator gain (a continuous-time integral
    gain KI maps to ki = KI * t_samp).  kaw is None for plain PI.
    """

    kp: float
    ki: float
    kaw: float | None = None
    n_aw: int = 1
    t_samp: float = 100e-6
    sat_lo: float = 0.1
    sat_hi: float = 0.9

    def __post_init__(self):
        if not (0.0 <= self.sat_lo < self.sat_hi <= 1.0):
            raise ValueError(
                f"need 0 <= sat_lo < sat_hi <= 1, got [{self.sat_lo}, {self.sat_hi}]"
            )
        if self.kaw is not None and self.n_aw < 1:
            raise ValueError("n_aw must be >= 1 when anti-windup is enabled")
        if not self.t_samp > 0.0:
            raise ValueError("t_samp must be > 0")


@dataclass(frozen=True)
class ControllerState:
    """Integrator value plus the u_d memory the anti-windup term reads."""

    integrator: float = 0.0
    u_d_history: tuple[float, ...] = (0.0,)
    last_d: float = 0.0
    last_d_sat: float = 0.0

    @classmethod
    def initial(cls, g: ControllerGains) -> "ControllerState":
        n = g.n_aw if g.kaw is not None else 1
        return cls(integrator=0.0, u_d_history=(0.0,) * n,
                   last_d=0.0, last_d_sat=g.sat_lo)


def saturate(d: float, lo: float, hi: float) -> float:
    """Clamp a duty command to [lo, hi]."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    return min(max(d, lo), hi)


def controller_step(g: ControllerGains, st: ControllerState,
                    e: float) -> tuple[float, ControllerState]:
    """One controller update; returns (d_sat, next state).

    d = kp*e + ki*(integrator + e) - ki*kaw * sum of the last n_aw
    saturation excesses u_d = d - d_sat (back-calculation: a positive
    excess means the command overshot the actuator ceiling, so it is fed
    back with a minus to pull the command toward the feasible range).
    The new excess is pushed into the history afterwards.  With kaw
    absent, or on any trajectory that never saturates, this is the plain
    PI law.
    """
    if not math.isfinite(e):
        raise SignalError(f"non-finite error sample: {e}")
    integ = st.integrator + e
    d = g.kp * e + g.ki * integ
    if g.kaw is not None:
        d -= g.ki * g.kaw * sum(st.u_d_history)
    d_sat = saturate(d, g.sat_lo, g.sat_hi)
    u_d = d - d_sat
    history = (u_d,) + st.u_d_history[:-1]
    return d_sat, ControllerState(integrator=integ, u_d_history=history,
                                  last_d=d, last_d_sat=d_sat)


def closed_loop(model: BilinearModel, plan: SimulationPlan,
                gains: ControllerGains,
                v_ref: PiecewiseConstant | float) -> TimeSeries:
    """Simulate the controller against the plant, sample by sample.

    At each controller tick the delayed output measurement is compared
    against the reference, the controller publishes a new duty, and the
    plant integrates forward one sample period; the new duty takes
    effect after the communication delay (both delays rounded to the
    integrator grid).  Before the first measurement is available the
    output is held at sat_lo.  The result carries the plant states plus
    step-held d, d_sat, u_d and e channels.
    """
    p = model.params
    if plan.duty is not None:
        raise ValueError("closed_loop drives the duty itself; build the plan with duty=None")
    if abs(gains.t_samp - p.t_samp) > 1e-12:
        raise ValueError(
            f"gains sampled at {gains.t_samp} s but plant t_samp is {p.t_samp} s"
        )
    h = plan.step(model)
    n_sub = int(round(p.t_samp / h))
    n_ticks = int(round(plan.duration / p.t_samp))
    if n_ticks < 1:
        raise ValueError("duration shorter than one controller sample")
    n_steps = n_ticks * n_sub
    n_meas = int(round(p.tau_meas / h))
    n_comm = int(round(p.tau_comm / h))
    if n_comm >= n_sub:
        raise ValueError("communication delay must be below one sample period")

    vref = PiecewiseConstant.wrap(v_ref)
    vin = PiecewiseConstant.wrap(plan.v_in)
    dr = PiecewiseConstant.wrap(plan.delta_r)

    ka0, ka1, kb0, kb1 = _normalized_matrices(model)
    switched = plan.mode == "switched"
    if switched:
        pattern_cache: dict[float, np.ndarray] = {}

        def pattern(d: float) -> np.ndarray:
            pat = pattern_cache.get(d)
            if pat is None:
                pat = np.repeat(pwm_pattern(d, int(round(p.t_s / p.dt_pwm))),
                                int(round(p.dt_pwm / h)))
                pattern_cache[d] = pat
            return pat

        def block_stream(d: float, n: int) -> np.ndarray:
            pat = pattern(d)
            reps = -(-n // pat.size)
            return np.tile(pat, reps)[:n]

    out = np.empty((n_steps + 1, 6))
    out[0] = _resolve_x0(model, plan, gains.sat_lo)

    st = ControllerState.initial(gains)
    d_hold = gains.sat_lo         # duty applied before the first command lands
    # the delayed stream's prehistory continues the held duty's carrier pattern
    carry = block_stream(d_hold, n_sub)[n_sub - n_comm:] if switched else None

    d_log = np.empty(n_ticks)
    d_sat_log = np.empty(n_ticks)
    u_d_log = np.empty(n_ticks)
    e_log = np.empty(n_ticks)

    for k in range(n_ticks):
        t_k = k * p.t_samp
        i0 = k * n_sub
        meas_idx = i0 - n_meas
        if meas_idx < 0:
            # measurement not yet available: hold the safe-low output
            d_new = gains.sat_lo
            e_k = 0.0
            d_log[k] = gains.sat_lo
            u_d_log[k] = 0.0
        else:
            e_k = vref.at(t_k) - out[meas_idx, 5]
            d_new, st = controller_step(gains, st, e_k)
            d_log[k] = st.last_d
            u_d_log[k] = st.last_d - st.last_d_sat
        d_sat_log[k] = d_new
        e_log[k] = e_k

        w = np.array([vin.at(t_k), dr.at(t_k)])
        if switched:
            s_block = np.empty(n_sub, dtype=np.uint8)
            s_block[:n_comm] = carry
            tail = block_stream(d_new, n_sub)
            s_block[n_comm:] = tail[: n_sub - n_comm]
            carry = tail[n_sub - n_comm:]
            c0 = kb0 @ w
            c1 = (kb0 + kb1) @ w
            _rk4_switched_block(ka0, ka0 + ka1, c0, c1, s_block, h, out, i0)
        else:
            for d_seg, a, n in ((d_hold, i0, n_comm),
                                (d_new, i0 + n_comm, n_sub - n_comm)):
                if n == 0:
                    continue
                md = ka0 + d_seg * ka1
                cd = (kb0 + d_seg * kb1) @ w
                _rk4_const_block(md, cd, h, out, a, n)
        d_hold = d_new

    _check_finite(out, h)

    def expand(tick_values: np.ndarray) -> np.ndarray:
        per_step = np.repeat(tick_values, n_sub)
        return np.append(per_step, per_step[-1])

    channels = {name: out[:, i] for i, name in enumerate(model.state_labels)}
    channels["V_out"] = out[:, 5]
    channels["d"] = expand(d_log)
    channels["d_sat"] = expand(d_sat_log)
    channels["u_d"] = expand(u_d_log)
    channels["e"] = expand(e_log)
    ts = TimeSeries(t0=0.0, dt=h, channels=channels)
    return ts.decimate(plan.record_every)
