"""Converter simulation: averaged ODE form and switched PWM form.

Both forms integrate the same bilinear dynamics with a fixed-step
4th-order Runge-Kutta scheme; the switched form replaces the continuous
duty d(t) by the binary PWM comparator output s(t) in {0, 1} and models
the command-application and measurement delays.  Fixed stepping keeps
runs bit-reproducible; the hot per-step loops are numba-compiled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .circuit import BilinearModel, equilibrium
from .signals import SignalDomainError
from .timeseries import PiecewiseConstant, TimeSeries


class IntegrationError(RuntimeError):
    """Raised when the state diverges; carries the failure time."""

    def __init__(self, message: str, t_fail: float):
        super().__init__(message)
        self.t_fail = t_fail


@dataclass(frozen=True)
class SimulationPlan:
    """Everything one run needs besides the model itself.

    duty may be a constant, a TimeSeries holding the command samples
    (zero-order held at its own sample time), or None when a controller
    closes the loop.  initial_state is a 6-vector, "zero", or
    "equilibrium" (steady state at the initial duty and inputs).
    """

    duration: float
    mode: str = "averaged"                  # "averaged" | "switched"
    integrator_step: float | None = None    # default: t_samp/100 or dt_pwm
    duty: float | TimeSeries | None = 0.5
    initial_state: np.ndarray | str = "zero"
    v_in: PiecewiseConstant | float = 40.0
    delta_r: PiecewiseConstant | float = 0.0
    noise_amplitude: float = 0.0
    rng_seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.mode not in ("averaged", "switched"):
            raise ValueError(f"mode must be 'averaged' or 'switched', got {self.mode!r}")
        if not self.duration > 0.0:
            raise ValueError("duration must be > 0")
        if self.noise_amplitude < 0.0:
            raise ValueError("noise_amplitude must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def step(self, model: BilinearModel) -> float:
        """Integrator step: explicit, or the mode default."""
        p = model.params
        if self.integrator_step is not None:
            h = float(self.integrator_step)
        else:
            h = p.t_samp / 100.0 if self.mode == "averaged" else p.dt_pwm
        if self.mode == "switched" and h > p.dt_pwm * (1 + 1e-9):
            raise ValueError(
                f"switched mode needs integrator_step <= dt_pwm "
                f"({h} > {p.dt_pwm})"
            )
        n_sub = p.t_samp / h
        if abs(n_sub - round(n_sub)) > 1e-9 * n_sub:
            raise ValueError(
                f"integrator_step {h} must divide t_samp {p.t_samp} evenly"
            )
        return h


@njit(cache=True)
def _rk4_const_block(m, c, h, out, i0, n):
    """n RK4 steps of x' = m x + c, reading out[i0] and filling out[i0+1..i0+n]."""
    for j in range(i0, i0 + n):
        x = out[j]
        k1 = m @ x + c
        k2 = m @ (x + 0.5 * h * k1) + c
        k3 = m @ (x + 0.5 * h * k2) + c
        k4 = m @ (x + h * k3) + c
        out[j + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _rk4_switched_block(m0, m1, c0, c1, s, h, out, i0):
    """RK4 steps selecting (m1, c1) where s is set, else (m0, c0)."""
    for jj in range(s.size):
        j = i0 + jj
        x = out[j]
        if s[jj]:
            m = m1
            c = c1
        else:
            m = m0
            c = c0
        k1 = m @ x + c
        k2 = m @ (x + 0.5 * h * k1) + c
        k3 = m @ (x + 0.5 * h * k2) + c
        k4 = m @ (x + h * k3) + c
        out[j + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _normalized_matrices(model: BilinearModel):
    """K^-1-normalized matrices (ka0, ka1, kb0, kb1)."""
    kinv = 1.0 / np.diag(model.k_mat)
    return (
        kinv[:, None] * model.a0,
        kinv[:, None] * model.a1,
        kinv[:, None] * model.b0,
        kinv[:, None] * model.b1,
    )


def _resolve_x0(model: BilinearModel, plan: SimulationPlan, d0: float) -> np.ndarray:
    init = plan.initial_state
    if isinstance(init, str):
        if init == "zero":
            return np.zeros(6)
        if init == "equilibrium":
            w0 = np.array([
                PiecewiseConstant.wrap(plan.v_in).at(0.0),
                PiecewiseConstant.wrap(plan.delta_r).at(0.0),
            ])
            return equilibrium(model, d0, w0)
        raise ValueError(f"unknown initial_state {init!r}")
    x0 = np.asarray(init, dtype=float)
    if x0.shape != (6,):
        raise ValueError(f"initial_state must be a 6-vector, got shape {x0.shape}")
    return x0.copy()


def _check_finite(out: np.ndarray, h: float) -> None:
    finite = np.isfinite(out).all(axis=1)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise IntegrationError(
            f"state diverged at t = {idx * h:.6e} s", t_fail=idx * h
        )


def _duty_per_step(plan: SimulationPlan, model: BilinearModel,
                   h: float, n_steps: int) -> np.ndarray:
    """Duty command for each integrator step (hold at the command rate)."""
    if plan.duty is None:
        raise ValueError("plan has no duty source; use closed_loop instead")
    if isinstance(plan.duty, TimeSeries):
        ts = plan.duty
        d_cmd = ts.channel("d") if "d" in ts.channels else ts.channels[ts.names[0]]
        t_steps = h * np.arange(n_steps)
        idx = np.minimum((np.floor(t_steps / ts.dt + 1e-9)).astype(int),
                         d_cmd.size - 1)
        d = d_cmd[idx]
    else:
        d = np.full(n_steps, float(plan.duty))
    if d.size and (d.min() < 0.0 or d.max() > 1.0):
        raise SignalDomainError(
            f"duty must stay in [0, 1], got range [{d.min()}, {d.max()}]"
        )
    return d


def _w_per_step(plan: SimulationPlan, h: float, n_steps: int):
    vin = PiecewiseConstant.wrap(plan.v_in)
    dr = PiecewiseConstant.wrap(plan.delta_r)
    t_steps = h * np.arange(n_steps)
    return vin.sample(t_steps), dr.sample(t_steps)


def _segment_bounds(*per_step: np.ndarray) -> list[tuple[int, int]]:
    """Maximal index runs over which every per-step signal is constant."""
    n = per_step[0].size
    change = np.zeros(n, dtype=bool)
    for sig in per_step:
        change[1:] |= sig[1:] != sig[:-1]
    starts = np.flatnonzero(change)
    bounds = np.concatenate(([0], starts, [n]))
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def integrate_averaged(m: BilinearModel, plan: SimulationPlan) -> TimeSeries:
    """Fixed-step RK4 solution of the averaged model.

    The duty command is zero-order held at its own sample rate; output
    holds all six states, a "V_out" alias, and the applied duty "d".
    """
    if plan.mode != "averaged":
        raise ValueError(f"plan.mode is {plan.mode!r}, expected 'averaged'")
    h = plan.step(m)
    n_steps = int(round(plan.duration / h))
    if n_steps < 1:
        raise ValueError("duration shorter than one integrator step")
    d = _duty_per_step(plan, m, h, n_steps)
    vin, dr = _w_per_step(plan, h, n_steps)

    ka0, ka1, kb0, kb1 = _normalized_matrices(m)
    out = np.empty((n_steps + 1, 6))
    out[0] = _resolve_x0(m, plan, d[0])

    for a, b in _segment_bounds(d, vin, dr):
        md = ka0 + d[a] * ka1
        cd = (kb0 + d[a] * kb1) @ np.array([vin[a], dr[a]])
        _rk4_const_block(md, cd, h, out, a, b - a)
    _check_finite(out, h)

    channels = {name: out[:, i] for i, name in enumerate(m.state_labels)}
    channels["V_out"] = out[:, 5]
    channels["d"] = np.append(d, d[-1])
    ts = TimeSeries(t0=0.0, dt=h, channels=channels)
    return ts.decimate(plan.record_every)


def pwm_pattern(d: float, ticks_per_period: int) -> np.ndarray:
    """One carrier period of the comparator output: on for round(d*n) ticks."""
    if not (0.0 <= d <= 1.0):
        raise SignalDomainError(f"duty must be in [0, 1], got {d}")
    on = int(round(d * ticks_per_period))
    pattern = np.zeros(ticks_per_period, dtype=np.uint8)
    pattern[:on] = 1
    return pattern


def pwm_generate(duty_samples: TimeSeries, t_s: float, dt_pwm: float,
                 interleave: bool = False) -> TimeSeries:
    """Binary switch waveform from a duty command stream.

    Per carrier period the switch is on for round(d * t_s / dt_pwm)
    resolution ticks, where d is the zero-order-held command at the
    period start.  Both legs share one carrier by default; with
    interleave=True the second leg's carrier is offset by half a period.
    """
    tpp = t_s / dt_pwm
    if abs(tpp - round(tpp)) > 1e-9:
        raise ValueError(f"t_s {t_s} must be an integer multiple of dt_pwm {dt_pwm}")
    tpp = int(round(tpp))
    d_cmd = duty_samples.channel("d")
    if d_cmd.min() < 0.0 or d_cmd.max() > 1.0:
        raise SignalDomainError(
            f"duty must stay in [0, 1], got range [{d_cmd.min()}, {d_cmd.max()}]"
        )
    duration = duty_samples.dt * d_cmd.size
    n_periods = int(np.ceil(duration / t_s - 1e-9))
    n_ticks = n_periods * tpp

    def carrier(offset_ticks: int) -> np.ndarray:
        s = np.empty(n_ticks, dtype=np.uint8)
        for p in range(-1, n_periods + 1):
            start = p * tpp + offset_ticks
            if start >= n_ticks or start + tpp <= 0:
                continue
            t_start = max(start, 0) * dt_pwm
            k = min(int(t_start / duty_samples.dt + 1e-9), d_cmd.size - 1)
            on = int(round(d_cmd[k] * tpp))
            lo = max(start, 0)
            hi = min(start + tpp, n_ticks)
            rel = np.arange(lo, hi) - start
            s[lo:hi] = (rel < on).astype(np.uint8)
        return s

    channels = {"s_leg1": carrier(0)}
    channels["s_leg2"] = carrier(tpp // 2) if interleave else channels["s_leg1"]
    return TimeSeries(t0=duty_samples.t0, dt=dt_pwm, channels=channels)


def _delay_shift(s: np.ndarray, n_delay: int, period: int) -> np.ndarray:
    """Shift a switch stream right by n_delay ticks.

    The gap at the start is filled by continuing the stream's first
    carrier period backwards in time, so a delayed run is an exact
    shift of the undelayed one.
    """
    if n_delay == 0:
        return s
    pre_idx = (np.arange(n_delay) - n_delay) % period
    return np.concatenate([s[pre_idx], s[:-n_delay]])


def integrate_switched(m: BilinearModel, plan: SimulationPlan) -> TimeSeries:
    """Fixed-step RK4 solution with the duty replaced by the PWM waveform.

    The duty command is held at t_samp, converted to the binary carrier
    waveform, and applied after the communication delay; the output
    carries all states plus the instantaneous "V_out", its one-period
    trailing mean "V_out_avg", and the measurement-delayed "V_out_meas"
    (delays rounded to the integrator grid).
    """
    if plan.mode != "switched":
        raise ValueError(f"plan.mode is {plan.mode!r}, expected 'switched'")
    p = m.params
    h = plan.step(m)
    refine = int(round(p.dt_pwm / h))
    n_steps = int(round(plan.duration / h))
    if n_steps < 1:
        raise ValueError("duration shorter than one integrator step")

    d = _duty_per_step(plan, m, h, n_steps)
    vin, dr = _w_per_step(plan, h, n_steps)

    # undelayed comparator output at integrator resolution
    cmd_ts = TimeSeries(t0=0.0, dt=p.t_samp,
                        channels={"d": d[:: int(round(p.t_samp / h))]})
    s = pwm_generate(cmd_ts, p.t_s, p.dt_pwm).channel("s_leg1").astype(np.uint8)
    s = np.repeat(s, refine)[:n_steps]
    ticks_per_period = int(round(p.t_s / h))
    n_comm = int(round(p.tau_comm / h))
    s = _delay_shift(s, n_comm, ticks_per_period)

    ka0, ka1, kb0, kb1 = _normalized_matrices(m)
    m0 = ka0
    m1 = ka0 + ka1
    out = np.empty((n_steps + 1, 6))
    out[0] = _resolve_x0(m, plan, d[0])

    for a, b in _segment_bounds(vin, dr):
        w = np.array([vin[a], dr[a]])
        c0 = kb0 @ w
        c1 = (kb0 + kb1) @ w
        _rk4_switched_block(m0, m1, c0, c1, s[a:b], h, out, a)
    _check_finite(out, h)

    v_out = out[:, 5]
    n_meas = int(round(p.tau_meas / h))
    v_meas = np.concatenate([np.full(n_meas, v_out[0]), v_out[:v_out.size - n_meas]])
    win = ticks_per_period
    csum = np.concatenate([[0.0], np.cumsum(v_out)])
    start = np.maximum(np.arange(v_out.size + 1) - win, 0)[1:]
    counts = np.arange(1, v_out.size + 1) - start
    v_avg = (csum[1:] - csum[start]) / counts

    channels = {name: out[:, i] for i, name in enumerate(m.state_labels)}
    channels["V_out"] = v_out
    channels["V_out_avg"] = v_avg
    channels["V_out_meas"] = v_meas
    channels["d"] = np.append(d, d[-1])
    channels["s"] = np.append(s, s[-1]).astype(float)
    ts = TimeSeries(t0=0.0, dt=h, channels=channels)
    return ts.decimate(plan.record_every)


def apply_noise(ts: TimeSeries, channel: str, amplitude: float,
                seed: int) -> TimeSeries:
    """Add i.i.d. uniform noise on [-amplitude, +amplitude] to one channel."""
    if amplitude < 0.0:
        raise SignalDomainError("noise amplitude must be >= 0")
    values = ts.channel(channel)
    if amplitude == 0.0:
        return ts
    rng = np.random.default_rng(seed)
    eta = rng.uniform(-amplitude, amplitude, size=values.size)
    return ts.with_channel(channel, values + eta)
