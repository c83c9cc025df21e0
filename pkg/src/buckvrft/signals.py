"""Excitation signals and the discrete-time filtering behind the tuning step.

The tuning method needs: a first-order target model discretized with a
zero-order hold, the inverse of that filter (to manufacture the virtual
reference from recorded output data), the virtual tracking error, and a
running-sum accumulator that serves as the integral regressor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


class SignalDomainError(ValueError):
    """Raised when a signal specification leaves its valid domain."""


class ConditioningError(RuntimeError):
    """Raised when a filter inversion or fit is numerically degenerate."""


@dataclass(frozen=True)
class ReferenceModel:
    """First-order closed-loop target 1/(1 + s*tau), ZOH-discretized.

    The recursion ``y(k) = a_d y(k-1) + b_d r(k-1)`` with
    a_d = exp(-t_samp/tau) and b_d = 1 - a_d has unit DC gain by
    construction.
    """

    tau: float
    t_samp: float
    a_d: float
    b_d: float

    def filter(self, r: np.ndarray, y0: float = 0.0) -> np.ndarray:
        """Run the forward recursion on a reference signal.

        Returns y with y[0] = y0 and y[k] = a_d y[k-1] + b_d r[k-1].
        """
        r = np.asarray(r, dtype=float)
        y = np.empty(r.size)
        y[0] = y0
        for k in range(1, r.size):
            y[k] = self.a_d * y[k - 1] + self.b_d * r[k - 1]
        return y


def discretize_first_order(tau: float, t_samp: float) -> ReferenceModel:
    """ZOH discretization of 1/(1 + s*tau) at sample time t_samp."""
    if not (tau > 0.0 and t_samp > 0.0):
        raise SignalDomainError(f"tau and t_samp must be > 0, got {tau}, {t_samp}")
    a_d = float(np.exp(-t_samp / tau))
    return ReferenceModel(tau=tau, t_samp=t_samp, a_d=a_d, b_d=1.0 - a_d)


@dataclass(frozen=True)
class ChirpSpec:
    """Linear-frequency sine sweep for open-loop duty excitation."""

    f_start: float
    f_end: float
    duration: float
    amplitude: float
    offset: float

    def __post_init__(self):
        if not (self.f_start > 0.0 and self.f_end > 0.0 and self.duration > 0.0):
            raise SignalDomainError("chirp frequencies and duration must be > 0")
        if self.offset - self.amplitude < 0.0 or self.offset + self.amplitude > 1.0:
            raise SignalDomainError(
                f"chirp range [{self.offset - self.amplitude}, "
                f"{self.offset + self.amplitude}] leaves the valid duty range [0, 1]"
            )


def chirp(spec: ChirpSpec, dt: float) -> TimeSeries:
    """Sample offset + A*sin(2*pi*(f0 t + (f1-f0) t^2 / (2 T))) on [0, T].

    The instantaneous frequency sweeps linearly from f_start to f_end
    over the duration; the endpoint sample is included.
    """
    if not dt > 0.0:
        raise SignalDomainError(f"dt must be > 0, got {dt}")
    n = int(round(spec.duration / dt)) + 1
    t = dt * np.arange(n)
    phase = 2.0 * np.pi * (
        spec.f_start * t
        + (spec.f_end - spec.f_start) * t * t / (2.0 * spec.duration)
    )
    d = spec.offset + spec.amplitude * np.sin(phase)
    return TimeSeries(t0=0.0, dt=dt, channels={"d": d})


def virtual_reference(y: np.ndarray, m: ReferenceModel) -> np.ndarray:
    """Invert the ZOH recursion: the reference that would have produced y.

    r[k] = (y[k+1] - a_d y[k]) / b_d for k = 0..N-2.  The final reference
    sample is undefined (it would need y[N]) and is dropped, so the result
    has length N-1.  Feeding the result back through `ReferenceModel.filter`
    with y0 = y[0] reproduces y[1:].
    """
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise SignalDomainError("need at least 2 output samples to invert")
    if abs(m.b_d) < 1e-12:
        raise ConditioningError(
            f"reference model too slow to invert: b_d = {m.b_d:.3e}"
        )
    return (y[1:] - m.a_d * y[:-1]) / m.b_d


def virtual_error(y: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Virtual tracking error e = r - y on aligned sample grids."""
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    if y.shape != r.shape:
        raise SignalDomainError(
            f"misaligned channels: y has shape {y.shape}, r has {r.shape}"
        )
    return r - y


def accumulate(e: np.ndarray) -> np.ndarray:
    """Running sum s[k] = e[0] + ... + e[k]; the integral regressor.

    This is the discrete accumulator z/(z-1) applied to e.  The runtime
    controller integrator uses the same convention (current sample
    included), so gains identified against this regressor transfer
    unchanged.
    """
    e = np.asarray(e, dtype=float)
    if e.size == 0:
        raise SignalDomainError("cannot accumulate an empty channel")
    return np.cumsum(e)
