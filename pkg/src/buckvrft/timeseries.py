"""Uniformly sampled, named multi-channel signal records and CSV exchange.

TimeSeries is the currency every module trades in: simulators produce
them, signal generators produce them, the tuning code consumes channels
out of them.  Channels are immutable float64 vectors of equal length on
a shared uniform time base.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ChannelError(KeyError):
    """Raised on lookup of a channel that does not exist."""


@dataclass(frozen=True)
class TimeSeries:
    t0: float
    dt: float
    channels: dict[str, np.ndarray]

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.channels:
            raise ValueError("TimeSeries needs at least one channel")
        clean: dict[str, np.ndarray] = {}
        n = None
        for name, values in self.channels.items():
            arr = np.array(values, dtype=float)
            if arr.ndim != 1 or arr.size < 1:
                raise ValueError(f"channel {name!r} must be a nonempty 1-d vector")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise ValueError(
                    f"channel {name!r} has length {arr.size}, expected {n}"
                )
            arr.setflags(write=False)
            clean[name] = arr
        object.__setattr__(self, "channels", clean)

    @property
    def n(self) -> int:
        return next(iter(self.channels.values())).size

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.channels)

    def time(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise ChannelError(
                f"no channel {name!r}; have {sorted(self.channels)}"
            ) from None

    def with_channel(self, name: str, values) -> "TimeSeries":
        """Copy of this series with one channel added or replaced."""
        chans = dict(self.channels)
        chans[name] = np.asarray(values, dtype=float)
        return TimeSeries(self.t0, self.dt, chans)

    def decimate(self, step: int) -> "TimeSeries":
        """Keep every step-th sample (starting at the first)."""
        if step < 1:
            raise ValueError("decimation step must be >= 1")
        if step == 1:
            return self
        chans = {k: v[::step] for k, v in self.channels.items()}
        return TimeSeries(self.t0, self.dt * step, chans)


def to_csv(ts: TimeSeries, path, meta: dict | None = None) -> None:
    """Write a TimeSeries as CSV: ``t`` column first, one row per sample.

    Floats are written with %.17g so a read-back is bit-exact.  Optional
    meta key=value pairs go into leading ``#`` comment lines.
    """
    path = Path(path)
    cols = [ts.time()] + [ts.channels[k] for k in ts.names]
    lines = []
    if meta:
        for k, v in meta.items():
            lines.append(f"# {k}={v}")
    lines.append(",".join(["t", *ts.names]))
    for row in zip(*cols):
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def from_csv(path) -> tuple[TimeSeries, dict]:
    """Read a TimeSeries written by to_csv; returns (series, meta)."""
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                k, _, v = body.partition("=")
                meta[k.strip()] = v.strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            if not header or header[0] != "t":
                raise ValueError(f"{path}: expected leading 't' column, got {header}")
            continue
        rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows)
    t = data[:, 0]
    if t.size < 2:
        dt = 1.0
    else:
        dt = (t[-1] - t[0]) / (t.size - 1)
    channels = {name: data[:, j + 1] for j, name in enumerate(header[1:])}
    return TimeSeries(t0=t[0], dt=dt, channels=channels), meta


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step schedule: value(t) = last step value at or before t.

    The first breakpoint must be at or before the simulation start; a
    plain number is promoted to a single-step schedule by `wrap`.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be equal-length and nonempty")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls(times=(0.0,), values=(float(value),))

    @classmethod
    def wrap(cls, value) -> "PiecewiseConstant":
        if isinstance(value, cls):
            return value
        return cls.constant(float(value))

    def at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(idx, 0)]

    def sample(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.asarray(self.values, dtype=float)[np.maximum(idx, 0)]
