"""Averaged bilinear state-space model of the two-leg buck converter.

The converter is the voltage-mode two-leg buck feeding a droop bus load:
each leg is a switch + inductor + RC snubber cap, joined to the output
bus through a droop resistor; the bus carries the output capacitor and a
variable load resistance.  Applying KVL/KCL in both switch states and
averaging over a switching period yields a model that is bilinear in the
duty cycle d:

    K x' = (A0 + d A1) x + (B0 + d B1) w,      y = C x

with state x = [I_L1, I_L2, V_C1, V_C2, V_C_IN, V_C_out], input
w = [V_IN, delta_R] (supply voltage and an additive load-current
disturbance on the output node), and y the output-capacitor voltage.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STATE_LABELS = ("I_L1", "I_L2", "V_C1", "V_C2", "V_C_IN", "V_C_out")
INPUT_LABELS = ("V_IN", "delta_R")


class ParameterError(ValueError):
    """Raised when a circuit parameter falls outside its physical domain."""


class SingularModelError(RuntimeError):
    """Raised when the equilibrium system matrix is numerically singular."""


@dataclass(frozen=True)
class CircuitParameters:
    """Physical constants of the converter (SI units).

    Defaults are the desk-scale converter this project targets.  All
    resistances, inductances and capacitances must be strictly positive;
    the timing constants must satisfy dt_pwm <= t_s <= t_samp.
    """

    r_var_nominal: float = 2.8     # nominal load resistance [ohm]
    l1: float = 33e-6              # leg inductances [H]
    l2: float = 33e-6
    c1: float = 47e-6              # leg capacitances [F]
    c2: float = 47e-6
    r1: float = 1.0                # droop resistors leg -> bus [ohm]
    r2: float = 1.0
    v_in_nominal: float = 40.0     # supply voltage [V]
    c_in: float = 120e-6           # input capacitance [F]
    r_c: float = 0.1               # input capacitor ESR [ohm]
    c_out: float = 240e-6          # output capacitance [F]
    r_in: float = 0.1              # supply internal resistance [ohm]
    r_l1: float = 0.02             # inductor series resistances [ohm]
    r_l2: float = 0.02
    r_c1: float = 0.4              # leg capacitor ESRs [ohm]
    r_c2: float = 0.4
    r_mos_on: float = 0.02         # switch on-resistance [ohm]
    tau_meas: float = 0.2e-6       # output measurement delay [s]
    tau_comm: float = 2.5e-6       # duty command communication delay [s]
    t_s: float = 5e-6              # carrier switching period [s]
    t_pwm: float = 100e-6          # duty command update period [s]
    dt_pwm: float = 0.1e-6         # PWM comparator time resolution [s]
    t_samp: float = 100e-6         # controller sample time [s]

    def __post_init__(self):
        positive = (
            "r_var_nominal", "l1", "l2", "c1", "c2", "r1", "r2", "c_in",
            "r_c", "c_out", "r_in", "r_l1", "r_l2", "r_c1", "r_c2",
            "r_mos_on", "t_s", "t_pwm", "dt_pwm", "t_samp",
        )
        for name in positive:
            if not getattr(self, name) > 0.0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.tau_meas < 0.0 or self.tau_comm < 0.0:
            raise ParameterError("delays must be >= 0")
        if not (self.dt_pwm <= self.t_s <= self.t_samp):
            raise ParameterError(
                f"need dt_pwm <= t_s <= t_samp, got "
                f"{self.dt_pwm} / {self.t_s} / {self.t_samp}"
            )


def parallel(ra: float, rb: float) -> float:
    """Parallel combination ra*rb/(ra+rb) of two positive resistances."""
    if not (ra > 0.0 and rb > 0.0):
        raise ParameterError(f"parallel() needs positive resistances, got {ra}, {rb}")
    return ra * rb / (ra + rb)


@dataclass(frozen=True)
class BilinearModel:
    """Matrices of the averaged model, ready for simulation.

    k_mat is the diagonal mass matrix diag(L1, L2, C1, C2, C_IN, C_out);
    the dynamics follow K x' = (A0 + d A1) x + (B0 + d B1) w.  The source
    parameters are kept alongside the matrices because the simulators
    need the timing constants (t_samp, t_s, dt_pwm, delays).
    """

    k_mat: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    c_row: np.ndarray
    params: CircuitParameters
    state_labels: tuple[str, ...] = STATE_LABELS
    input_labels: tuple[str, ...] = INPUT_LABELS

    def __post_init__(self):
        for name in ("k_mat", "a0", "a1", "b0", "b1", "c_row"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    def system_matrix(self, d: float) -> np.ndarray:
        """A0 + d*A1."""
        return self.a0 + d * self.a1

    def input_matrix(self, d: float) -> np.ndarray:
        """B0 + d*B1."""
        return self.b0 + d * self.b1


def build_model(p: CircuitParameters) -> BilinearModel:
    """Assemble the averaged bilinear model from circuit parameters.

    Leg equations (i = 1, 2), with R_on,i = r_li + r_mos_on and the leg
    output node eliminated through the local resistive divider:

        L_i I_Li' = -(R_on,i + r_ci || r_i) I_Li - r_i/(r_ci+r_i) V_Ci
                    - r_ci/(r_ci+r_i) V_out
                    + d [ -(r_c||r_in)(I_L1+I_L2) + r_in/(r_c+r_in) V_C_IN
                          + r_c/(r_c+r_in) V_IN ]

    Leg capacitor and output bus rows follow from KCL at the leg node and
    the bus node; the input capacitor row from KCL at the supply node,
    where the switched current d*(I_L1+I_L2) is drawn.  delta_R enters as
    an additive current on the output node (B0[5,1] = 1).
    """
    k_mat = np.diag([p.l1, p.l2, p.c1, p.c2, p.c_in, p.c_out]).astype(float)

    ron1 = p.r_l1 + p.r_mos_on
    ron2 = p.r_l2 + p.r_mos_on
    s1 = p.r_c1 + p.r1
    s2 = p.r_c2 + p.r2
    sin = p.r_c + p.r_in

    a0 = np.array([
        [-(ron1 + parallel(p.r_c1, p.r1)), 0.0, -p.r1 / s1, 0.0, 0.0, -p.r_c1 / s1],
        [0.0, -(ron2 + parallel(p.r2, p.r_c2)), 0.0, -p.r2 / s2, 0.0, -p.r_c2 / s2],
        [p.r1 / s1, 0.0, -1.0 / s1, 0.0, 0.0, 1.0 / s1],
        [0.0, p.r2 / s2, 0.0, -1.0 / s2, 0.0, 1.0 / s2],
        [0.0, 0.0, 0.0, 0.0, -1.0 / sin, 0.0],
        [p.r_c1 / s1, p.r_c2 / s2, 1.0 / s1, 1.0 / s2, 0.0,
         -(1.0 / s1 + 1.0 / s2 + 1.0 / p.r_var_nominal)],
    ])

    rpar = parallel(p.r_c, p.r_in)
    a1 = np.array([
        [-rpar, -rpar, 0.0, 0.0, p.r_in / sin, 0.0],
        [-rpar, -rpar, 0.0, 0.0, p.r_in / sin, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [-p.r_in / sin, -p.r_in / sin, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ])

    b0 = np.zeros((6, 2))
    b0[4, 0] = 1.0 / sin
    b0[5, 1] = 1.0

    b1 = np.zeros((6, 2))
    b1[0, 0] = p.r_c / sin
    b1[1, 0] = p.r_c / sin

    c_row = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]])

    return BilinearModel(k_mat=k_mat, a0=a0, a1=a1, b0=b0, b1=b1,
                         c_row=c_row, params=p)


def equilibrium(m: BilinearModel, d: float, w) -> np.ndarray:
    """Steady state of the averaged model at fixed duty d and input w.

    Solves (A0 + d A1) x = -(B0 + d B1) w.  Raises SingularModelError,
    reporting a condition estimate, when the system matrix is singular
    to machine precision.
    """
    w = np.asarray(w, dtype=float)
    a = m.system_matrix(d)
    rhs = -m.input_matrix(d) @ w
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularModelError(
            f"system matrix singular at d={d}: condition estimate {cond:.3e}"
        )
    return np.linalg.solve(a, rhs)


_PARAM_FIELDS = {f.name for f in dataclasses.fields(CircuitParameters)}


def load_parameters(path) -> CircuitParameters:
    """Read circuit parameters from a flat key=value text file.

    One ``name = value`` pair per line (SI units); ``#`` starts a comment;
    blank lines are ignored.  Unknown keys raise ParameterError; keys not
    present keep their defaults.
    """
    overrides: dict[str, float] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PARAM_FIELDS:
            raise ParameterError(f"{path}:{lineno}: unknown parameter {key!r}")
        if key in overrides:
            raise ParameterError(f"{path}:{lineno}: duplicate parameter {key!r}")
        try:
            overrides[key] = float(value.strip())
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return CircuitParameters(**overrides)
