"""Two-leg buck converter models and data-driven controller tuning."""

from .circuit import (BilinearModel, CircuitParameters, ParameterError,
                      SingularModelError, build_model, equilibrium,
                      load_parameters, parallel)
from .metrics import PerformanceReport, compute_metrics
from .plant import (IntegrationError, SimulationPlan, apply_noise,
                    integrate_averaged, integrate_switched, pwm_generate)
from .runtime import (ControllerGains, ControllerState, closed_loop,
                      controller_step, saturate)
from .signals import (ChirpSpec, ConditioningError, ReferenceModel,
                      SignalDomainError, accumulate, chirp,
                      discretize_first_order, virtual_error,
                      virtual_reference)
from .timeseries import PiecewiseConstant, TimeSeries, from_csv, to_csv
from .tuning import (ExcitationError, FitResult, UltimateGainResult,
                     UltimateGainSearchError, find_ultimate_gain, load_gains,
                     save_fit_report, vrft_fit, vrft_fit_aw, zn_gains)

__all__ = [
    "BilinearModel", "ChirpSpec", "CircuitParameters", "ConditioningError",
    "ControllerGains", "ControllerState", "ExcitationError", "FitResult",
    "IntegrationError", "ParameterError", "PerformanceReport",
    "PiecewiseConstant", "ReferenceModel", "SignalDomainError",
    "SimulationPlan", "SingularModelError", "TimeSeries",
    "UltimateGainResult", "UltimateGainSearchError", "accumulate",
    "apply_noise", "build_model", "chirp", "closed_loop", "compute_metrics",
    "controller_step", "discretize_first_order", "equilibrium", "from_csv",
    "find_ultimate_gain", "integrate_averaged", "integrate_switched",
    "load_gains", "load_parameters", "parallel", "pwm_generate",
    "saturate", "save_fit_report", "to_csv", "virtual_error",
    "virtual_reference", "vrft_fit", "vrft_fit_aw", "zn_gains",
]

__version__ = "0.1.0"
