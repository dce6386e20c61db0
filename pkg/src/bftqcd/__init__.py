"""Byzantine-tolerant distributed quickest change detection with CUSUM detectors."""

from .adversary import (AttackerSpec, Honest, ImmediateAlarm, LinearDrift, Silent, WorstCase,
                        apply_attack, worst_case_mode)
from .cusum import (ConfigurationError, CusumState, StoppingRecord, check_stop,
                    continuous_cusum_step, discrete_cusum_step, run_to_stop)
from .experiment import (ExperimentConfig, MetricEstimate, delay_ratio_report, emit_outputs,
                         load_config, run_point, run_sweep)
from .fusion import Centralized, FusionRule, GroupWise, KthAlarm, fuse, kth_order_statistic
from .signal_models import (NEVER, ContinuousModel, DiscreteModel, GaussianDensity,
                            kl_divergence, next_continuous_increment, next_discrete_observation)
from .simulate import Scenario, simulate, simulate_trial

__version__ = "0.1.0"

__all__ = [
    "AttackerSpec", "Honest", "ImmediateAlarm", "LinearDrift", "Silent", "WorstCase",
    "apply_attack", "worst_case_mode",
    "ConfigurationError", "CusumState", "StoppingRecord", "check_stop",
    "continuous_cusum_step", "discrete_cusum_step", "run_to_stop",
    "ExperimentConfig", "MetricEstimate", "delay_ratio_report", "emit_outputs", "load_config",
    "run_point", "run_sweep",
    "Centralized", "FusionRule", "GroupWise", "KthAlarm", "fuse", "kth_order_statistic",
    "NEVER", "ContinuousModel", "DiscreteModel", "GaussianDensity", "kl_divergence",
    "next_continuous_increment", "next_discrete_observation",
    "Scenario", "simulate", "simulate_trial",
]
