"""Deadline-aware task placement for edge AI workloads, in a deterministic simulator."""

from .errors import ConfigError
from .experiment import DeviceConfig, ExperimentConfig, run_experiment
from .metrics import ExperimentResult, TaskRecord, summarize, sweep
from .profiles import (
    CalibrationError,
    DeviceProfile,
    builtin_profile,
    cold_start_penalty,
    load_profile,
    predict_process_time,
    predict_total_time,
)
from .schedulers import Decision, Task, decide_coordinator, decide_source
from .sim_core import EventLoop, NetworkLink
from .workload import PRESETS, WorkloadSpec, generate

__version__ = "0.1.0"
