from .config import (
    ConfigError,
    ExperimentSpec,
    TaskSpec,
    apply_override,
    build_spec,
    config_hash,
    default_config,
    load_config,
    merge_config,
)
from .experiments import (
    NetworkBundle,
    build_network,
    build_task,
    compare_cellular,
    run_experiment,
    sweep,
    verify_moments,
)

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "TaskSpec",
    "apply_override",
    "build_spec",
    "config_hash",
    "default_config",
    "load_config",
    "merge_config",
    "NetworkBundle",
    "build_network",
    "build_task",
    "compare_cellular",
    "run_experiment",
    "sweep",
    "verify_moments",
]
