"""Multi-UAV coverage simulator with learned power allocation."""

from ._uavcov import (
    ConfigError,
    aggregate,
    data_rate,
    default_config,
    kmeans,
    los_probability,
    mean_received_power,
    run,
)

__all__ = [
    "ConfigError",
    "aggregate",
    "data_rate",
    "default_config",
    "kmeans",
    "los_probability",
    "mean_received_power",
    "run",
]
