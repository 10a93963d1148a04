"""Discrete-slot simulator and schedulers for distributed quantum computing
jobs over a fully connected, heterogeneous QPU network."""

from .execmodel import ExecModelParams, estimate_execution_time, estimate_execution_time_nominal
from .metrics import MetricsReport, compute_report
from .netmodel import (
    LINK_PRESETS,
    LinkParams,
    LinkProfile,
    Network,
    build_network,
    entanglement_success_probability,
    homogeneous_network,
    state_delay,
)
from .schedulers import (
    Placement,
    Schedule,
    SchedulingError,
    asap_schedule,
    epr_schedule,
    fifo_schedule,
    get_scheduler,
    list_schedule,
    resource_prioritize_schedule,
    select_nodes,
)
from .workload import (
    CircuitProfile,
    JobDescriptor,
    WorkloadConfig,
    build_circuit_profile,
    default_catalog,
    generate_slot_jobs,
    partition_job,
    sample_arrival_count,
    selection_probabilities,
)

__version__ = "0.1.0"
