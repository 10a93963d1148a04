"""Evaluation metrics for one slot's completed schedule.

Five quantities: makespan, QPU utilization, non-local gate density
(normalized pairwise temporal overlap), per-job execution-latency
performance (ELP) with its geometric mean (SELP), and fairness
(one minus the ELP spread).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedulers import Schedule


class EmptyScheduleError(ValueError):
    """Metrics over an empty schedule are undefined."""


@dataclass(frozen=True)
class MetricsReport:
    makespan_ns: int
    qpu_utilization: float
    nonlocal_gate_density: float
    elp: tuple[float, ...]
    selp: float
    fairness: float
    t_overlap_ns: int
    t_max_ns: int


def makespan(schedule: Schedule) -> int:
    """Latest finish minus earliest start, in ns."""
    if not schedule.placements:
        raise EmptyScheduleError("makespan of an empty schedule is undefined")
    return schedule.makespan_ns()


def qpu_utilization(schedule: Schedule, n_qpu: int) -> float:
    """Busy node-time over total node-time: sum(duration * nodes) / (M * n)."""
    if not schedule.placements:
        raise EmptyScheduleError("utilization of an empty schedule is undefined")
    if n_qpu < 1:
        raise ValueError(f"n_qpu must be >= 1, got {n_qpu}")
    busy = sum(p.duration_ns * len(p.assigned_nodes) for p in schedule.placements)
    return busy / (makespan(schedule) * n_qpu)


def overlap_terms(schedule: Schedule) -> tuple[int, int]:
    """Pairwise overlap time and its ceiling (sum of pairwise duration sums)."""
    ps = schedule.placements
    t_overlap = 0
    t_max = 0
    for i in range(len(ps)):
        for j in range(i + 1, len(ps)):
            t_overlap += max(
                0, min(ps[i].finish_ns, ps[j].finish_ns) - max(ps[i].start_ns, ps[j].start_ns)
            )
            t_max += ps[i].duration_ns + ps[j].duration_ns
    return t_overlap, t_max


def nonlocal_gate_density(schedule: Schedule) -> float:
    """Fraction of potential execution overlap actually realized.

    Single-placement schedules have no pairs and report 0 (no entanglement
    contention).
    """
    if not schedule.placements:
        raise EmptyScheduleError("gate density of an empty schedule is undefined")
    t_overlap, t_max = overlap_terms(schedule)
    if t_max == 0:
        return 0.0
    return t_overlap / t_max


def elp_selp_fairness(
    schedule: Schedule, slot_arrival_ns: int = 0
) -> tuple[tuple[float, ...], float, float]:
    """Per-job execution/latency ratio, its geometric mean, and fairness.

    Latency is finish time minus the slot arrival instant (all jobs of a
    slot arrive together), so waiting time is start minus slot start.
    Fairness is one minus the population standard deviation of the ratios.
    """
    if not schedule.placements:
        raise EmptyScheduleError("latency metrics of an empty schedule are undefined")
    elp = []
    for p in schedule.placements:
        latency = p.finish_ns - slot_arrival_ns
        if latency <= 0:
            raise ValueError(f"job {p.job_id} has non-positive latency {latency}")
        elp.append(p.duration_ns / latency)
    arr = np.asarray(elp)
    selp = float(np.exp(np.mean(np.log(arr))))
    fairness = 1.0 - float(np.std(arr))
    return tuple(elp), selp, fairness


def compute_report(schedule: Schedule, n_qpu: int, slot_arrival_ns: int = 0) -> MetricsReport:
    """All five metrics for one schedule."""
    elp, selp, fairness = elp_selp_fairness(schedule, slot_arrival_ns)
    t_overlap, t_max = overlap_terms(schedule)
    return MetricsReport(
        makespan_ns=makespan(schedule),
        qpu_utilization=qpu_utilization(schedule, n_qpu),
        nonlocal_gate_density=(t_overlap / t_max) if t_max else 0.0,
        elp=elp,
        selp=selp,
        fairness=fairness,
        t_overlap_ns=t_overlap,
        t_max_ns=t_max,
    )
