"""Slot schedulers: FIFO, LIST, Resource-Prioritize, EPR (with optional
node selection), and ASAP.

All schedulers consume the node-blind execution estimate for their
decisions, but the emitted placements record actual durations computed
from the links of the chosen nodes. Except for ASAP, scheduling proceeds
in synchronized stages: every job of a stage starts together and the next
stage begins once the whole stage has finished. ASAP releases nodes
asynchronously as jobs complete.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import execmodel
from .execmodel import ExecModelParams
from .netmodel import Network

SCHEDULER_NAMES = ("fifo", "list", "resource", "epr", "epr-ns", "asap")


class SchedulingError(Exception):
    """A job cannot be scheduled on the given network."""

    def __init__(self, job_id, message: str):
        super().__init__(f"job {job_id}: {message}")
        self.job_id = job_id


@dataclass(frozen=True)
class Placement:
    """One job's slice of the schedule."""

    job_id: int
    assigned_nodes: tuple[int, ...]
    start_ns: int
    finish_ns: int
    stage_index: int

    @property
    def duration_ns(self) -> int:
        return self.finish_ns - self.start_ns


@dataclass
class Schedule:
    """Scheduler output: placements grouped into stages."""

    placements: list[Placement] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.placements)

    def stages(self) -> list[list[Placement]]:
        if not self.placements:
            return []
        n_stages = max(p.stage_index for p in self.placements) + 1
        grouped: list[list[Placement]] = [[] for _ in range(n_stages)]
        for p in self.placements:
            grouped[p.stage_index].append(p)
        return grouped

    def makespan_ns(self) -> int:
        if not self.placements:
            return 0
        return max(p.finish_ns for p in self.placements) - min(
            p.start_ns for p in self.placements
        )


def _validate_queue(queue, network: Network) -> None:
    for job in queue:
        if job.required_qpus < 1:
            raise SchedulingError(job.id, "requires fewer than one QPU")
        if job.required_qpus > network.n_nodes:
            raise SchedulingError(
                job.id,
                f"requires {job.required_qpus} QPUs but the network has "
                f"{network.n_nodes}",
            )


def _place(job, nodes, start_ns: int, stage: int, network: Network,
           params: ExecModelParams) -> Placement:
    nodes = tuple(sorted(nodes))
    duration = execmodel.estimate_execution_time(job, nodes, network, params)
    return Placement(
        job_id=job.id,
        assigned_nodes=nodes,
        start_ns=start_ns,
        finish_ns=start_ns + duration,
        stage_index=stage,
    )


def fifo_schedule(queue, network: Network, exec_params: ExecModelParams) -> Schedule:
    """Strict arrival order; consecutive jobs share a stage while they fit.

    The stage closes at the first job that does not fit the remaining free
    nodes, and the next stage starts once every job of the current stage
    has finished.
    """
    _validate_queue(queue, network)
    placements: list[Placement] = []
    barrier = 0
    stage = 0
    i = 0
    while i < len(queue):
        free = list(range(network.n_nodes))
        stage_placements: list[Placement] = []
        while i < len(queue) and queue[i].required_qpus <= len(free):
            job = queue[i]
            nodes, free = free[: job.required_qpus], free[job.required_qpus:]
            stage_placements.append(_place(job, nodes, barrier, stage, network, exec_params))
            i += 1
        placements.extend(stage_placements)
        barrier = max(p.finish_ns for p in stage_placements)
        stage += 1
    return Schedule(placements)


def list_schedule(queue, network: Network, exec_params: ExecModelParams) -> Schedule:
    """FIFO ordering, but any later job that fits the free nodes joins the
    stage; the stage closes when no remaining job fits."""
    _validate_queue(queue, network)
    placements: list[Placement] = []
    remaining = list(queue)
    barrier = 0
    stage = 0
    while remaining:
        free = list(range(network.n_nodes))
        stage_placements: list[Placement] = []
        deferred = []
        for job in remaining:
            if job.required_qpus <= len(free):
                nodes, free = free[: job.required_qpus], free[job.required_qpus:]
                stage_placements.append(
                    _place(job, nodes, barrier, stage, network, exec_params)
                )
            else:
                deferred.append(job)
        remaining = deferred
        placements.extend(stage_placements)
        barrier = max(p.finish_ns for p in stage_placements)
        stage += 1
    return Schedule(placements)


def resource_prioritize_schedule(
    queue,
    network: Network,
    exec_params: ExecModelParams,
    enumeration_cap: int = 12,
) -> Schedule:
    """Each round runs the job subset with maximal total QPU demand.

    Ties are broken by smaller mean estimated time, then by the
    lexicographically smallest job-id set. Subsets are enumerated over the
    first ``enumeration_cap`` remaining jobs (arrival order), which bounds
    the exponential search.
    """
    if enumeration_cap < 1:
        raise ValueError(f"enumeration_cap must be >= 1, got {enumeration_cap}")
    _validate_queue(queue, network)
    placements: list[Placement] = []
    remaining = list(queue)
    barrier = 0
    stage = 0
    while remaining:
        pool = remaining[: enumeration_cap]
        m = len(pool)
        bits = (np.arange(1, 2 ** m)[:, None] >> np.arange(m)) & 1
        demand = bits @ np.array([j.required_qpus for j in pool])
        est_sum = bits @ np.array([j.est_exec_ns for j in pool], dtype=float)
        counts = bits.sum(axis=1)
        feasible = demand <= network.n_nodes
        util = np.where(feasible, demand, -1)
        best_util = util.max()
        mean_t = np.where(util == best_util, est_sum / counts, np.inf)
        best_mean = mean_t.min()
        candidates = np.nonzero(mean_t == best_mean)[0]
        best_ids = None
        best_mask = None
        for c in candidates:
            ids = tuple(sorted(pool[k].id for k in range(m) if bits[c, k]))
            if best_ids is None or ids < best_ids:
                best_ids = ids
                best_mask = c
        chosen_idx = [k for k in range(m) if bits[best_mask, k]]
        free = list(range(network.n_nodes))
        stage_placements = []
        for k in chosen_idx:
            job = pool[k]
            nodes, free = free[: job.required_qpus], free[job.required_qpus:]
            stage_placements.append(_place(job, nodes, barrier, stage, network, exec_params))
        placements.extend(stage_placements)
        barrier = max(p.finish_ns for p in stage_placements)
        stage += 1
        chosen_set = set(chosen_idx)
        remaining = [j for i, j in enumerate(remaining) if i not in chosen_set]
    return Schedule(placements)


def select_nodes(free_nodes, k: int, network: Network) -> tuple[int, ...]:
    """The k free nodes whose internal links have minimum total weight.

    Weight of a pair is its state delay. Ties resolve to the
    lexicographically smallest id set; k = 1 returns the lowest free id.
    """
    free_sorted = sorted(free_nodes)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(free_sorted) < k:
        raise ValueError(f"need {k} free nodes, only {len(free_sorted)} available")
    best: tuple[int, ...] | None = None
    best_weight = float("inf")
    for combo in itertools.combinations(free_sorted, k):
        weight = sum(
            network.link_weight(a, b) for a, b in itertools.combinations(combo, 2)
        )
        if weight < best_weight:
            best = combo
            best_weight = weight
    return best


def epr_schedule(
    queue,
    network: Network,
    exec_params: ExecModelParams,
    node_selection: bool = False,
    strict_order: bool = True,
) -> Schedule:
    """Jobs sorted ascending by entangled-pair demand, scheduled in rounds.

    Under ``strict_order`` (default) a round ends at the first job that
    does not fit the free nodes; otherwise that job is skipped and the scan
    continues. With ``node_selection`` each placed job picks the free node
    subset with the best internal links instead of the lowest ids.
    """
    _validate_queue(queue, network)
    remaining = sorted(queue, key=lambda j: (j.epr_pairs, j.est_exec_ns, j.id))
    placements: list[Placement] = []
    barrier = 0
    stage = 0
    while remaining:
        free = list(range(network.n_nodes))
        stage_placements: list[Placement] = []
        deferred: list = []
        for idx, job in enumerate(remaining):
            if job.required_qpus <= len(free):
                if node_selection:
                    nodes = select_nodes(free, job.required_qpus, network)
                else:
                    nodes = tuple(free[: job.required_qpus])
                free = [n for n in free if n not in nodes]
                stage_placements.append(
                    _place(job, nodes, barrier, stage, network, exec_params)
                )
            elif strict_order:
                deferred = remaining[idx:]
                break
            else:
                deferred.append(job)
        remaining = deferred
        placements.extend(stage_placements)
        barrier = max(p.finish_ns for p in stage_placements)
        stage += 1
    return Schedule(placements)


def asap_schedule(queue, network: Network, exec_params: ExecModelParams) -> Schedule:
    """Nodes are released asynchronously; freed nodes go to the first
    pending jobs (arrival order) that fit them.

    Each round starts at the earliest time when some remaining job fits the
    nodes free at that time.
    """
    _validate_queue(queue, network)
    placements: list[Placement] = []
    avail = [0] * network.n_nodes
    remaining = list(queue)
    stage = 0
    while remaining:
        for t in sorted(set(avail)):
            candidates = [n for n in range(network.n_nodes) if avail[n] <= t]
            used: set[int] = set()
            deferred: list = []
            placed_any = False
            for job in remaining:
                free = [n for n in candidates if n not in used]
                if job.required_qpus <= len(free):
                    nodes = tuple(free[: job.required_qpus])
                    p = _place(job, nodes, t, stage, network, exec_params)
                    placements.append(p)
                    for n in nodes:
                        avail[n] = p.finish_ns
                    used.update(nodes)
                    placed_any = True
                else:
                    deferred.append(job)
            if placed_any:
                remaining = deferred
                break
        stage += 1
    return Schedule(placements)


def get_scheduler(name: str):
    """Resolve a scheduler name to a callable of (queue, network, params)."""
    table = {
        "fifo": fifo_schedule,
        "list": list_schedule,
        "resource": resource_prioritize_schedule,
        "epr": epr_schedule,
        "epr-ns": lambda q, n, p: epr_schedule(q, n, p, node_selection=True),
        "asap": asap_schedule,
    }
    if name not in table:
        raise ValueError(f"unknown scheduler: {name!r}")
    return table[name]
