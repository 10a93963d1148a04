"""Job generation: circuit gate-count profiles, partitioning, slot arrivals.

Only gate counts and structure matter here; no quantum state is ever
simulated. A circuit profile materializes the ordered gate list of one of
five circuit families, a partitioner maps it onto contiguous qubit blocks
(one block per QPU) and counts the gates that straddle blocks, and the
slot generator draws Poisson-sized batches from a fixed catalog with an
optional bias toward jobs late in the catalog.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import execmodel
from .execmodel import ExecModelParams
from .netmodel import Network

CIRCUIT_KINDS = ("GHZ", "GraphState", "QAOA", "QFT", "VQE")

MIN_QUBITS = 2
MAX_QUBITS = 64


@dataclass(frozen=True)
class CircuitProfile:
    """Gate-count profile of one circuit: what scheduling needs, nothing more.

    ``two_qubit_gates`` is the ordered list of qubit pairs touched by
    two-qubit gates; ``local_depth`` is the circuit depth counting
    single-qubit layers as well.
    """

    kind: str
    n_qubits: int
    reps: int
    two_qubit_gates: tuple[tuple[int, int], ...]
    single_qubit_gates: int
    local_depth: int


def _ring_edges(n: int) -> list[tuple[int, int]]:
    if n == 2:
        return [(0, 1)]
    return [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]


def default_graph_edges(n: int) -> list[tuple[int, int]]:
    """Default graph-state edge set: a path with one long chord.

    The five-qubit default is the fixed experimental graph
    (0-1, 1-2, 2-3, 0-4); other sizes use a path 0..n-1 plus (0, n-1).
    """
    if n == 2:
        return [(0, 1)]
    if n == 5:
        return [(0, 1), (1, 2), (2, 3), (0, 4)]
    return [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]


def _depth_of(ops: list[tuple]) -> int:
    # Per-qubit layer counters; a gate lands one layer after its operands' last.
    layers: dict[int, int] = {}
    for op in ops:
        if len(op) == 1:
            (q,) = op
            layers[q] = layers.get(q, 0) + 1
        else:
            a, b = op
            d = max(layers.get(a, 0), layers.get(b, 0)) + 1
            layers[a] = d
            layers[b] = d
    return max(layers.values(), default=0)


def build_circuit_profile(
    kind: str,
    n_qubits: int,
    reps: int = 1,
    graph_edges: list[tuple[int, int]] | None = None,
) -> CircuitProfile:
    """Materialize the ordered gate list of one circuit family.

    GHZ: Hadamard on qubit 0, then a CNOT from qubit 0 to every other qubit.
    GraphState: Hadamard everywhere, one CZ per graph edge.
    QAOA: Hadamard everywhere, then per repetition a CNOT-Rz-CNOT block per
    MaxCut ring edge plus one mixer rotation per qubit.
    QFT: per qubit a Hadamard followed by controlled rotations onto every
    later qubit.
    VQE: per repetition two parameterized rotations per qubit followed by a
    nearest-neighbour CNOT chain.
    """
    if kind not in CIRCUIT_KINDS:
        raise ValueError(f"unknown circuit kind: {kind!r}")
    if not MIN_QUBITS <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must lie in [{MIN_QUBITS}, {MAX_QUBITS}], got {n_qubits}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")

    n = n_qubits
    ops: list[tuple] = []
    if kind == "GHZ":
        ops.append((0,))
        for q in range(1, n):
            ops.append((0, q))
    elif kind == "GraphState":
        edges = graph_edges if graph_edges is not None else default_graph_edges(n)
        _check_edges(edges, n)
        ops.extend((q,) for q in range(n))
        ops.extend(edges)
    elif kind == "QAOA":
        edges = graph_edges if graph_edges is not None else _ring_edges(n)
        _check_edges(edges, n)
        ops.extend((q,) for q in range(n))
        for _ in range(reps):
            for i, j in edges:
                ops.append((i, j))
                ops.append((j,))
                ops.append((i, j))
            ops.extend((q,) for q in range(n))
    elif kind == "QFT":
        for i in range(n):
            ops.append((i,))
            for j in range(i + 1, n):
                ops.append((i, j))
    else:  # VQE
        for _ in range(reps):
            for q in range(n):
                ops.append((q,))
                ops.append((q,))
            for q in range(n - 1):
                ops.append((q, q + 1))

    two_qubit = tuple(op for op in ops if len(op) == 2)
    singles = sum(1 for op in ops if len(op) == 1)
    return CircuitProfile(
        kind=kind,
        n_qubits=n,
        reps=reps if kind in ("QAOA", "VQE") else 1,
        two_qubit_gates=two_qubit,
        single_qubit_gates=singles,
        local_depth=_depth_of(ops),
    )


def _check_edges(edges, n: int) -> None:
    for i, j in edges:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"invalid edge ({i}, {j}) for {n} qubits")


@dataclass(frozen=True)
class JobDescriptor:
    """One schedulable job: resource needs plus the scheduler-visible estimate.

    ``cross_block_pairs`` lists, per cross-partition gate, the indices of the
    two qubit blocks it connects; the execution model maps these onto the
    links of an actual node assignment.
    """

    id: int
    required_qpus: int
    epr_pairs: int
    nonlocal_gates: int
    est_exec_ns: int
    profile: CircuitProfile
    cross_block_pairs: tuple[tuple[int, int], ...] = ()


def partition_job(
    profile: CircuitProfile,
    qpu_capacity: int,
    network: Network,
    exec_params: ExecModelParams,
    job_id: int = -1,
) -> JobDescriptor:
    """Cut a circuit into contiguous qubit blocks of ``qpu_capacity``.

    Block ``i`` holds qubits [i*capacity, (i+1)*capacity). Every two-qubit
    gate whose endpoints land in different blocks becomes a non-local gate
    consuming one entangled pair. The nominal execution estimate is
    attached so schedulers can rank the job before placement.
    """
    if qpu_capacity < 2:
        raise ValueError(f"qpu_capacity must be >= 2, got {qpu_capacity}")
    required = math.ceil(profile.n_qubits / qpu_capacity)
    cross = tuple(
        (min(a // qpu_capacity, b // qpu_capacity), max(a // qpu_capacity, b // qpu_capacity))
        for a, b in profile.two_qubit_gates
        if a // qpu_capacity != b // qpu_capacity
    )
    draft = JobDescriptor(
        id=job_id,
        required_qpus=required,
        epr_pairs=len(cross),
        nonlocal_gates=len(cross),
        est_exec_ns=0,
        profile=profile,
        cross_block_pairs=cross,
    )
    est = execmodel.estimate_execution_time_nominal(draft, network, exec_params)
    return dataclasses.replace(draft, est_exec_ns=est)


@dataclass
class WorkloadConfig:
    """Arrival process and job-mix settings for one simulation setting.

    ``catalog`` must be ordered ascending by non-local gate count; with
    ``bias_alpha`` > 0, selection weights grow with catalog position so
    heavier jobs become more likely. ``fixed_count`` overrides the Poisson
    draw with a constant batch size (used for the RL comparison).
    """

    catalog: tuple[JobDescriptor, ...]
    lam: float = 5.0
    bias_alpha: float = 0.0
    n_slots: int = 200
    fixed_count: int | None = None
    seed: int = 0
    qubit_range: tuple[int, int] = (5, 15)

    def __post_init__(self) -> None:
        if not self.catalog:
            raise ValueError("catalog must not be empty")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 <= self.bias_alpha <= 1.0:
            raise ValueError(f"bias_alpha must lie in [0, 1], got {self.bias_alpha}")
        gates = [j.nonlocal_gates for j in self.catalog]
        if any(a > b for a, b in zip(gates, gates[1:])):
            raise ValueError("catalog must be ordered ascending by nonlocal_gates")


def default_catalog(
    network: Network,
    exec_params: ExecModelParams,
    qubit_sizes: tuple[int, ...] = (5, 10, 15),
    reps: int = 1,
) -> tuple[JobDescriptor, ...]:
    """All five families at each size, sorted ascending by non-local gates."""
    jobs = [
        partition_job(build_circuit_profile(kind, n, reps), network.qpu_capacity,
                      network, exec_params)
        for kind in CIRCUIT_KINDS
        for n in qubit_sizes
    ]
    jobs.sort(key=lambda j: (j.nonlocal_gates, j.est_exec_ns, j.profile.kind,
                             j.profile.n_qubits))
    return tuple(dataclasses.replace(j, id=i) for i, j in enumerate(jobs))


def catalog_from_file(
    path: str,
    network: Network,
    exec_params: ExecModelParams,
) -> tuple[JobDescriptor, ...]:
    """Catalog override: one ``kind n_qubits reps`` triple per line.

    Commas and whitespace both separate fields; ``#`` starts a comment.
    The resulting catalog is sorted the same way as the default one.
    """
    entries: list[tuple[str, int, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.replace(",", " ").split()
            if len(fields) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected 'kind n_qubits reps', got {raw.strip()!r}"
                )
            kind, n_s, reps_s = fields
            try:
                entries.append((kind, int(n_s), int(reps_s)))
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: n_qubits and reps must be integers"
                ) from None
    if not entries:
        raise ValueError(f"{path}: catalog file lists no jobs")
    jobs = [
        partition_job(build_circuit_profile(kind, n, reps), network.qpu_capacity,
                      network, exec_params)
        for kind, n, reps in entries
    ]
    jobs.sort(key=lambda j: (j.nonlocal_gates, j.est_exec_ns, j.profile.kind,
                             j.profile.n_qubits))
    return tuple(dataclasses.replace(j, id=i) for i, j in enumerate(jobs))


def sample_arrival_count(lam: float, rng: np.random.Generator) -> int:
    """Number of jobs arriving in one slot, Poisson distributed."""
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    return int(rng.poisson(lam))


def selection_probabilities(n: int, bias_alpha: float) -> np.ndarray:
    """Sampling weight of catalog position i is i**alpha, normalized.

    alpha = 0 gives uniform selection; alpha = 1 linear weighting toward
    the end of the catalog.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= bias_alpha <= 1.0:
        raise ValueError(f"bias_alpha must lie in [0, 1], got {bias_alpha}")
    weights = np.arange(1, n + 1, dtype=float) ** bias_alpha
    return weights / weights.sum()


def generate_slot_jobs(
    config: WorkloadConfig,
    slot_index: int,
    rng: np.random.Generator,
) -> list[JobDescriptor]:
    """Draw one slot's job batch from the catalog.

    Batch size is Poisson(lam) unless ``fixed_count`` is set. Ids are fresh
    per slot (0..count-1); ``slot_index`` is accepted for caller bookkeeping
    and does not influence the draw.
    """
    del slot_index
    if config.fixed_count is not None:
        count = config.fixed_count
    else:
        count = sample_arrival_count(config.lam, rng)
    if count == 0:
        return []
    probs = selection_probabilities(len(config.catalog), config.bias_alpha)
    picks = rng.choice(len(config.catalog), size=count, p=probs)
    return [dataclasses.replace(config.catalog[i], id=k) for k, i in enumerate(picks)]
