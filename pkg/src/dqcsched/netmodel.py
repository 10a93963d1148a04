"""Heterogeneous entanglement-link model and fully connected QPU networks.

A link between two QPUs is described by its physical parameters
(:class:`LinkParams`), from which the per-attempt entanglement success
probability and the expected time to produce one entangled pair (the
"state delay") are derived. Networks are fully connected: every unordered
node pair carries one :class:`LinkProfile`.

Derived probabilities and delays are floating point; schedule timestamps
elsewhere in the package are integer nanoseconds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

QUALITY_CLASSES = ("bad", "medium", "good")


@dataclass(frozen=True)
class LinkParams:
    """Physical parameters of one QPU-to-QPU entanglement link.

    Efficiencies are unitless in [0, 1]; ``alpha_db_per_km`` is the fiber
    attenuation factor, ``distance_km`` the link length, ``cycle_time_ns``
    the duration of a single entanglement generation attempt and
    ``fidelity`` the quality of the generated pair.
    """

    eta_ion: float
    eta_fc: float
    eta_det: float
    eta_penalty: float
    alpha_db_per_km: float
    distance_km: float
    cycle_time_ns: int
    fidelity: float

    def __post_init__(self) -> None:
        for name in ("eta_ion", "eta_fc", "eta_det", "eta_penalty"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.distance_km < 0:
            raise ValueError(f"distance_km must be >= 0, got {self.distance_km}")
        if self.cycle_time_ns <= 0:
            raise ValueError(f"cycle_time_ns must be > 0, got {self.cycle_time_ns}")
        if not 0.0 < self.fidelity <= 1.0:
            raise ValueError(f"fidelity must lie in (0, 1], got {self.fidelity}")


# Trapped-ion link presets at 0.1 km, one per quality class.
LINK_PRESETS: dict[str, LinkParams] = {
    "bad": LinkParams(
        eta_ion=0.87, eta_fc=0.5, eta_det=0.75, eta_penalty=0.12,
        alpha_db_per_km=0.2, distance_km=0.1, cycle_time_ns=1_800_000,
        fidelity=0.88,
    ),
    "medium": LinkParams(
        eta_ion=0.87, eta_fc=0.5, eta_det=0.75, eta_penalty=0.20,
        alpha_db_per_km=0.2, distance_km=0.1, cycle_time_ns=1_000_000,
        fidelity=0.95,
    ),
    "good": LinkParams(
        eta_ion=0.87, eta_fc=0.7, eta_det=0.90, eta_penalty=0.20,
        alpha_db_per_km=0.2, distance_km=0.1, cycle_time_ns=200_000,
        fidelity=0.95,
    ),
}


def entanglement_success_probability(params: LinkParams) -> float:
    """Probability that a single entanglement generation attempt succeeds.

    Combines photon emission/collection, frequency conversion and detection
    efficiencies (squared: both halves of the pair), a detection-window
    penalty, and fiber attenuation to the midpoint station. The result lies
    in (0, 0.5].
    """
    efficiency = params.eta_ion * params.eta_fc * params.eta_det
    attenuation = 10.0 ** (-(params.alpha_db_per_km / 10.0) * (params.distance_km / 2.0))
    return 0.5 * params.eta_penalty * efficiency * efficiency * attenuation


def state_delay(cycle_time_ns: float, success_prob: float) -> float:
    """Expected time (ns) to successfully generate one entangled state.

    Deterministic model: one attempt per cycle, so the expected delay is
    ``cycle_time_ns / success_prob``.
    """
    if cycle_time_ns <= 0:
        raise ValueError(f"cycle_time_ns must be > 0, got {cycle_time_ns}")
    if success_prob <= 0.0:
        raise ValueError(f"success_prob must be > 0, got {success_prob}")
    return cycle_time_ns / success_prob


@dataclass(frozen=True)
class LinkProfile:
    """One link's parameters plus its derived success probability and delay."""

    params: LinkParams
    success_prob: float
    state_delay_ns: float
    quality: str | None = None

    @classmethod
    def from_params(cls, params: LinkParams, quality: str | None = None) -> "LinkProfile":
        p_s = entanglement_success_probability(params)
        return cls(
            params=params,
            success_prob=p_s,
            state_delay_ns=state_delay(params.cycle_time_ns, p_s),
            quality=quality,
        )


def _pair(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise ValueError(f"self-link ({a}, {b}) not allowed")
    return (a, b) if a < b else (b, a)


@dataclass
class Network:
    """Fully connected QPU network with per-pair link profiles.

    ``availability_ns`` tracks each node's next-free time on the global
    simulation clock; it only ever moves forward. Everything else is
    immutable after construction.
    """

    n_nodes: int
    qpu_capacity: int
    links: dict[tuple[int, int], LinkProfile]
    comm_qubits_per_node: int = 1
    availability_ns: list[int] = field(default_factory=list)
    mean_state_delay_ns: float = 0.0

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise ValueError(f"n_nodes must be >= 1, got {self.n_nodes}")
        expected = {p for p in itertools.combinations(range(self.n_nodes), 2)}
        if set(self.links) != expected:
            raise ValueError("links must cover exactly all unordered node pairs")
        if not self.availability_ns:
            self.availability_ns = [0] * self.n_nodes
        if self.links and self.mean_state_delay_ns == 0.0:
            self.mean_state_delay_ns = float(
                np.mean([lp.state_delay_ns for lp in self.links.values()])
            )

    def link(self, a: int, b: int) -> LinkProfile:
        return self.links[_pair(a, b)]

    def link_weight(self, a: int, b: int) -> float:
        """Weight used by node selection: the pair's state delay."""
        return self.links[_pair(a, b)].state_delay_ns

    def advance_availability(self, node: int, t_ns: int) -> None:
        if t_ns < self.availability_ns[node]:
            raise ValueError(
                f"availability of node {node} may not move backwards "
                f"({self.availability_ns[node]} -> {t_ns})"
            )
        self.availability_ns[node] = t_ns


def build_network(
    n_nodes: int,
    qpu_capacity: int,
    quality_mix: dict[str, float],
    seed: int,
    comm_qubits_per_node: int = 1,
) -> Network:
    """Build a fully connected network with seeded per-pair quality sampling.

    ``quality_mix`` maps preset names (``bad``/``medium``/``good``) to
    proportions summing to 1. Each unordered pair draws its class
    independently; the same seed always yields the same network.
    """
    if n_nodes < 2:
        raise ValueError(f"build_network requires n_nodes >= 2, got {n_nodes}")
    if not quality_mix:
        raise ValueError("quality_mix must not be empty")
    for name in quality_mix:
        if name not in LINK_PRESETS:
            raise ValueError(f"unknown link quality class: {name!r}")
    classes = [c for c in QUALITY_CLASSES if c in quality_mix]
    probs = np.array([quality_mix[c] for c in classes], dtype=float)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"quality_mix proportions must sum to 1, got {probs.sum()}")
    probs = probs / probs.sum()

    rng = np.random.Generator(np.random.PCG64(seed))
    profiles = {c: LinkProfile.from_params(LINK_PRESETS[c], quality=c) for c in classes}
    links: dict[tuple[int, int], LinkProfile] = {}
    for a, b in itertools.combinations(range(n_nodes), 2):
        cls_idx = int(rng.choice(len(classes), p=probs))
        links[(a, b)] = profiles[classes[cls_idx]]
    return Network(
        n_nodes=n_nodes,
        qpu_capacity=qpu_capacity,
        links=links,
        comm_qubits_per_node=comm_qubits_per_node,
    )


def homogeneous_network(n_nodes: int, qpu_capacity: int, quality: str = "good") -> Network:
    """All-identical-links network; handy for isolating ordering effects."""
    return build_network(n_nodes, qpu_capacity, {quality: 1.0}, seed=0)
