"""Reinforcement-learning scheduler trained with proximal policy optimization.

The policy sees a fixed-size matrix of job features (required QPUs,
entangled-pair demand, non-local gate count, normalized time estimate) and
builds each stage by repeatedly sampling/arg-maxing a masked softmax over
the jobs that still fit the remaining node budget. Episodes are rewarded
with a normalized latency penalty plus an incentive for running low-EPR
jobs early; training uses the clipped surrogate objective with value and
entropy terms on a from-scratch network (:mod:`dqcsched.nn`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import execmodel, workload
from .execmodel import ExecModelParams
from .netmodel import Network
from .nn import Adam, Mlp, masked_softmax
from .schedulers import Placement, Schedule, SchedulingError, select_nodes

REWARD_VARIANTS = ("plain", "node_selection")
LATENCY_MODES = ("cumulative", "immediate")


@dataclass
class PpoConfig:
    """Hyperparameters of the RL scheduler.

    ``update_every`` counts buffered transitions between gradient updates;
    ``latency_mode`` picks how the stage waiting offset accumulates (the
    default sums all preceding stage maxima; ``immediate`` offsets by only
    the directly preceding stage).
    """

    j_max: int = 5
    n_features: int = 4
    clip_eps: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    minibatch: int = 64
    update_every: int = 1024
    epochs: int = 4
    reward_variant: str = "plain"
    alpha_reward: float = 1.0
    gamma_pressure: float = 1.0
    beta_positional: float = 1.0
    gae_lambda: float = 0.95
    discount: float = 0.99
    learning_rate: float = 3e-4
    hidden: tuple[int, ...] = (64, 64)
    latency_mode: str = "cumulative"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must lie in (0, 1), got {self.clip_eps}")
        if self.minibatch > self.update_every:
            raise ValueError("minibatch must not exceed update_every")
        if self.reward_variant not in REWARD_VARIANTS:
            raise ValueError(f"unknown reward variant: {self.reward_variant!r}")
        if self.latency_mode not in LATENCY_MODES:
            raise ValueError(f"unknown latency mode: {self.latency_mode!r}")
        for name in ("value_coef", "entropy_coef", "alpha_reward",
                     "gamma_pressure", "beta_positional"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class PpoState:
    """Fixed-size observation: one feature row per job, zero rows padded."""

    matrix: np.ndarray  # (j_max, 4): [n_j, e_j, g_j, t_hat]
    padding: np.ndarray  # (j_max,) bool, True where no job exists


@dataclass
class Transition:
    """One greedy pick and everything the update step needs about it."""

    obs: np.ndarray
    mask: np.ndarray
    action: int
    logp: float
    value: float
    reward: float = 0.0
    advantage: float = 0.0
    ret: float = 0.0


def encode_state(queue, j_max: int, time_scale: float) -> PpoState:
    """Queue to feature matrix; time estimates normalized by ``time_scale``."""
    if len(queue) > j_max:
        raise ValueError(f"queue of {len(queue)} jobs exceeds j_max={j_max}")
    if time_scale <= 0:
        raise ValueError(f"time_scale must be > 0, got {time_scale}")
    matrix = np.zeros((j_max, 4))
    padding = np.ones(j_max, dtype=bool)
    for row, job in enumerate(queue):
        matrix[row] = (
            job.required_qpus,
            job.epr_pairs,
            job.nonlocal_gates,
            job.est_exec_ns / time_scale,
        )
        padding[row] = False
    return PpoState(matrix=matrix, padding=padding)


def stage_latencies(
    stage_exec: list[list[float]], mode: str = "cumulative"
) -> tuple[list[float], float, float, float]:
    """Per-job latencies, their sum, the serial worst case, and the ratio.

    Each job's latency is its execution time plus a stage waiting offset.
    Under ``cumulative`` the offset is the sum of all preceding stage
    maxima; under ``immediate`` only the directly preceding stage's maximum
    counts. The worst case is the fully serialized descending ordering.
    """
    if mode not in LATENCY_MODES:
        raise ValueError(f"unknown latency mode: {mode!r}")
    if not stage_exec or any(not s for s in stage_exec):
        raise ValueError("stage_latencies requires non-empty stages")
    latencies: list[float] = []
    offset = 0.0
    prev_max = 0.0
    for stage in stage_exec:
        wait = offset if mode == "cumulative" else prev_max
        latencies.extend(e + wait for e in stage)
        prev_max = max(stage)
        offset += prev_max
    total = sum(latencies)
    all_exec = sorted((e for s in stage_exec for e in s), reverse=True)
    n = len(all_exec)
    worst = sum((n - k) * e for k, e in enumerate(all_exec))
    return latencies, total, worst, total / worst


def epr_reward(
    stages: list[list[tuple[float, float]]],
    variant: str = "plain",
    alpha: float = 1.0,
    gamma: float = 1.0,
    beta: float = 1.0,
    latency_mode: str = "cumulative",
) -> tuple[float, float]:
    """EPR-aware incentive and the combined episode reward.

    ``stages`` holds, per stage in intra-stage execution order, pairs of
    (entangled-pair demand d_i, execution time e_i). Each job contributes
    1/(d_i + gamma * D_prev) in the plain variant, with D_prev the
    previous stage's maximum demand, or 1/(beta * d_i * (o_i + 1) +
    gamma * D_prev) in the node-selection variant with o_i the intra-stage
    order. An otherwise-zero denominator is floored at 1. Returns
    (incentive, incentive - latency_ratio).
    """
    if variant not in REWARD_VARIANTS:
        raise ValueError(f"unknown reward variant: {variant!r}")
    if not stages or any(not s for s in stages):
        raise ValueError("epr_reward requires non-empty stages")
    total = 0.0
    count = 0
    d_prev = 0.0
    for stage in stages:
        for order, (demand, _exec) in enumerate(stage):
            if demand < 0:
                raise ValueError(f"negative EPR demand {demand}")
            if variant == "plain":
                denom = demand + gamma * d_prev
            else:
                denom = beta * demand * (order + 1) + gamma * d_prev
            if denom == 0.0:
                denom = 1.0
            total += 1.0 / denom
            count += 1
        d_prev = max(d for d, _ in stage)
    r_epr = alpha * total / count
    stage_exec = [[e for _, e in stage] for stage in stages]
    _, _, _, r_lat = stage_latencies(stage_exec, latency_mode)
    return r_epr, -r_lat + r_epr


def policy_loss_parts(
    logits: np.ndarray,
    masks: np.ndarray,
    actions: np.ndarray,
    logp_old: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
) -> tuple[float, np.ndarray, float, np.ndarray]:
    """Clipped-surrogate loss, mean entropy, and their logit gradients.

    Returns (policy_loss, d loss/d logits, entropy, d entropy/d logits)
    for one batch; gradients already include the 1/batch averaging.
    """
    n = logits.shape[0]
    probs = np.zeros_like(logits)
    for i in range(n):
        probs[i] = masked_softmax(logits[i], masks[i])
    idx = np.arange(n)
    logp_new = np.log(probs[idx, actions])
    ratio = np.exp(logp_new - logp_old)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    loss_pi = float(-np.minimum(unclipped, clipped).mean())

    active = unclipped <= clipped  # min() takes the unclipped branch
    dlogp = np.where(active, -advantages * ratio, 0.0) / n
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    dlogits_pi = dlogp[:, None] * (onehot - probs)

    safe_log = np.where(probs > 0.0, np.log(np.where(probs > 0.0, probs, 1.0)), 0.0)
    ent_rows = -(probs * safe_log).sum(axis=1)
    entropy = float(ent_rows.mean())
    dlogits_ent = -(probs * (safe_log + ent_rows[:, None])) / n
    dlogits_ent[~masks] = 0.0
    return loss_pi, dlogits_pi, entropy, dlogits_ent


def value_loss_parts(values: np.ndarray, returns: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error between value predictions and returns, plus grad."""
    err = values - returns
    return float((err ** 2).mean()), 2.0 * err / err.shape[0]


def compute_gae(transitions: list[Transition], discount: float, lam: float) -> None:
    """Fill advantages and returns over one episode, in place."""
    next_value = 0.0
    adv = 0.0
    for tr in reversed(transitions):
        delta = tr.reward + discount * next_value - tr.value
        adv = delta + discount * lam * adv
        tr.advantage = adv
        tr.ret = adv + tr.value
        next_value = tr.value


def ppo_update(
    buffer: list[Transition],
    policy: Mlp,
    value_net: Mlp,
    config: PpoConfig,
    policy_opt: Adam | None = None,
    value_opt: Adam | None = None,
    rng: np.random.Generator | None = None,
) -> list[tuple[float, float, float]]:
    """Minibatch gradient steps on the combined loss; clears the buffer.

    Returns the per-epoch means of (policy loss, value loss, entropy).
    """
    if not buffer:
        raise ValueError("ppo_update requires a non-empty buffer")
    if policy_opt is None:
        policy_opt = Adam(policy.parameters(), lr=config.learning_rate)
    if value_opt is None:
        value_opt = Adam(value_net.parameters(), lr=config.learning_rate)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(config.seed))

    obs = np.stack([tr.obs for tr in buffer])
    masks = np.stack([tr.mask for tr in buffer])
    actions = np.array([tr.action for tr in buffer])
    logp_old = np.array([tr.logp for tr in buffer])
    adv = np.array([tr.advantage for tr in buffer])
    rets = np.array([tr.ret for tr in buffer])
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    n = len(buffer)
    epoch_stats: list[tuple[float, float, float]] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        stats = []
        for lo in range(0, n, config.minibatch):
            mb = order[lo: lo + config.minibatch]
            logits, cache_p = policy.forward(obs[mb])
            loss_pi, d_pi, entropy, d_ent = policy_loss_parts(
                logits, masks[mb], actions[mb], logp_old[mb], adv[mb], config.clip_eps
            )
            dlogits = d_pi - config.entropy_coef * d_ent
            grads_p = policy.backward(cache_p, dlogits)
            policy_opt.step([g for pair in grads_p for g in pair])

            values, cache_v = value_net.forward(obs[mb])
            loss_v, d_v = value_loss_parts(values[:, 0], rets[mb])
            grads_v = value_net.backward(cache_v, (config.value_coef * d_v)[:, None])
            value_opt.step([g for pair in grads_v for g in pair])
            stats.append((loss_pi, loss_v, entropy))
        arr = np.array(stats)
        epoch_stats.append(tuple(arr.mean(axis=0)))
    buffer.clear()
    return epoch_stats


@dataclass
class TrainLogEntry:
    update_index: int
    mean_reward: float
    policy_loss: float
    value_loss: float
    entropy: float


class PpoAgent:
    """Policy + value networks with the scheduling rollout around them."""

    def __init__(
        self,
        config: PpoConfig,
        network: Network,
        exec_params: ExecModelParams,
        catalog: tuple,
        feature_scales: np.ndarray | None = None,
        time_scale: float | None = None,
    ):
        self.config = config
        self.network = network
        self.exec_params = exec_params
        self.catalog = catalog
        if time_scale is None:
            time_scale = float(max(j.est_exec_ns for j in catalog))
        self.time_scale = time_scale
        if feature_scales is None:
            feature_scales = np.array([
                max(max(j.required_qpus for j in catalog), 1),
                max(max(j.epr_pairs for j in catalog), 1),
                max(max(j.nonlocal_gates for j in catalog), 1),
                1.0,
            ], dtype=float)
        self.feature_scales = feature_scales

        ss = np.random.SeedSequence(config.seed)
        init_ss, act_ss, env_ss, upd_ss = ss.spawn(4)
        init_rng = np.random.Generator(np.random.PCG64(init_ss))
        self.action_rng = np.random.Generator(np.random.PCG64(act_ss))
        self.env_rng = np.random.Generator(np.random.PCG64(env_ss))
        self.update_rng = np.random.Generator(np.random.PCG64(upd_ss))

        in_dim = config.j_max * config.n_features
        self.policy = Mlp([in_dim, *config.hidden, config.j_max], init_rng)
        self.value_net = Mlp([in_dim, *config.hidden, 1], init_rng)
        self.policy_opt = Adam(self.policy.parameters(), lr=config.learning_rate)
        self.value_opt = Adam(self.value_net.parameters(), lr=config.learning_rate)

    # -- observation and action ------------------------------------------

    def encode(self, queue) -> PpoState:
        return encode_state(queue, self.config.j_max, self.time_scale)

    def _obs(self, state: PpoState, selected: np.ndarray) -> np.ndarray:
        scaled = state.matrix / self.feature_scales
        scaled = np.where(selected[:, None], 0.0, scaled)
        return scaled.ravel()

    def select_stage(
        self,
        state: PpoState,
        selected: np.ndarray,
        n_max: int,
        sample: bool = False,
    ) -> tuple[list[int], list[Transition]]:
        """Greedily fill one stage; mutates ``selected``.

        Each pick renormalizes the softmax over the not-yet-selected,
        non-padding jobs that still fit the remaining node budget, so every
        emitted stage respects the budget by construction.
        """
        n_vals = state.matrix[:, 0].astype(int)
        picks: list[int] = []
        transitions: list[Transition] = []
        cap = n_max
        while True:
            mask = ~state.padding & ~selected & (n_vals <= cap)
            if not mask.any():
                break
            obs = self._obs(state, selected)
            logits = self.policy(obs)[0]
            probs = masked_softmax(logits, mask)
            if sample:
                action = int(self.action_rng.choice(len(probs), p=probs))
            else:
                action = int(np.argmax(probs))
            value = float(self.value_net(obs)[0, 0])
            transitions.append(Transition(
                obs=obs, mask=mask, action=action,
                logp=float(np.log(probs[action])), value=value,
            ))
            picks.append(action)
            selected[action] = True
            cap -= n_vals[action]
        return picks, transitions

    def rollout(self, queue, sample: bool = False, n_max: int | None = None
                ) -> tuple[list[list[int]], list[Transition]]:
        """All stages for one queue; returns pick indices and transitions."""
        if n_max is None:
            n_max = self.network.n_nodes
        state = self.encode(queue)
        selected = state.padding.copy()
        stages: list[list[int]] = []
        transitions: list[Transition] = []
        while not selected.all():
            picks, trs = self.select_stage(state, selected, n_max, sample=sample)
            if not picks:
                break
            stages.append(picks)
            transitions.extend(trs)
        return stages, transitions

    # -- schedule construction -------------------------------------------

    def build_schedule(self, queue, stages: list[list[int]],
                       node_selection: bool,
                       network: Network | None = None,
                       exec_params: ExecModelParams | None = None) -> Schedule:
        """Barrier-synchronized placement of the rolled-out stages."""
        network = network if network is not None else self.network
        exec_params = exec_params if exec_params is not None else self.exec_params
        placements: list[Placement] = []
        barrier = 0
        for stage_idx, picks in enumerate(stages):
            free = list(range(network.n_nodes))
            stage_placements = []
            for row in picks:
                job = queue[row]
                if job.required_qpus > len(free):
                    raise SchedulingError(job.id, "stage exceeds free nodes")
                if node_selection:
                    nodes = select_nodes(free, job.required_qpus, network)
                else:
                    nodes = tuple(free[: job.required_qpus])
                free = [n for n in free if n not in nodes]
                duration = execmodel.estimate_execution_time(
                    job, nodes, network, exec_params
                )
                stage_placements.append(Placement(
                    job_id=job.id,
                    assigned_nodes=tuple(sorted(nodes)),
                    start_ns=barrier,
                    finish_ns=barrier + duration,
                    stage_index=stage_idx,
                ))
            placements.extend(stage_placements)
            barrier = max(p.finish_ns for p in stage_placements)
        return Schedule(placements)

    def schedule(self, queue, node_selection: bool | None = None,
                 network: Network | None = None,
                 exec_params: ExecModelParams | None = None) -> Schedule:
        """Deterministic (argmax) scheduling of one queue."""
        if node_selection is None:
            node_selection = self.config.reward_variant == "node_selection"
        if not queue:
            return Schedule([])
        net = network if network is not None else self.network
        stages, _ = self.rollout(queue, sample=False, n_max=net.n_nodes)
        return self.build_schedule(queue, stages, node_selection, net, exec_params)

    def episode_reward(self, queue, stages: list[list[int]],
                       schedule: Schedule) -> float:
        durations = {p.job_id: p.duration_ns for p in schedule.placements}
        reward_stages = [
            [(float(queue[row].epr_pairs), float(durations[queue[row].id]))
             for row in picks]
            for picks in stages
        ]
        _, reward = epr_reward(
            reward_stages,
            variant=self.config.reward_variant,
            alpha=self.config.alpha_reward,
            gamma=self.config.gamma_pressure,
            beta=self.config.beta_positional,
            latency_mode=self.config.latency_mode,
        )
        return reward

    # -- training ----------------------------------------------------------

    def train(self, episodes: int, bias_alpha: float = 0.0) -> list[TrainLogEntry]:
        """Roll out fixed-size slots, updating every ``update_every`` picks.

        Every transition of an episode receives the episode reward;
        advantages come from generalized advantage estimation.
        """
        cfg = self.config
        node_selection = cfg.reward_variant == "node_selection"
        wcfg = workload.WorkloadConfig(
            catalog=self.catalog,
            lam=float(cfg.j_max),
            bias_alpha=bias_alpha,
            fixed_count=cfg.j_max,
        )
        buffer: list[Transition] = []
        window_rewards: list[float] = []
        log: list[TrainLogEntry] = []
        for ep in range(episodes):
            queue = workload.generate_slot_jobs(wcfg, ep, self.env_rng)
            stages, transitions = self.rollout(queue, sample=True)
            schedule = self.build_schedule(queue, stages, node_selection)
            reward = self.episode_reward(queue, stages, schedule)
            for tr in transitions:
                tr.reward = reward
            compute_gae(transitions, cfg.discount, cfg.gae_lambda)
            buffer.extend(transitions)
            window_rewards.append(reward)
            if len(buffer) >= cfg.update_every:
                stats = ppo_update(
                    buffer, self.policy, self.value_net, cfg,
                    self.policy_opt, self.value_opt, self.update_rng,
                )
                mean_stats = np.array(stats).mean(axis=0)
                log.append(TrainLogEntry(
                    update_index=len(log),
                    mean_reward=float(np.mean(window_rewards)),
                    policy_loss=float(mean_stats[0]),
                    value_loss=float(mean_stats[1]),
                    entropy=float(mean_stats[2]),
                ))
                window_rewards = []
        return log

    # -- persistence -------------------------------------------------------

    def save(self, path: str) -> None:
        save_weights(path, self)


def ppo_schedule(queue, agent: PpoAgent, node_selection: bool = False) -> Schedule:
    """Schedule one queue with a trained (or untrained) agent."""
    return agent.schedule(queue, node_selection=node_selection)


def train(agent: PpoAgent, episodes: int, bias_alpha: float = 0.0) -> list[TrainLogEntry]:
    """Train ``agent`` in place; returns the per-update training log."""
    return agent.train(episodes, bias_alpha=bias_alpha)


# -- weight file format ----------------------------------------------------
#
# Flat binary, little endian:
#   magic   4 bytes  b"DQSW"
#   version uint32   (currently 1)
#   n_arr   uint32   number of arrays
#   table   per array: ndim uint32, then ndim uint32 dims
#   data    per array: row-major float64 values
#
# Array order: meta vector [j_max, n_features, variant_id, latency_id,
# time_scale, hidden sizes...], feature scales, then policy weight/bias
# pairs, then value weight/bias pairs.

_MAGIC = b"DQSW"
_VERSION = 1


def save_weights(path: str, agent: PpoAgent) -> None:
    cfg = agent.config
    meta = np.array([
        cfg.j_max,
        cfg.n_features,
        REWARD_VARIANTS.index(cfg.reward_variant),
        LATENCY_MODES.index(cfg.latency_mode),
        agent.time_scale,
        *cfg.hidden,
    ], dtype=float)
    arrays = [meta, agent.feature_scales]
    arrays.extend(agent.policy.parameters())
    arrays.extend(agent.value_net.parameters())
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(arrays)))
        for arr in arrays:
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_weights(path: str) -> tuple[dict, list[np.ndarray]]:
    """Read a weight file; returns (metadata dict, weight arrays)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a scheduler weight file")
        version, n_arr = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported weight file version {version}")
        shapes = []
        for _ in range(n_arr):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shapes.append(struct.unpack(f"<{ndim}I", fh.read(4 * ndim)))
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            arrays.append(data.copy())
    meta_vec = arrays[0]
    meta = {
        "j_max": int(meta_vec[0]),
        "n_features": int(meta_vec[1]),
        "reward_variant": REWARD_VARIANTS[int(meta_vec[2])],
        "latency_mode": LATENCY_MODES[int(meta_vec[3])],
        "time_scale": float(meta_vec[4]),
        "hidden": tuple(int(h) for h in meta_vec[5:]),
    }
    return meta, arrays[1:]


def load_agent(
    path: str,
    network: Network,
    exec_params: ExecModelParams,
    catalog: tuple,
) -> PpoAgent:
    """Rebuild an agent for inference from a weight file."""
    meta, arrays = load_weights(path)
    config = PpoConfig(
        j_max=meta["j_max"],
        n_features=meta["n_features"],
        reward_variant=meta["reward_variant"],
        latency_mode=meta["latency_mode"],
        hidden=meta["hidden"],
    )
    agent = PpoAgent(
        config, network, exec_params, catalog,
        feature_scales=arrays[0], time_scale=meta["time_scale"],
    )
    params = arrays[1:]
    n_policy = len(agent.policy.parameters())
    for target, source in zip(agent.policy.parameters(), params[:n_policy]):
        target[...] = source
    for target, source in zip(agent.value_net.parameters(), params[n_policy:]):
        target[...] = source
    return agent
