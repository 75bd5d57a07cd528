"""
Episode collection and the collect/train alternation.

One decision step runs one primitive to termination. Its stored reward is the
sum of the per-atomic-step task rewards plus the scaled affordance score.
Episodes end once the atomic-step cap is reached; the primitive in flight
always finishes, so an episode may overshoot the cap.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .affordance import AffordanceSpec, affordance_score
from .agent import HierarchicalSAC, library_for_method
from .pamdp import PrimitiveType, TaskSketch, Transition
from .primitives import execute
from .replay import NO_FORCED_TYPE, ReplayBuffer
from .world import check_success, reset

logger = logging.getLogger(__name__)

STREAMS = ('env', 'policy', 'replay', 'explore', 'update', 'eval')


def seed_streams(seed: int) -> Dict[str, np.random.SeedSequence]:
    """Named, independent sub-streams of one run seed"""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return dict(zip(STREAMS, children))


@dataclass
class Episode:
    seed: int
    transitions: List[Transition] = field(default_factory=list)
    type_indices: List[int] = field(default_factory=list)
    forced_next: List[int] = field(default_factory=list)
    affordance_scores: List[float] = field(default_factory=list)
    atomic_rewards: List[float] = field(default_factory=list)
    sketch_tokens: List[PrimitiveType] = field(default_factory=list)
    success: bool = False
    atomic_steps: int = 0

    @property
    def decision_rewards(self) -> List[float]:
        return [t.reward for t in self.transitions]

    @property
    def task_return(self) -> float:
        return float(sum(self.atomic_rewards))

    @property
    def sketch(self) -> TaskSketch:
        return TaskSketch(tuple(self.sketch_tokens), self.success, self.task_return)

    def record(self, state, action, outcome, score: float, scale: float, next_obs, terminal: bool,
               type_index: int) -> Transition:
        transition = Transition(
            state=state,
            action=action,
            reward=outcome.accumulated_task_reward + scale * score,
            next_state=next_obs,
            terminal=terminal,
            atomic_steps_consumed=outcome.atomic_steps,
            decision_index=len(self.transitions),
        )
        self.transitions.append(transition)
        self.type_indices.append(type_index)
        self.forced_next.append(NO_FORCED_TYPE)
        self.affordance_scores.append(score)
        self.atomic_rewards.extend(outcome.atomic_rewards)
        self.atomic_steps += outcome.atomic_steps
        return transition


def _run_decision(task, agent: HierarchicalSAC, episode: Episode, world, obs, mode, rng,
                  spec: AffordanceSpec, terminate_on_success: bool, forced=None):
    """Select, score and execute one primitive; returns (world, obs, solved_now, score)"""
    decision = len(episode.transitions)
    action = agent.select_action(obs, mode, rng, decision, forced=forced)
    score = affordance_score(task, world, action, spec)
    outcome = execute(task, world, action)
    world = outcome.final_state
    next_obs = task.observe(world)
    solved = check_success(task, world)
    episode.record(obs, action, outcome, score, spec.scale, next_obs,
                   solved and terminate_on_success, agent.library.index(action.ptype))
    if not episode.success:
        episode.sketch_tokens.append(action.ptype)
    episode.success = episode.success or solved
    return world, next_obs, solved, score


def collect_episode(task, agent: HierarchicalSAC, seed: int, mode: str = 'explore',
                    rng: Optional[np.random.Generator] = None, spec: AffordanceSpec = None,
                    cap: int = 150, terminate_on_success: bool = False) -> Episode:
    """
    Roll out one episode of primitive decisions.

    The sketch stops growing at the first decision after which the task is
    solved. Success ends the episode only when terminate_on_success is set.
    """
    spec = spec or AffordanceSpec()
    world = reset(task, seed)
    obs = task.observe(world)
    episode = Episode(seed=seed)
    while episode.atomic_steps < cap:
        world, obs, solved, _ = _run_decision(task, agent, episode, world, obs, mode, rng, spec, terminate_on_success)
        if solved and terminate_on_success:
            break
    if episode.atomic_steps > cap:
        logger.debug(f"Episode {seed} overshot the cap by {episode.atomic_steps - cap} atomic steps")
    return episode


def collect_transfer_episode(task, agent: HierarchicalSAC, sketch: TaskSketch, seed: int, mode: str = 'explore',
                             rng: Optional[np.random.Generator] = None, spec: AffordanceSpec = None,
                             attempts: int = 5, threshold: float = 0.9, atomic_steps: int = 10) -> Episode:
    """
    Follow a task sketch: each primitive is retried up to `attempts` times
    until its affordance score reaches `threshold`, then `atomic_steps` atomic
    decisions finish the episode. The last transition is terminal.
    """
    spec = spec or AffordanceSpec()
    world = reset(task, seed)
    obs = task.observe(world)
    episode = Episode(seed=seed)
    for ptype in sketch.tokens:
        tries = 1 if ptype == PrimitiveType.ATOMIC else attempts
        for _ in range(tries):
            world, obs, _, score = _run_decision(task, agent, episode, world, obs, mode, rng, spec, False, ptype)
            if score >= threshold:
                break
    for _ in range(atomic_steps):
        world, obs, _, _ = _run_decision(task, agent, episode, world, obs, mode, rng, spec, False, PrimitiveType.ATOMIC)

    # the schedule fixes every next type; the episode ends after the atomic phase
    episode.forced_next = episode.type_indices[1:] + [NO_FORCED_TYPE]
    last = episode.transitions[-1]
    episode.transitions[-1] = Transition(last.state, last.action, last.reward, last.next_state, True,
                                         last.atomic_steps_consumed, last.decision_index)
    return episode


def build_agent(config, task, method: Optional[str] = None, seed=None) -> HierarchicalSAC:
    method = method or config.method
    library = library_for_method(method)
    return HierarchicalSAC(
        obs_dim=task.observation_dim,
        library=library,
        method=method,
        seed=seed if seed is not None else config.seed,
        hidden_sizes=config.hidden_sizes,
        learning_rate=config.learning_rate,
        discount_factor=config.discount_factor,
        target_network_update_rate=config.target_network_update_rate,
        twin_critics=config.twin_critics,
        automatic_entropy_tuning=config.automatic_entropy_tuning,
        initial_temperature=config.initial_temperature,
        temperature_learning_rate=config.temperature_learning_rate,
        target_task_policy_entropy=config.target_task_policy_entropy,
        target_parameter_policy_entropy=config.target_parameter_policy_entropy,
        frozen_task_policy=method == 'transfer',
    )


class TrainingHooks:
    """Callbacks the trainer fires; the harness overrides them"""

    def on_episode(self, phase: str, episode: Episode, env_steps: int) -> None:
        pass

    def on_epoch(self, trainer: 'Trainer', stats: Dict[str, float]) -> None:
        pass

    def on_evaluate(self, trainer: 'Trainer') -> None:
        pass

    def on_checkpoint(self, trainer: 'Trainer') -> None:
        pass


class Trainer:
    """
    Alternates exploration epochs and gradient epochs until the atomic-step
    budget is spent. Deterministic given config.seed.
    """

    def __init__(self, config, task, hooks: TrainingHooks = None):
        self.config = config
        self.task = task
        self.hooks = hooks or TrainingHooks()
        streams = seed_streams(config.seed)
        self.agent = build_agent(config, task, seed=streams['policy'])
        self.spec = AffordanceSpec.from_config(config)
        if config.method == 'noaff':
            self.spec = AffordanceSpec(self.spec.thresholds, scale=0.0)
        self.replay = ReplayBuffer(
            config.replay_buffer_size, task.observation_dim, self.agent.param_dim,
            seed=streams['replay'], reward_scale=config.reward_scale,
        )
        self.env_rng = np.random.default_rng(streams['env'])
        self.explore_rng = np.random.default_rng(streams['explore'])
        self.update_rng = np.random.default_rng(streams['update'])
        self.eval_seeds = [int(s) for s in np.random.default_rng(streams['eval']).integers(0, 2 ** 31, size=10_000)]
        self.env_steps = 0
        self.epoch = 0
        self.gradient_steps = 0

    def collect(self, seed: int, mode: str, rng: Optional[np.random.Generator]) -> Episode:
        return collect_episode(self.task, self.agent, seed, mode, rng, self.spec,
                               cap=self.config.episode_length,
                               terminate_on_success=self.config.terminate_on_success)

    def store(self, episode: Episode) -> None:
        for transition, type_index, forced in zip(episode.transitions, episode.type_indices, episode.forced_next):
            self.replay.add(transition, type_index, forced)

    def explore(self) -> int:
        """Collect whole episodes until the epoch's atomic-step quota is met"""
        collected = 0
        while collected < self.config.exploration_actions_per_epoch and self.env_steps < self.config.total_env_steps:
            self.agent.warming_up = self.env_steps < self.config.warmup_steps
            episode = self.collect(int(self.env_rng.integers(0, 2 ** 31)), 'explore', self.explore_rng)
            self.store(episode)
            collected += episode.atomic_steps
            self.env_steps += episode.atomic_steps
            self.hooks.on_episode('explore', episode, self.env_steps)
        return collected

    def train_epoch(self) -> Dict[str, float]:
        if len(self.replay) < self.config.min_replay_size:
            return {}
        stats = {}
        for _ in range(self.config.training_steps_per_epoch):
            stats = self.agent.update(self.replay.sample(self.config.batch_size), self.update_rng)
            self.gradient_steps += 1
        return stats

    def run(self) -> HierarchicalSAC:
        config = self.config
        next_eval = config.eval_interval
        next_checkpoint = config.checkpoint_interval
        logger.info(f"Training {config.method} on {self.task.name} for {config.total_env_steps} env steps (seed {config.seed})")
        while self.env_steps < config.total_env_steps:
            self.explore()
            stats = self.train_epoch()
            self.epoch += 1
            self.hooks.on_epoch(self, stats)
            logger.info(
                f"Epoch {self.epoch}: env_steps={self.env_steps} replay={len(self.replay)} "
                f"alpha_tsk={self.agent.alpha_tsk:.4f} alpha_p={self.agent.alpha_p:.4f}"
            )
            if self.env_steps >= next_eval or self.env_steps >= config.total_env_steps:
                self.hooks.on_evaluate(self)
                next_eval = (self.env_steps // config.eval_interval + 1) * config.eval_interval
            if self.env_steps >= next_checkpoint or self.env_steps >= config.total_env_steps:
                self.hooks.on_checkpoint(self)
                next_checkpoint = (self.env_steps // config.checkpoint_interval + 1) * config.checkpoint_interval
        return self.agent

    def sample_sketches(self, count: int) -> List[Episode]:
        """Greedy rollouts on held-out seeds, used for sketch analysis after training"""
        seeds = self.eval_seeds[-count:] if count else []
        return [self.collect(seed, 'greedy', None) for seed in seeds]


class SketchTransferTrainer(Trainer):
    """Trainer whose episodes follow a fixed task sketch instead of the task policy"""

    def __init__(self, config, task, sketch: TaskSketch, hooks: TrainingHooks = None):
        super().__init__(config, task, hooks)
        self.sketch = sketch

    def collect(self, seed, mode, rng):
        return collect_transfer_episode(
            self.task, self.agent, self.sketch, seed, mode, rng, self.spec,
            attempts=self.config.transfer_attempts,
            threshold=self.config.transfer_affordance_threshold,
            atomic_steps=self.config.transfer_atomic_steps,
        )


def run_sketch_transfer(config, task, sketch: TaskSketch, hooks: TrainingHooks = None) -> HierarchicalSAC:
    """Train a fresh parameter policy on `task` with the task policy replaced by `sketch`"""
    logger.info(f"Sketch transfer to {task.name}: {' '.join(sketch.labels())}")
    return SketchTransferTrainer(config, task, sketch, hooks).run()


def parse_sketch(text: str) -> TaskSketch:
    """Parse 'grasp reach release' or 'grasp,reach,release'"""
    labels: Sequence[str] = [token for token in text.replace(',', ' ').split() if token]
    return TaskSketch.from_labels(labels)
