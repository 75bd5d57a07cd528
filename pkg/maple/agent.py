"""
Hierarchical soft actor-critic over the primitive library.

A task policy picks the primitive type, a parameter policy (one
sub-network per primitive, each emitting the full d_A width) picks its
parameters, and twin critics score (state, type, parameters). The task
policy loss enumerates all k primitives exactly; each primitive gets one
reparameterized parameter sample.

Policy variants share the same interface:
    MaplePolicy     state-conditioned task policy, per-primitive parameter nets
    OpenLoopPolicy  task policy sees only the decision-step index
    FlatPolicy      one trunk, independent type head and one shared parameter head
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diffnet import (
    Adam, Network, categorical_entropy, log_softmax, polyak_update, sample_categorical,
    softmax, split_gaussian, tanh_gaussian_sample,
)
from .pamdp import ContractViolation, ParameterizedAction, PrimitiveLibrary, PrimitiveType
from .replay import Batch

logger = logging.getLogger(__name__)

POLICY_OUTPUT_SCALE = 0.01
MAX_DECISIONS = 150
DECISION_BINS = 16


def library_for_method(method: str) -> PrimitiveLibrary:
    if method == 'atomic':
        return PrimitiveLibrary([PrimitiveType.ATOMIC])
    if method == 'nonatomic':
        return PrimitiveLibrary.without(PrimitiveType.ATOMIC)
    if method == 'noreach':
        return PrimitiveLibrary.without(PrimitiveType.REACH)
    if method == 'nograsp':
        return PrimitiveLibrary.without(PrimitiveType.GRASP)
    return PrimitiveLibrary.full()


def decision_encoding(decision_index) -> np.ndarray:
    """Scalar index / MAX_DECISIONS followed by a DECISION_BINS one-hot"""
    index = np.atleast_1d(np.asarray(decision_index, dtype=np.float64))
    bins = np.minimum((index * DECISION_BINS / MAX_DECISIONS).astype(np.int64), DECISION_BINS - 1)
    encoded = np.zeros((index.shape[0], 1 + DECISION_BINS))
    encoded[:, 0] = index / MAX_DECISIONS
    encoded[np.arange(index.shape[0]), 1 + bins] = 1.0
    return encoded


def one_hot(indices, k: int) -> np.ndarray:
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    out = np.zeros((indices.shape[0], k))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


def _accumulate(into: List[np.ndarray], offset: int, grads: Sequence[np.ndarray]) -> None:
    for i, g in enumerate(grads):
        into[offset + i] += g


class MaplePolicy:
    shared_trunk = False

    def __init__(self, obs_dim: int, library: PrimitiveLibrary, hidden: Sequence[int], rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.k = library.k
        self.param_dim = library.max_param_dim
        self.task_net = Network([self.task_input_dim(obs_dim), *hidden, self.k], rng, POLICY_OUTPUT_SCALE)
        self.param_nets = [
            Network([obs_dim, *hidden, 2 * self.param_dim], rng, POLICY_OUTPUT_SCALE) for _ in range(self.k)
        ]

    def task_input_dim(self, obs_dim: int) -> int:
        return obs_dim

    def task_input(self, obs: np.ndarray, decisions) -> np.ndarray:
        return obs

    @property
    def task_params(self) -> List[np.ndarray]:
        return self.task_net.params

    @property
    def param_params(self) -> List[np.ndarray]:
        return [p for net in self.param_nets for p in net.params]

    def networks(self) -> Dict[str, Network]:
        nets = {'task': self.task_net}
        nets.update({f'param{j}': net for j, net in enumerate(self.param_nets)})
        return nets

    def task_forward(self, obs: np.ndarray, decisions):
        return self.task_net.forward(self.task_input(obs, decisions))

    def task_backward(self, tape, dlogits: np.ndarray) -> List[np.ndarray]:
        return self.task_net.backward(tape, dlogits)[0]

    def param_forward(self, j: int, obs: np.ndarray):
        """Returns (mean, clamped log std, clamp mask, tape) for primitive j"""
        raw, tape = self.param_nets[j].forward(obs)
        mean, log_std, mask = split_gaussian(raw, self.param_dim)
        return mean, log_std, mask, tape

    def param_backward(self, j: int, tape, dmean: np.ndarray, dlog_std: np.ndarray, into: List[np.ndarray]) -> None:
        grads, _ = self.param_nets[j].backward(tape, np.concatenate([dmean, dlog_std], axis=-1))
        _accumulate(into, 2 * len(self.param_nets[j].weights) * j, grads)


class OpenLoopPolicy(MaplePolicy):
    def task_input_dim(self, obs_dim: int) -> int:
        return 1 + DECISION_BINS

    def task_input(self, obs, decisions):
        return decision_encoding(decisions)


class FlatPolicy(MaplePolicy):
    shared_trunk = True

    def __init__(self, obs_dim: int, library: PrimitiveLibrary, hidden: Sequence[int], rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.k = library.k
        self.param_dim = library.max_param_dim
        self.net = Network([obs_dim, *hidden, self.k + 2 * self.param_dim], rng, POLICY_OUTPUT_SCALE)

    @property
    def task_params(self):
        return self.net.params

    @property
    def param_params(self):
        return self.net.params

    def networks(self):
        return {'flat': self.net}

    def task_forward(self, obs, decisions):
        out, tape = self.net.forward(obs)
        return out[..., :self.k], tape

    def task_backward(self, tape, dlogits):
        dout = np.zeros((dlogits.shape[0], self.net.output_dim))
        dout[:, :self.k] = dlogits
        return self.net.backward(tape, dout)[0]

    def param_forward(self, j, obs):
        out, tape = self.net.forward(obs)
        mean, log_std, mask = split_gaussian(out[..., self.k:], self.param_dim)
        return mean, log_std, mask, tape

    def param_backward(self, j, tape, dmean, dlog_std, into):
        dout = np.zeros((dmean.shape[0], self.net.output_dim))
        dout[:, self.k:self.k + self.param_dim] = dmean
        dout[:, self.k + self.param_dim:] = dlog_std
        _accumulate(into, 0, self.net.backward(tape, dout)[0])


POLICY_CLASSES = {'openloop': OpenLoopPolicy, 'flat': FlatPolicy}


@dataclass
class LossNoise:
    """Every random draw a training step needs, so losses are deterministic given it"""

    next_uniform: np.ndarray   # (n,) inverse-CDF draws for a'
    next_noise: np.ndarray     # (n, d_A) for x'
    task_noise: np.ndarray     # (n, k, d_A) for the task loss's inner E_x
    param_noise: np.ndarray    # (n, k, d_A) for the parameter loss

    @classmethod
    def sample(cls, rng: np.random.Generator, n: int, k: int, d: int) -> 'LossNoise':
        return cls(
            next_uniform=rng.uniform(size=n),
            next_noise=rng.standard_normal((n, d)),
            task_noise=rng.standard_normal((n, k, d)),
            param_noise=rng.standard_normal((n, k, d)),
        )


@dataclass
class LossResult:
    loss: float
    grads: List[np.ndarray]
    entropy: float = 0.0


class HierarchicalSAC:
    """
    Critics, policies, temperatures and their optimizers for one run

    Args:
        obs_dim: Observation width
        library: Primitive library (defines k and d_A)
        method: Training variant; selects the policy class
        seed: Seed for weight initialization
        hidden_sizes: Hidden layer widths for every network
        frozen_task_policy: Weight the parameter loss by the stored primitive
            type instead of the task policy (sketch transfer)
    """

    def __init__(self, obs_dim: int, library: PrimitiveLibrary, method: str = 'maple', seed: int = 0,
                 hidden_sizes: Sequence[int] = (256, 256), learning_rate: float = 3e-5,
                 discount_factor: float = 0.99, target_network_update_rate: float = 1e-3,
                 twin_critics: bool = True, automatic_entropy_tuning: bool = True,
                 initial_temperature: float = 1.0, temperature_learning_rate: float = 3e-4,
                 target_task_policy_entropy: float = 0.5, target_parameter_policy_entropy='auto',
                 frozen_task_policy: bool = False):
        rng = np.random.default_rng(seed)
        self.library = library
        self.method = method
        self.k = library.k
        self.param_dim = library.max_param_dim
        self.obs_dim = obs_dim
        self.gamma = discount_factor
        self.tau = target_network_update_rate
        self.twin = twin_critics
        self.automatic_entropy_tuning = automatic_entropy_tuning
        self.frozen_task_policy = frozen_task_policy
        self.task_entropy_factor = target_task_policy_entropy
        if target_parameter_policy_entropy in ('auto', None, ''):
            self.final_param_entropy = -float(self.param_dim)
        else:
            self.final_param_entropy = float(target_parameter_policy_entropy)
        self.warming_up = True

        self.policy = POLICY_CLASSES.get(method, MaplePolicy)(obs_dim, library, hidden_sizes, rng)
        critic_sizes = [obs_dim + self.k + self.param_dim, *hidden_sizes, 1]
        self.q1 = Network(critic_sizes, rng)
        self.q2 = Network(critic_sizes, rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()

        self.log_alpha_tsk = np.array([math.log(initial_temperature)])
        self.log_alpha_p = np.array([math.log(initial_temperature)])

        self.critic_optimizer = Adam(self.critic_params, learning_rate)
        if self.policy.shared_trunk:
            self.policy_optimizers = {'shared': Adam(self.policy.task_params, learning_rate)}
        else:
            self.policy_optimizers = {
                'task': Adam(self.policy.task_params, learning_rate),
                'param': Adam(self.policy.param_params, learning_rate),
            }
        self.alpha_optimizers = {
            'task': Adam([self.log_alpha_tsk], temperature_learning_rate),
            'param': Adam([self.log_alpha_p], temperature_learning_rate),
        }
        logger.debug(
            f"Built {type(self.policy).__name__} for {method}: k={self.k}, d_A={self.param_dim}, "
            f"obs_dim={obs_dim}, hidden={tuple(hidden_sizes)}"
        )

    # Temperatures and targets

    @property
    def alpha_tsk(self) -> float:
        return float(np.exp(self.log_alpha_tsk[0]))

    @property
    def alpha_p(self) -> float:
        return float(np.exp(self.log_alpha_p[0]))

    @property
    def target_task_entropy(self) -> float:
        if self.warming_up:
            return math.log(self.k)
        return self.task_entropy_factor * math.log(self.k)

    @property
    def target_param_entropy(self) -> float:
        return 0.0 if self.warming_up else self.final_param_entropy

    @property
    def critic_params(self) -> List[np.ndarray]:
        params = list(self.q1.params)
        if self.twin:
            params += self.q2.params
        return params

    def networks(self) -> Dict[str, Network]:
        nets = dict(self.policy.networks())
        nets.update({'q1': self.q1, 'q2': self.q2, 'q1_target': self.q1_target, 'q2_target': self.q2_target})
        return nets

    # Critic evaluation

    def critic_input(self, obs: np.ndarray, types, params: np.ndarray) -> np.ndarray:
        return np.concatenate([obs, one_hot(types, self.k), params], axis=1)

    def min_q(self, obs, types, params, target: bool = False) -> np.ndarray:
        inputs = self.critic_input(obs, types, params)
        first, second = (self.q1_target, self.q2_target) if target else (self.q1, self.q2)
        q = first(inputs)[:, 0]
        if self.twin:
            q = np.minimum(q, second(inputs)[:, 0])
        return q

    def _min_q_and_dx(self, obs, types, params) -> Tuple[np.ndarray, np.ndarray]:
        """min-twin Q and its gradient with respect to the parameter block"""
        inputs = self.critic_input(obs, types, params)
        n = inputs.shape[0]
        q1, tape1 = self.q1.forward(inputs)
        _, dx1 = self.q1.backward(tape1, np.ones((n, 1)))
        if not self.twin:
            return q1[:, 0], dx1[:, -self.param_dim:]
        q2, tape2 = self.q2.forward(inputs)
        _, dx2 = self.q2.backward(tape2, np.ones((n, 1)))
        pick_first = q1[:, 0] <= q2[:, 0]
        q = np.where(pick_first, q1[:, 0], q2[:, 0])
        dx = np.where(pick_first[:, None], dx1, dx2)
        return q, dx[:, -self.param_dim:]

    # Losses

    def sample_noise(self, rng: np.random.Generator, n: int) -> LossNoise:
        return LossNoise.sample(rng, n, self.k, self.param_dim)

    def _next_actions(self, batch: Batch, noise: LossNoise):
        n = len(batch)
        logits, _ = self.policy.task_forward(batch.next_obs, batch.next_decisions)
        log_p = log_softmax(logits)
        types = sample_categorical(np.exp(log_p), noise.next_uniform)
        forced = batch.forced_next >= 0
        types[forced] = batch.forced_next[forced]
        log_p_type = log_p[np.arange(n), types]
        log_p_type[forced] = 0.0
        params = np.zeros((n, self.param_dim))
        log_p_params = np.zeros(n)
        for j in range(self.k):
            rows = types == j
            if not np.any(rows):
                continue
            mean, log_std, _, _ = self.policy.param_forward(j, batch.next_obs[rows])
            params[rows], log_p_params[rows] = tanh_gaussian_sample(mean, log_std, noise.next_noise[rows])
        return types, params, log_p_type, log_p_params

    def critic_loss(self, batch: Batch, noise: LossNoise) -> LossResult:
        """
        Mean squared soft Bellman error against the min-twin target critic;
        terminal transitions drop the bootstrap term.
        """
        n = len(batch)
        if n == 0:
            raise ContractViolation("critic_loss needs a non-empty batch")
        types, params, log_p_type, log_p_params = self._next_actions(batch, noise)
        q_next = self.min_q(batch.next_obs, types, params, target=True)
        soft_value = q_next - self.alpha_tsk * log_p_type - self.alpha_p * log_p_params
        y = batch.rewards + self.gamma * (1.0 - batch.terminals) * soft_value

        inputs = self.critic_input(batch.obs, batch.types, batch.params)
        q1, tape1 = self.q1.forward(inputs)
        err1 = q1[:, 0] - y
        if not self.twin:
            grads, _ = self.q1.backward(tape1, (2.0 * err1 / n)[:, None])
            return LossResult(float(np.mean(err1 ** 2)), grads)
        q2, tape2 = self.q2.forward(inputs)
        err2 = q2[:, 0] - y
        loss = 0.5 * (np.mean(err1 ** 2) + np.mean(err2 ** 2))
        grads1, _ = self.q1.backward(tape1, (err1 / n)[:, None])
        grads2, _ = self.q2.backward(tape2, (err2 / n)[:, None])
        return LossResult(float(loss), grads1 + grads2)

    def task_policy_loss(self, batch: Batch, noise: LossNoise) -> LossResult:
        """E_s sum_a pi(a|s) (alpha_tsk log pi(a|s) - Q(s, a, x_a)), x_a one reparameterized draw"""
        n = len(batch)
        if n == 0:
            raise ContractViolation("task_policy_loss needs a non-empty batch")
        logits, tape = self.policy.task_forward(batch.obs, batch.decisions)
        log_p = log_softmax(logits)
        p = np.exp(log_p)
        q = np.zeros((n, self.k))
        for j in range(self.k):
            mean, log_std, _, _ = self.policy.param_forward(j, batch.obs)
            x, _ = tanh_gaussian_sample(mean, log_std, noise.task_noise[:, j])
            q[:, j] = self.min_q(batch.obs, np.full(n, j), x)
        cost = self.alpha_tsk * log_p - q
        expected = np.sum(p * cost, axis=1, keepdims=True)
        dlogits = p * (cost - expected) / n
        grads = self.policy.task_backward(tape, dlogits)
        entropy = float(np.mean(-np.sum(p * log_p, axis=1)))
        return LossResult(float(np.mean(expected)), grads, entropy)

    def primitive_weights(self, batch: Batch) -> np.ndarray:
        if self.frozen_task_policy:
            return one_hot(batch.types, self.k)
        logits, _ = self.policy.task_forward(batch.obs, batch.decisions)
        return softmax(logits)

    def parameter_policy_loss(self, batch: Batch, noise: LossNoise) -> LossResult:
        """E_s sum_a w_a (alpha_p log pi(x_a|s,a) - Q(s, a, x_a)) with pathwise gradients"""
        n = len(batch)
        if n == 0:
            raise ContractViolation("parameter_policy_loss needs a non-empty batch")
        weights = self.primitive_weights(batch)
        alpha = self.alpha_p
        grads = [np.zeros_like(p) for p in self.policy.param_params]
        loss, entropy = 0.0, 0.0
        for j in range(self.k):
            w = weights[:, j]
            mean, log_std, mask, tape = self.policy.param_forward(j, batch.obs)
            xi = noise.param_noise[:, j]
            x, log_p = tanh_gaussian_sample(mean, log_std, xi)
            q, dq_dx = self._min_q_and_dx(batch.obs, np.full(n, j), x)
            loss += float(np.mean(w * (alpha * log_p - q)))
            entropy += float(np.mean(-w * log_p))
            sigma_xi = np.exp(log_std) * xi
            dq_dz = dq_dx * (1.0 - x * x)
            scale = (w / n)[:, None]
            dmean = scale * (alpha * 2.0 * x - dq_dz)
            dlog_std = scale * (alpha * (-1.0 + 2.0 * x * sigma_xi) - dq_dz * sigma_xi) * mask
            self.policy.param_backward(j, tape, dmean, dlog_std, grads)
        return LossResult(loss, grads, entropy)

    def temperature_losses(self, task_entropy: float, param_entropy: float) -> Dict[str, LossResult]:
        """Dual losses log(alpha) * (H - H_target); gradients are with respect to log(alpha)"""
        task_gap = task_entropy - self.target_task_entropy
        param_gap = param_entropy - self.target_param_entropy
        return {
            'task': LossResult(float(self.log_alpha_tsk[0] * task_gap), [np.array([task_gap])]),
            'param': LossResult(float(self.log_alpha_p[0] * param_gap), [np.array([param_gap])]),
        }

    def update_temperatures(self, batch: Batch, noise: LossNoise) -> Tuple[float, float]:
        """Measure both policy entropies on the batch and take one dual step"""
        task_entropy = self.task_policy_loss(batch, noise).entropy
        param_entropy = self.parameter_policy_loss(batch, noise).entropy
        self._step_temperatures(task_entropy, param_entropy)
        return self.alpha_tsk, self.alpha_p

    def _step_temperatures(self, task_entropy: float, param_entropy: float) -> None:
        if not self.automatic_entropy_tuning:
            return
        losses = self.temperature_losses(task_entropy, param_entropy)
        if not self.frozen_task_policy:
            self.alpha_optimizers['task'].step(losses['task'].grads)
        self.alpha_optimizers['param'].step(losses['param'].grads)

    # Training step

    def update(self, batch: Batch, rng: np.random.Generator) -> Dict[str, float]:
        """Critic, task policy, parameter policy, temperatures, then Polyak targets"""
        noise = self.sample_noise(rng, len(batch))
        critic = self.critic_loss(batch, noise)
        self.critic_optimizer.step(critic.grads)

        task = self.task_policy_loss(batch, noise)
        param = self.parameter_policy_loss(batch, noise)
        if self.policy.shared_trunk:
            task_grads = task.grads if not self.frozen_task_policy else [np.zeros_like(g) for g in task.grads]
            self.policy_optimizers['shared'].step([a + b for a, b in zip(task_grads, param.grads)])
        else:
            if not self.frozen_task_policy:
                self.policy_optimizers['task'].step(task.grads)
            self.policy_optimizers['param'].step(param.grads)

        self._step_temperatures(task.entropy, param.entropy)
        self.update_targets()
        return {
            'critic_loss': critic.loss,
            'task_policy_loss': task.loss,
            'parameter_policy_loss': param.loss,
            'task_entropy': task.entropy,
            'parameter_entropy': param.entropy,
            'alpha_tsk': self.alpha_tsk,
            'alpha_p': self.alpha_p,
        }

    def update_targets(self) -> None:
        polyak_update(self.q1_target.params, self.q1.params, self.tau)
        polyak_update(self.q2_target.params, self.q2.params, self.tau)

    # Acting

    def select_action(self, obs: np.ndarray, mode: str, rng: Optional[np.random.Generator] = None,
                      decision_index: int = 0, forced: Optional[PrimitiveType] = None) -> ParameterizedAction:
        """
        Pick (a, x) for one observation.

        explore samples a from the task policy and x from the tanh-Gaussian;
        greedy takes the most probable type and tanh(mean). A forced type
        bypasses the task policy.
        """
        if mode not in ('explore', 'greedy'):
            raise ContractViolation(f"Unknown action-selection mode {mode!r}")
        obs = np.asarray(obs, dtype=np.float64)[None, :]
        if forced is not None:
            j = self.library.index(forced)
        else:
            logits, _ = self.policy.task_forward(obs, np.array([decision_index]))
            probs = softmax(logits)[0]
            if mode == 'greedy':
                j = int(np.argmax(probs))
            else:
                j = int(sample_categorical(probs[None, :], np.array([rng.uniform()]))[0])
        mean, log_std, _, _ = self.policy.param_forward(j, obs)
        if mode == 'greedy':
            x = np.tanh(mean[0])
        else:
            x, _ = tanh_gaussian_sample(mean[0], log_std[0], rng.standard_normal(self.param_dim))
        return self.library.make_action(self.library.ptypes[j], x)

    def task_entropy(self, obs: np.ndarray, decisions) -> np.ndarray:
        """Per-row entropy of the task policy"""
        logits, _ = self.policy.task_forward(obs, decisions)
        return categorical_entropy(logits)

    # Checkpoints

    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {}
        for name, net in self.networks().items():
            for i, p in enumerate(net.params):
                arrays[f'{name}.{i}'] = p
        arrays['log_alpha_tsk'] = self.log_alpha_tsk
        arrays['log_alpha_p'] = self.log_alpha_p
        return arrays

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, net in self.networks().items():
            try:
                net.load_params([arrays[f'{name}.{i}'] for i in range(len(net.params))])
            except KeyError as e:
                raise ContractViolation(f"Checkpoint has no array {e.args[0]!r}")
        self.log_alpha_tsk[...] = arrays['log_alpha_tsk']
        self.log_alpha_p[...] = arrays['log_alpha_p']

