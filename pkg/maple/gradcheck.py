"""
Central finite-difference checks for every analytic gradient in the agent.

A coordinate is skipped when its perturbation flips a ReLU anywhere in the
loss computation; the difference quotient is meaningless across a kink.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .agent import HierarchicalSAC
from .diffnet import ActivationPatterns, Network
from .pamdp import PrimitiveLibrary
from .replay import NO_FORCED_TYPE, Batch

logger = logging.getLogger(__name__)

STEP = 1e-5
TOLERANCE = 1e-4
ERROR_FLOOR = 1e-4


@dataclass
class GradCheckResult:
    name: str
    checked: int
    skipped: int
    max_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_error <= self.tolerance

    def __str__(self):
        verdict = 'ok' if self.passed else 'FAILED'
        return (f"{self.name}: {verdict} (max relative error {self.max_error:.2e}, "
                f"{self.checked} checked, {self.skipped} skipped at kinks)")


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ERROR_FLOOR)


def check_gradients(name: str, params: Sequence[np.ndarray], analytic: Sequence[np.ndarray],
                    loss_fn: Callable[[], float], rng: Optional[np.random.Generator] = None,
                    max_coords: Optional[int] = None, h: float = STEP) -> GradCheckResult:
    """
    Compare analytic gradients with (L(p + h) - L(p - h)) / 2h, coordinate by coordinate

    Args:
        params: Arrays perturbed in place (restored afterwards)
        analytic: Gradients aligned with params
        loss_fn: Recomputes the loss from the current parameter values
        max_coords: Check at most this many random coordinates per array
    """
    checked, skipped, worst = 0, 0, 0.0
    for array, gradient in zip(params, analytic):
        coords = list(np.ndindex(array.shape))
        if max_coords is not None and len(coords) > max_coords:
            rng = rng or np.random.default_rng(0)
            picks = rng.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in picks]
        for index in coords:
            original = array[index]
            array[index] = original + h
            with ActivationPatterns() as above:
                loss_plus = loss_fn()
            array[index] = original - h
            with ActivationPatterns() as below:
                loss_minus = loss_fn()
            array[index] = original
            first, second = above.signature(), below.signature()
            if first.shape != second.shape or np.any(first != second):
                skipped += 1
                continue
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            worst = max(worst, relative_error(float(gradient[index]), numeric))
            checked += 1
    return GradCheckResult(name, checked, skipped, worst)


def random_batch(rng: np.random.Generator, n: int, obs_dim: int, k: int, param_dim: int,
                 forced_fraction: float = 0.0) -> Batch:
    decisions = rng.integers(0, 40, size=n)
    forced = np.where(rng.random(n) < forced_fraction, rng.integers(0, k, size=n), NO_FORCED_TYPE)
    return Batch(
        obs=rng.standard_normal((n, obs_dim)),
        types=rng.integers(0, k, size=n),
        params=rng.uniform(-0.9, 0.9, size=(n, param_dim)),
        rewards=rng.standard_normal(n),
        next_obs=rng.standard_normal((n, obs_dim)),
        terminals=(rng.random(n) < 0.3).astype(np.float64),
        decisions=decisions,
        next_decisions=decisions + 1,
        forced_next=forced,
    )


def small_agent(rng: np.random.Generator, method: str = 'maple', obs_dim: int = 4,
                library: PrimitiveLibrary = None, twin: bool = True) -> HierarchicalSAC:
    """Tiny agent with random temperatures so every entropy term is exercised"""
    agent = HierarchicalSAC(
        obs_dim=obs_dim,
        library=library or PrimitiveLibrary.full(),
        method=method,
        seed=int(rng.integers(0, 2 ** 31)),
        hidden_sizes=(8, 8),
        twin_critics=twin,
    )
    agent.log_alpha_tsk[0] = rng.uniform(-2.0, 0.0)
    agent.log_alpha_p[0] = rng.uniform(-2.0, 0.0)
    # policy heads are initialized near zero; widen them so the losses are not flat
    for net in agent.policy.networks().values():
        net.weights[-1] *= 50.0
        net.biases[-1] *= 50.0
    return agent


def network_suite(rng: np.random.Generator) -> GradCheckResult:
    net = Network([3, 16, 16, 2], rng)
    x = rng.standard_normal((5, 3))
    weights = rng.standard_normal((5, 2))
    out, tape = net.forward(x)
    grads, _ = net.backward(tape, weights)
    return check_gradients('network', net.params, grads, lambda: float(np.sum(net(x) * weights)))


def critic_suite(rng: np.random.Generator, method: str = 'maple', twin: bool = True) -> GradCheckResult:
    agent = small_agent(rng, method, twin=twin)
    batch = random_batch(rng, 6, agent.obs_dim, agent.k, agent.param_dim, forced_fraction=0.3)
    noise = agent.sample_noise(rng, len(batch))
    result = agent.critic_loss(batch, noise)
    return check_gradients(f'critic_loss[{method}]', agent.critic_params, result.grads,
                           lambda: agent.critic_loss(batch, noise).loss, rng, max_coords=25)


def task_policy_suite(rng: np.random.Generator, method: str = 'maple') -> GradCheckResult:
    agent = small_agent(rng, method)
    batch = random_batch(rng, 6, agent.obs_dim, agent.k, agent.param_dim)
    noise = agent.sample_noise(rng, len(batch))
    result = agent.task_policy_loss(batch, noise)
    return check_gradients(f'task_policy_loss[{method}]', agent.policy.task_params, result.grads,
                           lambda: agent.task_policy_loss(batch, noise).loss, rng, max_coords=25)


def parameter_policy_suite(rng: np.random.Generator, method: str = 'maple') -> GradCheckResult:
    agent = small_agent(rng, method)
    batch = random_batch(rng, 6, agent.obs_dim, agent.k, agent.param_dim)
    noise = agent.sample_noise(rng, len(batch))
    result = agent.parameter_policy_loss(batch, noise)
    return check_gradients(f'parameter_policy_loss[{method}]', agent.policy.param_params, result.grads,
                           lambda: agent.parameter_policy_loss(batch, noise).loss, rng, max_coords=10)


def temperature_suite(rng: np.random.Generator) -> List[GradCheckResult]:
    agent = small_agent(rng)
    agent.warming_up = bool(rng.integers(0, 2))
    task_entropy, param_entropy = rng.uniform(0.0, 2.0), rng.uniform(-7.0, 1.0)
    losses = agent.temperature_losses(task_entropy, param_entropy)
    return [
        check_gradients('temperature_loss[task]', [agent.log_alpha_tsk], losses['task'].grads,
                        lambda: agent.temperature_losses(task_entropy, param_entropy)['task'].loss),
        check_gradients('temperature_loss[param]', [agent.log_alpha_p], losses['param'].grads,
                        lambda: agent.temperature_losses(task_entropy, param_entropy)['param'].loss),
    ]


def run_all(instances: int = 20, seed: int = 0) -> List[GradCheckResult]:
    """Every suite on `instances` randomized small networks"""
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(instances):
        results.append(network_suite(rng))
        results.append(critic_suite(rng))
        results.append(critic_suite(rng, twin=False))
        results.append(task_policy_suite(rng))
        results.append(task_policy_suite(rng, 'openloop'))
        results.append(parameter_policy_suite(rng))
        results.extend(temperature_suite(rng))
    failed = [r for r in results if not r.passed]
    logger.info(f"Gradient checks: {len(results) - len(failed)}/{len(results)} passed")
    return results
