"""
Behavior primitives: scripted closed-loop controllers that expand one
parameterized action into a bounded sequence of atomic actions.

The controllers keep no state of their own. Everything they do goes
through world.step_atomic, so replaying `outcome.atomic_actions` one by one
reproduces `outcome.final_state` exactly.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .pamdp import (
    WORKSPACE_HIGH, WORKSPACE_LOW, AtomicAction, ParameterizedAction, PrimitiveType,
    default_primitive_specs,
)
from .world import MAX_ROTATION, MAX_TRANSLATION, WorldState, step_atomic, wrap_angle

logger = logging.getLogger(__name__)

REACH_EPSILON = 0.01
YAW_EPSILON = 0.05
HOVER_HEIGHT = 0.15

# Each phase stops within PHASE_TOLERANCE of its waypoint, so lift-hover-lower
# ends within REACH_EPSILON of the target. The final approach closes only
# APPROACH_GAIN of the remaining offset per step, leaving a residual above
# PHASE_TOLERANCE * APPROACH_GAIN along the direction of travel.
PHASE_TOLERANCE = REACH_EPSILON / math.sqrt(2.0)
APPROACH_GAIN = 0.5

OPEN = 1.0
CLOSE = -1.0

_BUDGETS = {ptype: spec.max_atomic_steps for ptype, spec in default_primitive_specs().items()}


@dataclass
class PrimitiveOutcome:
    """Result of running one primitive to termination"""

    atomic_steps: int
    final_state: WorldState
    accumulated_task_reward: float
    reached_target: bool
    atomic_actions: List[AtomicAction] = field(default_factory=list)
    atomic_rewards: List[float] = field(default_factory=list)


class _Rollout:
    """Accumulates the atomic steps emitted by one primitive"""

    def __init__(self, task, state: WorldState):
        self.task = task
        self.state = state
        self.actions: List[AtomicAction] = []
        self.rewards: List[float] = []

    @property
    def steps(self) -> int:
        return len(self.actions)

    def step(self, values) -> None:
        action = AtomicAction.clipped(values)
        self.state, reward = step_atomic(self.task, self.state, action)
        self.actions.append(action)
        self.rewards.append(reward)

    def outcome(self, reached: bool) -> PrimitiveOutcome:
        return PrimitiveOutcome(
            atomic_steps=self.steps,
            final_state=self.state,
            accumulated_task_reward=float(sum(self.rewards)),
            reached_target=reached,
            atomic_actions=self.actions,
            atomic_rewards=self.rewards,
        )


def _toward(current: np.ndarray, goal: np.ndarray, gain: float = APPROACH_GAIN) -> np.ndarray:
    """
    Normalized translation command toward goal: `gain` times the remaining
    offset, capped at one full step. A gain below 1 never lands on the goal.
    """
    delta = gain * (goal - current) / MAX_TRANSLATION
    largest = np.max(np.abs(delta))
    if largest > 1.0:
        delta = delta / largest
    return delta


def _yaw_command(current: float, goal: Optional[float]) -> float:
    if goal is None:
        return 0.0
    return float(np.clip(wrap_angle(goal - current) / MAX_ROTATION, -1.0, 1.0))


def _yaw_settled(state: WorldState, yaw: Optional[float]) -> bool:
    return yaw is None or abs(wrap_angle(yaw - state.gripper_yaw)) <= YAW_EPSILON


def _arrived(state: WorldState, target: np.ndarray, yaw: Optional[float]) -> bool:
    return np.linalg.norm(state.gripper_pos - target) <= REACH_EPSILON and _yaw_settled(state, yaw)


def _move(rollout: _Rollout, goal: Callable[[np.ndarray], np.ndarray], yaw: Optional[float],
          gripper: float, budget: int) -> None:
    """Step toward goal(position) until within PHASE_TOLERANCE of it or out of budget"""
    while rollout.steps < budget:
        position = rollout.state.gripper_pos
        waypoint = goal(position)
        if np.linalg.norm(waypoint - position) <= PHASE_TOLERANCE:
            return
        move = _toward(position, waypoint)
        rollout.step(np.append(move, [_yaw_command(rollout.state.gripper_yaw, yaw), gripper]))


def _reach_phase(rollout: _Rollout, target, yaw: Optional[float], gripper: float, budget: int) -> bool:
    """Lift to HOVER_HEIGHT, hover over the target, lower onto it, then finish turning"""
    target = np.clip(np.asarray(target, dtype=np.float64), WORKSPACE_LOW, WORKSPACE_HIGH)
    if np.linalg.norm(target[:2] - rollout.state.gripper_pos[:2]) > PHASE_TOLERANCE:
        _move(rollout, lambda p: np.array([p[0], p[1], HOVER_HEIGHT]), yaw, gripper, budget)
        _move(rollout, lambda p: np.array([target[0], target[1], p[2]]), yaw, gripper, budget)
    _move(rollout, lambda p: np.array([p[0], p[1], target[2]]), yaw, gripper, budget)
    while rollout.steps < budget and not _yaw_settled(rollout.state, yaw):
        rollout.step([0.0, 0.0, 0.0, _yaw_command(rollout.state.gripper_yaw, yaw), gripper])
    return _arrived(rollout.state, target, yaw)


def execute_reach(task, state: WorldState, params) -> PrimitiveOutcome:
    """Move the gripper to (x, y, z) with the gripper closed"""
    rollout = _Rollout(task, state)
    reached = _reach_phase(rollout, np.asarray(params)[:3], None, CLOSE, _BUDGETS[PrimitiveType.REACH])
    if rollout.steps == 0:
        # already there: spend one step holding position
        rollout.step([0.0, 0.0, 0.0, 0.0, CLOSE])
    return rollout.outcome(reached)


def execute_grasp(task, state: WorldState, params) -> PrimitiveOutcome:
    """Open reach to (x, y, z) at the requested yaw, then close the gripper"""
    params = np.asarray(params, dtype=np.float64)
    rollout = _Rollout(task, state)
    budget = _BUDGETS[PrimitiveType.GRASP]
    reached = _reach_phase(rollout, params[:3], float(params[3]), OPEN, budget - 1)
    rollout.step([0.0, 0.0, 0.0, 0.0, CLOSE])
    return rollout.outcome(reached)


def execute_push(task, state: WorldState, params) -> PrimitiveOutcome:
    """Open reach to (x, y, z) at the requested yaw, then move by (dx, dy, dz)"""
    params = np.asarray(params, dtype=np.float64)
    rollout = _Rollout(task, state)
    budget = _BUDGETS[PrimitiveType.PUSH]
    displacement = params[4:7]
    push_steps = int(math.ceil(np.max(np.abs(displacement)) / MAX_TRANSLATION - 1e-9))
    push_steps = min(max(push_steps, 0), budget - 1)
    reached = _reach_phase(rollout, params[:3], float(params[3]), OPEN, budget - push_steps)
    if push_steps > 0:
        goal = np.clip(rollout.state.gripper_pos + displacement, WORKSPACE_LOW, WORKSPACE_HIGH)
        while rollout.steps < budget:
            if np.linalg.norm(rollout.state.gripper_pos - goal) <= 1e-9:
                break
            move = _toward(rollout.state.gripper_pos, goal, gain=1.0)
            rollout.step(np.append(move, [0.0, OPEN]))
    if rollout.steps == 0:
        rollout.step([0.0, 0.0, 0.0, 0.0, OPEN])
    return rollout.outcome(reached)


def execute_release(task, state: WorldState, params=None) -> PrimitiveOutcome:
    """Open the gripper over four steps, dropping whatever it holds"""
    rollout = _Rollout(task, state)
    for _ in range(_BUDGETS[PrimitiveType.RELEASE]):
        rollout.step([0.0, 0.0, 0.0, 0.0, OPEN])
    return rollout.outcome(True)


def execute_atomic(task, state: WorldState, params) -> PrimitiveOutcome:
    rollout = _Rollout(task, state)
    rollout.step(np.asarray(params, dtype=np.float64)[:5])
    return rollout.outcome(True)


_CONTROLLERS = {
    PrimitiveType.REACH: execute_reach,
    PrimitiveType.GRASP: execute_grasp,
    PrimitiveType.PUSH: execute_push,
    PrimitiveType.RELEASE: execute_release,
    PrimitiveType.ATOMIC: execute_atomic,
}


def execute(task, state: WorldState, action: ParameterizedAction) -> PrimitiveOutcome:
    """Run the primitive named by action.ptype on its effective parameters"""
    outcome = _CONTROLLERS[action.ptype](task, state, action.params_effective)
    logger.debug(
        f"{action.ptype.label}: {outcome.atomic_steps} steps, "
        f"reward {outcome.accumulated_task_reward:.3f}, reached={outcome.reached_target}"
    )
    return outcome
