"""
Deterministic kinematic tabletop world.

There is no dynamics and no friction. The gripper moves by clamped
displacements, grasped objects ride along rigidly, an open gripper pushes
pushable objects by the part of its horizontal motion spent in contact, and
released objects drop straight down onto whatever supports them.
"""

import logging
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Tuple

import numpy as np

from .pamdp import WORKSPACE_HIGH, WORKSPACE_LOW, AtomicAction

logger = logging.getLogger(__name__)

MAX_TRANSLATION = 0.02   # meters per atomic step
MAX_ROTATION = 0.1       # radians per atomic step
GRASP_RADIUS = 0.02
GRASP_YAW_TOLERANCE = 0.25
FINGER_RADIUS = 0.01
TABLE_HEIGHT = 0.0
HOME_POSITION = np.array([0.0, 0.0, 0.15])


def wrap_angle(angle: float) -> float:
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True, eq=False)
class ObjectState:
    """Pose, shape and affordance flags of one rigid object"""

    name: str
    position: np.ndarray
    yaw: float
    half_extents: np.ndarray  # (hx, hy, hz); cylinders use (r, r, hz)
    shape: str = 'box'
    graspable: bool = True
    pushable: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'position', np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, 'half_extents', np.asarray(self.half_extents, dtype=np.float64))
        object.__setattr__(self, 'yaw', float(self.yaw))

    @property
    def bottom(self) -> float:
        return float(self.position[2] - self.half_extents[2])

    @property
    def top(self) -> float:
        return float(self.position[2] + self.half_extents[2])

    @property
    def xy(self) -> np.ndarray:
        return self.position[:2]

    @property
    def pose(self) -> np.ndarray:
        return np.append(self.position, self.yaw)

    def moved(self, delta: np.ndarray, delta_yaw: float = 0.0) -> 'ObjectState':
        return replace(self, position=self.position + np.asarray(delta, dtype=np.float64),
                       yaw=wrap_angle(self.yaw + delta_yaw))

    def resting_on(self, support: float) -> 'ObjectState':
        position = self.position.copy()
        position[2] = support + self.half_extents[2]
        return replace(self, position=position)

    def local_xy(self, xy: np.ndarray) -> np.ndarray:
        """Express a world xy point in the object's yaw frame"""
        offset = np.asarray(xy, dtype=np.float64) - self.xy
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.array([c * offset[0] + s * offset[1], -s * offset[0] + c * offset[1]])

    def covers(self, xy: np.ndarray, margin: float = 0.0) -> bool:
        """Whether a world xy point lies over the object's footprint"""
        if self.shape == 'cylinder':
            return bool(np.linalg.norm(np.asarray(xy) - self.xy) <= self.half_extents[0] + margin)
        local = self.local_xy(xy)
        return bool(np.all(np.abs(local) <= self.half_extents[:2] + margin))

    @property
    def yaw_symmetry(self) -> float:
        if self.shape == 'cylinder':
            return 0.0
        if abs(self.half_extents[0] - self.half_extents[1]) < 1e-9:
            return np.pi / 2
        return np.pi

    def yaw_error(self, yaw: float) -> float:
        period = self.yaw_symmetry
        if period == 0.0:
            return 0.0
        error = (yaw - self.yaw) % period
        return float(min(error, period - error))


@dataclass(frozen=True, eq=False)
class WorldState:
    """Ground truth of one episode; replaced, never mutated, by step_atomic"""

    gripper_pos: np.ndarray
    gripper_yaw: float
    gripper_open: bool
    held_object: Optional[str]
    objects: Mapping[str, ObjectState]
    atomic_timer: int
    fixtures: Mapping[str, object]

    @property
    def gripper_pose(self) -> np.ndarray:
        return np.append(self.gripper_pos, self.gripper_yaw)

    def obj(self, name: str) -> ObjectState:
        return self.objects[name]

    def is_holding(self, name: str) -> bool:
        return self.held_object == name


def reset(task, seed: int) -> WorldState:
    """Sample the task's initial layout; gripper at home, open, timer at zero"""
    rng = np.random.default_rng(seed)
    objects, fixtures = task.sample_layout(rng)
    return WorldState(
        gripper_pos=HOME_POSITION.copy(),
        gripper_yaw=0.0,
        gripper_open=True,
        held_object=None,
        objects=dict(objects),
        atomic_timer=0,
        fixtures=dict(fixtures),
    )


def _segment_entry(start: np.ndarray, end: np.ndarray, bound: np.ndarray) -> Optional[float]:
    """
    Fraction along start->end at which the segment enters the box |p| <= bound,
    or None if it never does.
    """
    direction = end - start
    t_low, t_high = 0.0, 1.0
    for axis in range(2):
        if abs(direction[axis]) < 1e-12:
            if abs(start[axis]) > bound[axis]:
                return None
            continue
        t1 = (-bound[axis] - start[axis]) / direction[axis]
        t2 = (bound[axis] - start[axis]) / direction[axis]
        t_low = max(t_low, min(t1, t2))
        t_high = min(t_high, max(t1, t2))
    if t_low >= t_high or t_low >= 1.0:
        return None
    return t_low


def _pushed(obj: ObjectState, start: np.ndarray, end: np.ndarray) -> ObjectState:
    if end[2] < obj.bottom or end[2] > obj.top + FINGER_RADIUS:
        return obj
    local_start = obj.local_xy(start[:2])
    local_end = obj.local_xy(end[:2])
    # only motion toward the object pushes it; retreating leaves it in place
    if np.dot(local_end - local_start, -local_start) <= 0.0:
        return obj
    entry = _segment_entry(local_start, local_end, obj.half_extents[:2] + FINGER_RADIUS)
    if entry is None:
        return obj
    shift = (end[:2] - start[:2]) * (1.0 - entry)
    return obj.moved(np.array([shift[0], shift[1], 0.0]))


def _graspable_at(objects: Mapping[str, ObjectState], position: np.ndarray, yaw: float) -> Optional[str]:
    candidates = []
    for name, obj in objects.items():
        if not obj.graspable:
            continue
        distance = float(np.linalg.norm(obj.position - position))
        if distance <= GRASP_RADIUS and obj.yaw_error(yaw) <= GRASP_YAW_TOLERANCE:
            candidates.append((distance, name))
    if not candidates:
        return None
    return min(candidates)[1]


def step_atomic(task, state: WorldState, action) -> Tuple[WorldState, float]:
    """
    Apply one atomic action and return the successor state and its dense reward.

    Motion is clamped to the per-step maxima and to the workspace box; a
    negative gripper command closes the gripper, anything else opens it.
    """
    if not isinstance(action, AtomicAction):
        action = AtomicAction(action)
    u = action.values
    objects = dict(state.objects)
    start = state.gripper_pos
    target = np.clip(start + u[:3] * MAX_TRANSLATION, WORKSPACE_LOW, WORKSPACE_HIGH)
    delta_yaw = float(u[3]) * MAX_ROTATION
    yaw = wrap_angle(state.gripper_yaw + delta_yaw)

    held = state.held_object
    if held is not None:
        target = task.constrain_held(state, target)
        objects[held] = objects[held].moved(target - start, delta_yaw)
    elif state.gripper_open:
        for name, obj in state.objects.items():
            if obj.pushable:
                objects[name] = _pushed(obj, start, target)

    gripper_open = state.gripper_open
    if action.closes_gripper and state.gripper_open:
        gripper_open = False
        held = _graspable_at(objects, target, yaw)
        if held is not None:
            logger.debug(f"Grasped {held} at timer {state.atomic_timer + 1}")
    elif not action.closes_gripper and not state.gripper_open:
        gripper_open = True
        if held is not None:
            objects[held] = task.settle(objects, held)
            held = None

    successor = WorldState(
        gripper_pos=target,
        gripper_yaw=yaw,
        gripper_open=gripper_open,
        held_object=held,
        objects=objects,
        atomic_timer=state.atomic_timer + 1,
        fixtures=state.fixtures,
    )
    return successor, dense_reward(task, successor)


def dense_reward(task, state: WorldState) -> float:
    """Staged task reward in [0, r_max]"""
    return float(np.clip(task.dense_reward(state), 0.0, task.r_max))


def check_success(task, state: WorldState) -> bool:
    return bool(task.check_success(state))
