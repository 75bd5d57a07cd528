"""
Desk-scale analogues of the Lift, Stack, Pick-and-Place, Cleanup and
Peg-Insertion tasks.

Each task owns its initial-state sampler, a staged dense reward with
plateaus at 0.25 (reach), 0.5 (grasp), 0.75 (carry/place) and 1.0 (success),
its success predicate and the keypoints used by the affordance score.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from .pamdp import ContractViolation, PrimitiveType
from .world import TABLE_HEIGHT, ObjectState, WorldState

logger = logging.getLogger(__name__)

CARRY_HEIGHT = 0.08


def reach_progress(distance: float) -> float:
    """Reach stage, in [0, 0.25]"""
    return 0.25 * (1.0 - np.tanh(10.0 * distance))


def carry_progress(distance: float) -> float:
    """Grasp/carry stage, in [0.5, 0.75]"""
    return 0.5 + 0.25 * (1.0 - np.tanh(10.0 * distance))


def make_box(name, xy, half_extents, yaw=0.0, graspable=True, pushable=False) -> ObjectState:
    half_extents = np.asarray(half_extents, dtype=np.float64)
    position = np.array([xy[0], xy[1], TABLE_HEIGHT + half_extents[2]])
    return ObjectState(name, position, yaw, half_extents, 'box', graspable, pushable)


def make_cylinder(name, xy, radius, half_height, graspable=True, pushable=False) -> ObjectState:
    position = np.array([xy[0], xy[1], TABLE_HEIGHT + half_height])
    return ObjectState(name, position, 0.0, np.array([radius, radius, half_height]),
                       'cylinder', graspable, pushable)


class Task:
    """Base class for task analogues"""

    name = ''
    r_max = 1.0
    object_names: Tuple[str, ...] = ()

    def __init__(self, episode_length: int = 150, spawn_half_range: float = 0.08, **options):
        self.episode_length = episode_length
        self.spawn_half_range = spawn_half_range
        self.options = options

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"

    # Sampling

    def sample_layout(self, rng: np.random.Generator) -> Tuple[Dict[str, ObjectState], dict]:
        raise NotImplementedError

    def _spawn_xy(self, rng: np.random.Generator, center, limit: float = None) -> np.ndarray:
        half = self.spawn_half_range if limit is None else min(self.spawn_half_range, limit)
        return np.asarray(center, dtype=np.float64) + rng.uniform(-half, half, size=2)

    # Physics hooks

    def support_height(self, objects, name: str, xy: np.ndarray) -> float:
        """Height of the surface an object would rest on at xy"""
        height = TABLE_HEIGHT
        for other_name, other in objects.items():
            if other_name != name and other.covers(xy):
                height = max(height, other.top)
        return height

    def settle(self, objects, name: str) -> ObjectState:
        obj = objects[name]
        return obj.resting_on(self.support_height(objects, name, obj.xy))

    def constrain_held(self, state: WorldState, target: np.ndarray) -> np.ndarray:
        """Keep the held object above its support; returns the corrected gripper target"""
        held = state.obj(state.held_object)
        offset = held.position - state.gripper_pos
        proposed = target + offset
        floor = self.support_height(state.objects, held.name, proposed[:2])
        bottom = proposed[2] - held.half_extents[2]
        if bottom < floor:
            proposed[2] += floor - bottom
        return proposed - offset

    # Scoring

    def dense_reward(self, state: WorldState) -> float:
        raise NotImplementedError

    def check_success(self, state: WorldState) -> bool:
        raise NotImplementedError

    # Affordances

    def graspable_points(self, state: WorldState) -> List[np.ndarray]:
        return [obj.position.copy() for name, obj in state.objects.items()
                if obj.graspable and not state.is_holding(name)]

    def pushable_points(self, state: WorldState) -> List[np.ndarray]:
        return [obj.position.copy() for obj in state.objects.values() if obj.pushable]

    def reach_targets(self, state: WorldState) -> List[np.ndarray]:
        return []

    def keypoints(self, state: WorldState, ptype: PrimitiveType) -> List[np.ndarray]:
        if ptype == PrimitiveType.GRASP:
            return self.graspable_points(state)
        if ptype == PrimitiveType.PUSH:
            return self.pushable_points(state)
        if ptype == PrimitiveType.REACH:
            return self.reach_targets(state)
        return []

    # Observation

    def fixture_vector(self, state: WorldState) -> np.ndarray:
        return np.zeros(0)

    def observe(self, state: WorldState) -> np.ndarray:
        parts = [state.gripper_pose, [1.0 if state.gripper_open else 0.0]]
        for name in self.object_names:
            obj = state.obj(name)
            parts.append(obj.pose)
            parts.append(obj.position - state.gripper_pos)
        parts.append(self.fixture_vector(state))
        return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])

    @property
    def observation_dim(self) -> int:
        return 5 + 7 * len(self.object_names) + self.fixture_dim

    fixture_dim = 0


class LiftTask(Task):
    name = 'lift'
    object_names = ('cube',)
    fixture_dim = 1
    CUBE_HALF = 0.02

    def __init__(self, lift_height: float = 0.04, **kwargs):
        super().__init__(**kwargs)
        self.lift_height = lift_height

    def sample_layout(self, rng):
        xy = self._spawn_xy(rng, (0.0, 0.0))
        yaw = rng.uniform(-np.pi / 4, np.pi / 4)
        cube = make_box('cube', xy, (self.CUBE_HALF,) * 3, yaw=yaw)
        return {'cube': cube}, {'lift_height': self.lift_height}

    def check_success(self, state):
        return state.obj('cube').bottom >= self.lift_height - 1e-9

    def dense_reward(self, state):
        cube = state.obj('cube')
        if self.check_success(state):
            return self.r_max
        if state.is_holding('cube'):
            return carry_progress(max(0.0, self.lift_height - cube.bottom))
        return reach_progress(np.linalg.norm(state.gripper_pos - cube.position))

    def reach_targets(self, state):
        # active only once the cube is in hand
        if not state.is_holding('cube'):
            return []
        cube = state.obj('cube')
        lifted = cube.position.copy()
        lifted[2] = self.lift_height + cube.half_extents[2] + 0.01
        return [lifted]

    def fixture_vector(self, state):
        return np.array([self.lift_height])


class StackTask(Task):
    name = 'stack'
    object_names = ('cube_small', 'cube_large')
    fixture_dim = 3
    SMALL_HALF = 0.02
    LARGE_HALF = 0.025
    MIN_SEPARATION = 0.08

    def sample_layout(self, rng):
        small_xy = self._spawn_xy(rng, (0.0, 0.0))
        large_xy = self._spawn_xy(rng, (0.0, 0.0))
        for _ in range(100):
            if np.linalg.norm(small_xy - large_xy) >= self.MIN_SEPARATION:
                break
            large_xy = self._spawn_xy(rng, (0.0, 0.0))
        else:
            large_xy = small_xy + np.array([self.MIN_SEPARATION, 0.0])
        objects = {
            'cube_small': make_box('cube_small', small_xy, (self.SMALL_HALF,) * 3,
                                   yaw=rng.uniform(-np.pi / 4, np.pi / 4)),
            'cube_large': make_box('cube_large', large_xy, (self.LARGE_HALF,) * 3,
                                   yaw=rng.uniform(-np.pi / 4, np.pi / 4)),
        }
        return objects, {}

    def place_point(self, state) -> np.ndarray:
        small, large = state.obj('cube_small'), state.obj('cube_large')
        return np.array([large.xy[0], large.xy[1], large.top + small.half_extents[2]])

    def small_on_large(self, state) -> bool:
        small, large = state.obj('cube_small'), state.obj('cube_large')
        return large.covers(small.xy) and abs(small.bottom - large.top) <= 0.005

    def check_success(self, state):
        return state.held_object is None and self.small_on_large(state)

    def dense_reward(self, state):
        if self.check_success(state):
            return self.r_max
        small = state.obj('cube_small')
        if state.is_holding('cube_small'):
            if self.small_on_large(state):
                return 0.75
            return carry_progress(np.linalg.norm(small.position - self.place_point(state)))
        return reach_progress(np.linalg.norm(state.gripper_pos - small.position))

    def reach_targets(self, state):
        return [self.place_point(state)]

    def fixture_vector(self, state):
        return self.place_point(state)


class PickPlaceTask(Task):
    """Carry an item into the target bin and let go of it"""

    name = 'pnp'
    object_names = ('can',)
    fixture_dim = 2
    SPAWN_CENTER = (-0.08, 0.0)
    BIN_HALF = 0.05
    TARGET_BIN = (0.12, 0.1)
    OTHER_BIN = (0.12, -0.1)

    def make_item(self, rng, xy) -> ObjectState:
        return make_cylinder('can', xy, 0.02, 0.03)

    def sample_layout(self, rng):
        item = self.make_item(rng, self._spawn_xy(rng, self.SPAWN_CENTER, limit=0.05))
        fixtures = {
            'target_bin': np.array(self.TARGET_BIN),
            'other_bin': np.array(self.OTHER_BIN),
            'bin_half': self.BIN_HALF,
        }
        return {item.name: item}, fixtures

    @property
    def item_name(self) -> str:
        return self.object_names[0]

    def in_bin(self, obj: ObjectState, center) -> bool:
        offset = np.abs(obj.xy - np.asarray(center))
        return bool(np.all(offset <= self.BIN_HALF) and obj.bottom <= TABLE_HEIGHT + 0.005)

    def check_success(self, state):
        item = state.obj(self.item_name)
        return state.held_object is None and self.in_bin(item, self.TARGET_BIN)

    def dense_reward(self, state):
        if self.check_success(state):
            return self.r_max
        item = state.obj(self.item_name)
        if state.is_holding(self.item_name):
            return carry_progress(np.linalg.norm(item.xy - np.asarray(self.TARGET_BIN)))
        return reach_progress(np.linalg.norm(state.gripper_pos - item.position))

    def reach_targets(self, state):
        return [np.array([self.TARGET_BIN[0], self.TARGET_BIN[1], CARRY_HEIGHT])]

    def fixture_vector(self, state):
        return np.array(self.TARGET_BIN, dtype=np.float64)


class PickPlaceBreadTask(PickPlaceTask):
    """Same table, a loaf instead of a can, and the other bin as target"""

    name = 'pnp-bread'
    object_names = ('bread',)
    TARGET_BIN = (0.12, -0.1)
    OTHER_BIN = (0.12, 0.1)

    def make_item(self, rng, xy):
        return make_box('bread', xy, (0.03, 0.02, 0.02), yaw=rng.uniform(-np.pi / 8, np.pi / 8))


class CleanupTask(Task):
    """Put the spam analogue in the bin and push the jello analogue to the corner"""

    name = 'cleanup'
    object_names = ('spam', 'jello')
    fixture_dim = 4
    BIN_CENTER = (0.12, 0.12)
    BIN_HALF = 0.05
    CORNER = (-0.2, -0.2)
    CORNER_THRESHOLD = 0.06

    def sample_layout(self, rng):
        spam = make_box('spam', self._spawn_xy(rng, (0.0, 0.06), limit=0.04),
                        (0.025, 0.015, 0.02), yaw=rng.uniform(-np.pi / 8, np.pi / 8),
                        graspable=True, pushable=False)
        jello = make_box('jello', self._spawn_xy(rng, (-0.08, -0.08), limit=0.04),
                         (0.03, 0.03, 0.02), graspable=False, pushable=True)
        fixtures = {
            'bin_center': np.array(self.BIN_CENTER),
            'bin_half': self.BIN_HALF,
            'corner': np.array(self.CORNER),
        }
        return {'spam': spam, 'jello': jello}, fixtures

    def spam_done(self, state) -> bool:
        spam = state.obj('spam')
        offset = np.abs(spam.xy - np.asarray(self.BIN_CENTER))
        return (state.held_object is None and bool(np.all(offset <= self.BIN_HALF))
                and spam.bottom <= TABLE_HEIGHT + 0.005)

    def jello_gap(self, state) -> float:
        jello = state.obj('jello')
        return float(np.linalg.norm(jello.xy - np.asarray(self.CORNER)))

    def check_success(self, state):
        return self.spam_done(state) and self.jello_gap(state) <= self.CORNER_THRESHOLD

    def dense_reward(self, state):
        if self.check_success(state):
            return self.r_max
        spam, jello = state.obj('spam'), state.obj('jello')
        if self.spam_done(state):
            spam_stage = 1.0
        elif state.is_holding('spam'):
            spam_stage = carry_progress(np.linalg.norm(spam.xy - np.asarray(self.BIN_CENTER)))
        else:
            spam_stage = reach_progress(np.linalg.norm(state.gripper_pos - spam.position))
        if self.jello_gap(state) <= self.CORNER_THRESHOLD:
            jello_stage = 1.0
        else:
            excess = self.jello_gap(state) - self.CORNER_THRESHOLD
            jello_stage = (reach_progress(np.linalg.norm(state.gripper_pos - jello.position))
                           + 0.5 * (1.0 - np.tanh(10.0 * excess)))
        return 0.5 * spam_stage + 0.5 * jello_stage

    def reach_targets(self, state):
        return [np.array([self.BIN_CENTER[0], self.BIN_CENTER[1], CARRY_HEIGHT])]

    def fixture_vector(self, state):
        return np.concatenate([self.BIN_CENTER, self.CORNER]).astype(np.float64)


class PegInsertionTask(Task):
    """Insert a round peg into the hole of a fixed block"""

    name = 'peg'
    object_names = ('peg',)
    fixture_dim = 3
    PEG_RADIUS = 0.012
    PEG_HALF_HEIGHT = 0.04
    BLOCK_CENTER = (0.1, 0.0)
    BLOCK_HALF = 0.05
    BLOCK_TOP = 0.05
    HOLE_DEPTH = 0.04

    def __init__(self, peg_clearance: float = 0.004, insertion_depth: float = 0.025, **kwargs):
        super().__init__(**kwargs)
        self.clearance = peg_clearance
        self.insertion_depth = insertion_depth

    def sample_layout(self, rng):
        peg = make_cylinder('peg', self._spawn_xy(rng, (-0.08, 0.0), limit=0.05),
                            self.PEG_RADIUS, self.PEG_HALF_HEIGHT)
        fixtures = {
            'hole_center': np.array(self.BLOCK_CENTER),
            'block_top': self.BLOCK_TOP,
            'hole_depth': self.HOLE_DEPTH,
            'hole_clearance': self.clearance,
            'hole_radius': self.PEG_RADIUS + self.clearance,
        }
        return {'peg': peg}, fixtures

    def aligned(self, xy) -> bool:
        return bool(np.linalg.norm(np.asarray(xy) - np.asarray(self.BLOCK_CENTER)) <= self.clearance + 1e-9)

    def over_block(self, xy) -> bool:
        offset = np.abs(np.asarray(xy) - np.asarray(self.BLOCK_CENTER))
        return bool(np.all(offset <= self.BLOCK_HALF + self.PEG_RADIUS))

    def inserted_depth(self, state) -> float:
        peg = state.obj('peg')
        if not self.aligned(peg.xy):
            return 0.0
        return max(0.0, self.BLOCK_TOP - peg.bottom)

    def support_height(self, objects, name, xy):
        if name == 'peg':
            if self.aligned(xy):
                return self.BLOCK_TOP - self.HOLE_DEPTH
            if self.over_block(xy):
                return self.BLOCK_TOP
        return super().support_height(objects, name, xy)

    def constrain_held(self, state, target):
        if state.held_object != 'peg':
            return super().constrain_held(state, target)
        peg = state.obj('peg')
        offset = peg.position - state.gripper_pos
        proposed = target + offset
        if peg.bottom < self.BLOCK_TOP - 1e-9 and self.aligned(peg.xy):
            # inside the hole: lateral motion limited by the clearance
            center = np.asarray(self.BLOCK_CENTER)
            lateral = proposed[:2] - center
            norm = np.linalg.norm(lateral)
            if norm > self.clearance:
                proposed[:2] = center + lateral * (self.clearance / norm)
        floor = self.support_height(state.objects, 'peg', proposed[:2])
        bottom = proposed[2] - peg.half_extents[2]
        if bottom < floor:
            proposed[2] += floor - bottom
        return proposed - offset

    def check_success(self, state):
        return self.inserted_depth(state) >= self.insertion_depth

    def dense_reward(self, state):
        if self.check_success(state):
            return self.r_max
        peg = state.obj('peg')
        if state.is_holding('peg'):
            depth = self.inserted_depth(state)
            if depth > 0.0:
                return 0.75 + 0.2 * min(1.0, depth / self.insertion_depth)
            tip = np.array([peg.xy[0], peg.xy[1], peg.bottom])
            mouth = np.array([self.BLOCK_CENTER[0], self.BLOCK_CENTER[1], self.BLOCK_TOP])
            return carry_progress(np.linalg.norm(tip - mouth))
        return reach_progress(np.linalg.norm(state.gripper_pos - peg.position))

    def reach_targets(self, state):
        # gripper position that puts the peg tip at the hole mouth
        return [np.array([self.BLOCK_CENTER[0], self.BLOCK_CENTER[1], self.BLOCK_TOP + self.PEG_HALF_HEIGHT])]

    def fixture_vector(self, state):
        return np.array([self.BLOCK_CENTER[0], self.BLOCK_CENTER[1], self.BLOCK_TOP])


TASKS = {
    task.name: task
    for task in (LiftTask, StackTask, PickPlaceTask, PickPlaceBreadTask, CleanupTask, PegInsertionTask)
}


def get_task(name: str, **options) -> Task:
    """
    Factory function for task analogues addressed by name

    Options not understood by a task (e.g. peg_clearance for lift) are ignored.
    """
    try:
        task_class = TASKS[name]
    except KeyError:
        raise ContractViolation(f"Unknown task {name!r}; choose from {sorted(TASKS)}")
    accepted = {'episode_length', 'spawn_half_range'}
    if task_class is LiftTask:
        accepted |= {'lift_height'}
    if task_class is PegInsertionTask:
        accepted |= {'peg_clearance', 'insertion_depth'}
    task = task_class(**{key: value for key, value in options.items() if key in accepted})
    logger.debug(f"Created task {task!r}")
    return task
