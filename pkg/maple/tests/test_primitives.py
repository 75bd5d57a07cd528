from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from maple.pamdp import PrimitiveLibrary, PrimitiveType, default_primitive_specs
from maple.primitives import (
    CLOSE, REACH_EPSILON, execute, execute_atomic, execute_grasp, execute_push, execute_reach,
    execute_release,
)
from maple.tasks import TASKS, get_task
from maple.world import MAX_TRANSLATION, check_success, reset, step_atomic


class ReachTests(SimpleTestCase):

    def setUp(self):
        self.task = get_task('lift')
        self.state = reset(self.task, 0)

    def test_reach_current_position(self):
        outcome = execute_reach(self.task, self.state, self.state.gripper_pos)
        self.assertTrue(outcome.reached_target)
        self.assertGreaterEqual(outcome.atomic_steps, 1)
        self.assertLessEqual(outcome.atomic_steps, 3)
        self.assertFalse(outcome.final_state.gripper_open)

    def test_target_outside_workspace_is_clamped(self):
        outcome = execute_reach(self.task, self.state, [0.4, 0.0, 0.15])
        self.assertTrue(outcome.reached_target)
        self.assertLessEqual(outcome.final_state.gripper_pos[0], 0.25)
        self.assertLessEqual(outcome.atomic_steps, 15)

    def test_far_target_within_budget(self):
        outcome = execute_reach(self.task, self.state, [-0.25, 0.25, 0.0])
        self.assertLessEqual(outcome.atomic_steps, 15)
        self.assertEqual(outcome.final_state.atomic_timer, outcome.atomic_steps)

    def test_stops_short_of_the_target(self):
        target = np.array([0.12, -0.05, 0.06])
        outcome = execute_reach(self.task, self.state, target)
        error = np.linalg.norm(outcome.final_state.gripper_pos - target)
        self.assertTrue(outcome.reached_target)
        self.assertLessEqual(error, REACH_EPSILON)
        self.assertGreater(error, 0.004)

    def test_reaching_again_changes_nothing(self):
        target = np.array([-0.1, 0.08, 0.05])
        first = execute_reach(self.task, self.state, target).final_state
        again = execute_reach(self.task, first, target)
        self.assertEqual(again.atomic_steps, 1)
        self.assertTrue(again.reached_target)
        np.testing.assert_array_equal(again.final_state.gripper_pos, first.gripper_pos)
        self.assertEqual(again.final_state.gripper_yaw, first.gripper_yaw)
        self.assertFalse(again.final_state.gripper_open)


class GraspTests(SimpleTestCase):

    def test_grasp_at_cube_lifts_nothing_but_holds_it(self):
        task = get_task('lift')
        for seed in range(5):
            state = reset(task, seed)
            cube = state.obj('cube')
            outcome = execute_grasp(task, state, np.append(cube.position, cube.yaw))
            self.assertTrue(outcome.reached_target, f"seed {seed}")
            self.assertEqual(outcome.final_state.held_object, 'cube', f"seed {seed}")
            self.assertLessEqual(outcome.atomic_steps, 20)

    def test_grasp_away_from_objects(self):
        task = get_task('lift')
        state = reset(task, 0)
        outcome = execute_grasp(task, state, [0.22, 0.22, 0.02, 0.0])
        self.assertIsNone(outcome.final_state.held_object)
        self.assertFalse(outcome.final_state.gripper_open)

    def test_push_only_object_is_not_grasped(self):
        task = get_task('cleanup')
        state = reset(task, 0)
        jello = state.obj('jello')
        outcome = execute_grasp(task, state, np.append(jello.position, jello.yaw))
        self.assertIsNone(outcome.final_state.held_object)


class PushTests(SimpleTestCase):

    def setUp(self):
        self.task = get_task('cleanup')
        self.state = reset(self.task, 0)
        self.jello = self.state.obj('jello')

    def test_push_moves_box_by_stroke_minus_gap(self):
        start = self.jello.position + np.array([-0.05, 0.0, 0.0])
        state = replace(self.state, gripper_pos=start.copy(), gripper_yaw=0.0)
        outcome = execute_push(self.task, state, np.concatenate([start, [0.0], [0.1, 0.0, 0.0]]))
        moved = outcome.final_state.obj('jello').position - self.jello.position
        self.assertAlmostEqual(moved[0], 0.09, delta=0.005)
        self.assertAlmostEqual(moved[1], 0.0, places=9)
        self.assertLessEqual(outcome.atomic_steps, 20)

    def test_zero_displacement_is_an_open_reach(self):
        target = np.array([0.1, 0.1, 0.1])
        outcome = execute_push(self.task, self.state, np.concatenate([target, [0.0], np.zeros(3)]))
        self.assertTrue(outcome.reached_target)
        self.assertTrue(outcome.final_state.gripper_open)
        self.assertLessEqual(np.linalg.norm(outcome.final_state.gripper_pos - target), 0.01)

    def test_push_through_empty_space(self):
        outcome = execute_push(self.task, self.state, [0.2, 0.2, 0.02, 0.0, 0.0, -0.1, 0.0])
        for name in self.task.object_names:
            np.testing.assert_array_equal(outcome.final_state.obj(name).position, self.state.obj(name).position)


class ReleaseTests(SimpleTestCase):

    def test_release_over_bin_solves_pick_place(self):
        task = get_task('pnp')
        state = reset(task, 0)
        can = replace(state.obj('can'), position=np.array([0.12, 0.1, 0.1]))
        state = replace(state, objects={'can': can}, gripper_pos=can.position.copy(),
                        gripper_open=False, held_object='can')
        outcome = execute_release(task, state)
        self.assertEqual(outcome.atomic_steps, 4)
        self.assertIsNone(outcome.final_state.held_object)
        self.assertAlmostEqual(outcome.final_state.obj('can').bottom, 0.0, places=12)
        self.assertTrue(check_success(task, outcome.final_state))
        self.assertEqual(outcome.atomic_rewards[-1], 1.0)

    def test_release_when_open_only_spends_time(self):
        task = get_task('lift')
        state = reset(task, 0)
        outcome = execute_release(task, state)
        self.assertEqual(outcome.final_state.atomic_timer, 4)
        np.testing.assert_array_equal(outcome.final_state.gripper_pos, state.gripper_pos)
        np.testing.assert_array_equal(outcome.final_state.obj('cube').position, state.obj('cube').position)

    def test_release_with_empty_closed_gripper(self):
        task = get_task('lift')
        state = replace(reset(task, 0), gripper_open=False)
        outcome = execute_release(task, state)
        self.assertTrue(outcome.final_state.gripper_open)
        self.assertEqual(outcome.atomic_steps, 4)


class AtomicTests(SimpleTestCase):

    def test_atomic_is_one_step(self):
        task = get_task('lift')
        state = reset(task, 0)
        outcome = execute_atomic(task, state, [0.0, 0.0, 1.0, 0.0, 1.0])
        self.assertEqual(outcome.atomic_steps, 1)
        self.assertAlmostEqual(outcome.final_state.gripper_pos[2], state.gripper_pos[2] + 0.02, places=12)


class CompositionTests(SimpleTestCase):
    """Random primitive calls on every task"""

    def setUp(self):
        self.library = PrimitiveLibrary.full()
        self.budgets = {p: s.max_atomic_steps for p, s in default_primitive_specs().items()}
        self.rng = np.random.default_rng(7)

    def random_action(self):
        ptype = self.library.ptypes[self.rng.integers(0, self.library.k)]
        return self.library.make_action(ptype, self.rng.uniform(-1.0, 1.0, self.library.max_param_dim))

    def test_budgets_and_timer(self):
        for name in TASKS:
            task = get_task(name)
            state = reset(task, 0)
            for _ in range(60):
                action = self.random_action()
                outcome = execute(task, state, action)
                self.assertGreaterEqual(outcome.atomic_steps, 1)
                self.assertLessEqual(outcome.atomic_steps, self.budgets[action.ptype])
                self.assertEqual(outcome.final_state.atomic_timer, state.atomic_timer + outcome.atomic_steps)
                self.assertEqual(len(outcome.atomic_rewards), outcome.atomic_steps)
                self.assertAlmostEqual(outcome.accumulated_task_reward, sum(outcome.atomic_rewards), places=12)
                state = outcome.final_state

    def test_replaying_atomic_actions_reproduces_the_outcome(self):
        for name in TASKS:
            task = get_task(name)
            state = reset(task, 1)
            for _ in range(20):
                outcome = execute(task, state, self.random_action())
                replayed = state
                for atomic in outcome.atomic_actions:
                    replayed, _ = step_atomic(task, replayed, atomic)
                final = outcome.final_state
                np.testing.assert_array_equal(replayed.gripper_pos, final.gripper_pos)
                self.assertEqual(replayed.gripper_open, final.gripper_open)
                self.assertEqual(replayed.held_object, final.held_object)
                for obj in task.object_names:
                    np.testing.assert_array_equal(replayed.obj(obj).position, final.obj(obj).position)
                state = final

    def test_release_primitive_reads_no_parameters(self):
        task = get_task('lift')
        state = reset(task, 0)
        first = execute(task, state, self.library.make_action(PrimitiveType.RELEASE, np.zeros(7)))
        second = execute(task, state, self.library.make_action(PrimitiveType.RELEASE, np.ones(7)))
        np.testing.assert_array_equal(first.final_state.gripper_pos, second.final_state.gripper_pos)


class PegPrecisionTests(SimpleTestCase):
    """Non-atomic primitives leave the peg outside the hole clearance; atomic motion closes the gap"""

    def setUp(self):
        self.task = get_task('peg')
        self.hole = np.asarray(self.task.BLOCK_CENTER)

    def carry_to_hole(self, seed):
        state = reset(self.task, seed)
        peg = state.obj('peg')
        state = execute_grasp(self.task, state, np.append(peg.position, 0.0)).final_state
        self.assertEqual(state.held_object, 'peg', f"seed {seed}")
        for _ in range(3):
            state = execute_reach(self.task, state, [self.hole[0], self.hole[1], 0.02]).final_state
        return state

    def test_scripted_primitives_cannot_insert(self):
        for seed in range(20):
            state = self.carry_to_hole(seed)
            error = np.linalg.norm(state.obj('peg').xy - self.hole)
            self.assertGreater(error, self.task.clearance, f"seed {seed}")
            self.assertAlmostEqual(state.obj('peg').bottom, self.task.BLOCK_TOP, places=9)
            released = execute_release(self.task, state).final_state
            self.assertFalse(check_success(self.task, released), f"seed {seed}")

    def test_atomic_fine_motion_inserts(self):
        for seed in range(20):
            state = self.carry_to_hole(seed)
            for _ in range(2):
                correction = (self.hole - state.obj('peg').xy) / MAX_TRANSLATION
                state = execute_atomic(self.task, state, [correction[0], correction[1], 0.0, 0.0, CLOSE]).final_state
            np.testing.assert_allclose(state.obj('peg').xy, self.hole, atol=1e-9)
            for _ in range(3):
                state = execute_atomic(self.task, state, [0.0, 0.0, -1.0, 0.0, CLOSE]).final_state
            self.assertTrue(check_success(self.task, state), f"seed {seed}")
            released = execute_release(self.task, state).final_state
            self.assertTrue(check_success(self.task, released), f"seed {seed}")
