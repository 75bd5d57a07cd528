from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from maple.pamdp import ContractViolation, PrimitiveType
from maple.tasks import TASKS, PegInsertionTask, get_task
from maple.world import reset, step_atomic


class TaskFactoryTests(SimpleTestCase):

    def test_every_task_is_registered(self):
        self.assertEqual(sorted(TASKS), ['cleanup', 'lift', 'peg', 'pnp', 'pnp-bread', 'stack'])

    def test_unknown_task(self):
        with self.assertRaises(ContractViolation):
            get_task('juggle')

    def test_irrelevant_options_are_ignored(self):
        task = get_task('lift', peg_clearance=0.01, lift_height=0.05, episode_length=60)
        self.assertEqual(task.lift_height, 0.05)
        self.assertEqual(task.episode_length, 60)
        peg = get_task('peg', peg_clearance=0.01, lift_height=0.05)
        self.assertIsInstance(peg, PegInsertionTask)
        self.assertEqual(peg.clearance, 0.01)

    def test_observation_width(self):
        for name in TASKS:
            task = get_task(name)
            obs = task.observe(reset(task, 0))
            self.assertEqual(obs.shape, (task.observation_dim,), name)
            self.assertTrue(np.all(np.isfinite(obs)))


class KeypointTests(SimpleTestCase):

    def test_lift_keypoints(self):
        task = get_task('lift')
        state = reset(task, 0)
        self.assertEqual(len(task.keypoints(state, PrimitiveType.GRASP)), 1)
        self.assertEqual(task.keypoints(state, PrimitiveType.PUSH), [])
        self.assertEqual(task.keypoints(state, PrimitiveType.REACH), [])
        held = replace(state, held_object='cube', gripper_open=False)
        self.assertEqual(task.keypoints(held, PrimitiveType.GRASP), [])
        self.assertEqual(len(task.keypoints(held, PrimitiveType.REACH)), 1)

    def test_cleanup_keypoints(self):
        task = get_task('cleanup')
        state = reset(task, 0)
        grasp = task.keypoints(state, PrimitiveType.GRASP)
        push = task.keypoints(state, PrimitiveType.PUSH)
        np.testing.assert_array_equal(grasp[0], state.obj('spam').position)
        np.testing.assert_array_equal(push[0], state.obj('jello').position)
        self.assertEqual(len(grasp), 1)
        self.assertEqual(len(push), 1)


class SupportTests(SimpleTestCase):

    def test_released_cube_rests_on_the_other(self):
        task = get_task('stack')
        state = reset(task, 0)
        large = state.obj('cube_large')
        small = replace(state.obj('cube_small'), position=np.array([large.position[0], large.position[1], 0.12]))
        state = replace(state, objects=dict(state.objects, cube_small=small), gripper_pos=small.position.copy(),
                        gripper_open=False, held_object='cube_small')
        state, reward = step_atomic(task, state, [0.0, 0.0, 0.0, 0.0, 1.0])
        self.assertAlmostEqual(state.obj('cube_small').bottom, large.top, places=12)
        self.assertEqual(reward, 1.0)

    def test_held_object_cannot_sink_into_the_table(self):
        task = get_task('lift')
        state = reset(task, 0)
        cube = state.obj('cube')
        state = replace(state, gripper_pos=cube.position.copy(), gripper_yaw=cube.yaw,
                        gripper_open=False, held_object='cube')
        state, _ = step_atomic(task, state, [0.0, 0.0, -1.0, 0.0, -1.0])
        self.assertAlmostEqual(state.obj('cube').bottom, 0.0, places=12)

    def test_peg_drops_into_aligned_hole(self):
        task = get_task('peg')
        state = reset(task, 0)
        peg = replace(state.obj('peg'), position=np.array([0.1, 0.0, 0.15]))
        state = replace(state, objects={'peg': peg}, gripper_pos=peg.position.copy(),
                        gripper_open=False, held_object='peg')
        state, reward = step_atomic(task, state, [0.0, 0.0, 0.0, 0.0, 1.0])
        self.assertAlmostEqual(state.obj('peg').bottom, task.BLOCK_TOP - task.HOLE_DEPTH, places=12)
        self.assertTrue(task.check_success(state))
        self.assertEqual(reward, 1.0)

    def test_misaligned_peg_rests_on_the_block(self):
        task = get_task('peg')
        state = reset(task, 0)
        peg = replace(state.obj('peg'), position=np.array([0.13, 0.0, 0.15]))
        state = replace(state, objects={'peg': peg}, gripper_pos=peg.position.copy(),
                        gripper_open=False, held_object='peg')
        state, _ = step_atomic(task, state, [0.0, 0.0, 0.0, 0.0, 1.0])
        self.assertAlmostEqual(state.obj('peg').bottom, task.BLOCK_TOP, places=12)
        self.assertFalse(task.check_success(state))
