import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from maple.affordance import AffordanceSpec, affordance_score, keypoints, score_against
from maple.pamdp import ContractViolation, ParameterizedAction, PrimitiveType
from maple.tasks import get_task
from maple.world import reset


def action_at(ptype, point, extra=()):
    effective = np.concatenate([np.asarray(point, dtype=np.float64), np.asarray(extra, dtype=np.float64)])
    return ParameterizedAction(ptype, np.zeros(7), effective)


class ScoreTests(SimpleTestCase):

    def setUp(self):
        self.origin = [np.zeros(3)]

    def test_inside_threshold_scores_one(self):
        self.assertEqual(score_against(np.zeros(3), self.origin, 0.03), 1.0)
        self.assertEqual(score_against(np.array([0.06, 0.0, 0.0]), self.origin, 0.06), 1.0)

    def test_decay_beyond_threshold(self):
        score = score_against(np.array([0.53, 0.0, 0.0]), self.origin, 0.03)
        self.assertAlmostEqual(score, 1.0 - math.tanh(0.5), places=12)
        self.assertAlmostEqual(score, 0.53788, places=5)

    def test_no_keypoints_scores_zero(self):
        self.assertEqual(score_against(np.zeros(3), [], 0.12), 0.0)

    def test_best_keypoint_wins(self):
        points = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.05, 0.0])]
        self.assertEqual(score_against(np.zeros(3), points, 0.06), 1.0)

    def test_monotone_in_distance(self):
        scores = [score_against(np.array([d, 0.0, 0.0]), self.origin, 0.03) for d in np.linspace(0.0, 1.0, 50)]
        self.assertTrue(all(a >= b for a, b in zip(scores, scores[1:])))
        self.assertTrue(all(0.0 < s <= 1.0 for s in scores))

    def test_agrees_with_direct_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            x, p = rng.uniform(-0.25, 0.25, 3), rng.uniform(-0.25, 0.25, 3)
            tau = rng.uniform(0.01, 0.2)
            expected = 1.0 - math.tanh(max(float(np.linalg.norm(x - p)) - tau, 0.0))
            self.assertAlmostEqual(score_against(x, [p], tau), expected, delta=1e-12)


class TaskScoreTests(SimpleTestCase):

    def setUp(self):
        self.spec = AffordanceSpec()

    def test_grasp_at_cube(self):
        task = get_task('lift')
        state = reset(task, 0)
        action = action_at(PrimitiveType.GRASP, state.obj('cube').position, [0.0])
        self.assertEqual(affordance_score(task, state, action, self.spec), 1.0)

    def test_push_in_lift_has_no_affordance(self):
        task = get_task('lift')
        state = reset(task, 0)
        action = action_at(PrimitiveType.PUSH, state.obj('cube').position, np.zeros(4))
        self.assertEqual(affordance_score(task, state, action, self.spec), 0.0)

    def test_atomic_and_release_always_afforded(self):
        task = get_task('lift')
        state = reset(task, 0)
        self.assertEqual(affordance_score(task, state, action_at(PrimitiveType.ATOMIC, np.ones(3), np.ones(2)),
                                          self.spec), 1.0)
        self.assertEqual(affordance_score(task, state, ParameterizedAction(PrimitiveType.RELEASE, np.zeros(7),
                                                                           np.zeros(0)), self.spec), 1.0)

    def test_held_object_is_not_a_grasp_keypoint(self):
        task = get_task('lift')
        state = replace(reset(task, 0), held_object='cube', gripper_open=False)
        self.assertEqual(keypoints(task, state, PrimitiveType.GRASP), [])
        action = action_at(PrimitiveType.GRASP, state.obj('cube').position, [0.0])
        self.assertEqual(affordance_score(task, state, action, self.spec), 0.0)

    def test_cleanup_push_keypoint_is_the_jello(self):
        task = get_task('cleanup')
        state = reset(task, 0)
        action = action_at(PrimitiveType.PUSH, state.obj('jello').position + [0.1, 0.0, 0.0], np.zeros(4))
        self.assertEqual(affordance_score(task, state, action, self.spec), 1.0)
        action = action_at(PrimitiveType.GRASP, state.obj('jello').position, [0.0])
        self.assertLess(affordance_score(task, state, action, self.spec), 1.0)

    def test_spec_validation(self):
        with self.assertRaises(ContractViolation):
            AffordanceSpec(thresholds={PrimitiveType.GRASP: 0.0})
        with self.assertRaises(ContractViolation):
            AffordanceSpec(scale=-1.0)
