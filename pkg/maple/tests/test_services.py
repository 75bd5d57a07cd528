import json
import math
import tempfile
from pathlib import Path
from unittest import mock

from django.test import SimpleTestCase, TestCase

from maple.models import TrainingRun
from maple.pamdp import ContractViolation
from maple.services import (
    CSV_HEADER, ExperimentError, ExperimentRunner, MetricRecord, analyze_sketches, evaluate,
    make_trainer, medoid_sketch, normalized_return, read_trajectories, restore_trainer, smooth,
    sketches_by_task, summarize,
)
from maple.tests.test_training import tiny_config
from maple.training import Episode


def write_trajectories(path, records):
    Path(path).write_text(''.join(json.dumps(r) + '\n' for r in records))


def trajectory(sketch, run_seed=0, phase='final', success=True, task='pnp'):
    return {'phase': phase, 'task': task, 'method': 'maple', 'run_seed': run_seed, 'seed': 1,
            'env_steps': 300, 'sketch': sketch, 'rewards': [], 'return': 0.0, 'success': success}


class MetricTests(SimpleTestCase):

    def test_normalized_return_ceiling(self):
        episode = Episode(seed=0, atomic_rewards=[1.0] * 160)
        self.assertEqual(normalized_return(episode, 1.0, 150), 100.0)
        self.assertEqual(normalized_return(Episode(seed=0, atomic_rewards=[0.5] * 150), 1.0, 150), 50.0)

    def test_csv_row(self):
        record = MetricRecord(1500, 12.5, 0.25, 0.1, 0.02)
        self.assertEqual(record.csv_row(), '1500,12.500000,0.250000,0.100000,0.020000')
        self.assertEqual(CSV_HEADER, 'env_steps,return_norm,success_rate,alpha_tsk,alpha_p')

    def test_smoothing(self):
        self.assertEqual(smooth([5.0, 5.0, 5.0], 2), [5.0, 5.0, 5.0])
        self.assertEqual(smooth([1.0, 2.0, 7.0], 1), [1.0, 2.0, 7.0])
        self.assertAlmostEqual(smooth([0.0, 0.0, 100.0], 3)[-1], 33.33, places=2)
        self.assertEqual(smooth([0.0, 0.0, 100.0], 150, steps=[100, 200, 300])[-1], 50.0)
        with self.assertRaises(ContractViolation):
            smooth([1.0], 0)

    def test_summary_smooths_on_the_step_axis(self):
        records = [MetricRecord(100, 10.0, 0.0, 1.0, 1.0), MetricRecord(200, 30.0, 1.0, 1.0, 1.0),
                   MetricRecord(300, 50.0, 1.0, 1.0, 1.0)]
        summary = summarize(records, 150)
        self.assertEqual(summary['env_steps'], [100, 200, 300])
        self.assertEqual(summary['smoothed_return_norm'], [10.0, 20.0, 40.0])
        self.assertEqual(summary['smoothed_success_rate'], [0.0, 0.5, 1.0])
        self.assertEqual(summary['final_return_norm'], 40.0)
        self.assertEqual(summarize([], 150), {})


class TrajectoryAnalysisTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / 'trajs.jsonl'

    def test_final_records_take_precedence(self):
        write_trajectories(self.path, [
            trajectory(['push'], phase='eval'),
            trajectory(['grasp', 'reach', 'release']),
            trajectory(['grasp', 'reach']),
            trajectory(['atomic'], run_seed=1, phase='eval'),
            trajectory(['atomic', 'grasp'], run_seed=1, phase='eval'),
        ])
        grouped = sketches_by_task(read_trajectories(self.path))
        self.assertEqual(len(grouped['pnp'][0]), 2)
        self.assertEqual(len(grouped['pnp'][1]), 2)

    def test_report(self):
        write_trajectories(self.path, [
            trajectory(['grasp', 'reach', 'release']),
            trajectory(['grasp', 'reach']),
            trajectory(['grasp', 'reach', 'release'], run_seed=1),
            trajectory(['grasp', 'reach', 'release'], run_seed=1),
        ])
        (report,) = analyze_sketches([self.path])
        self.assertAlmostEqual(report.scores[0], 2.0 / 3.0, delta=1e-12)
        self.assertEqual(report.scores[1], 1.0)
        self.assertEqual(medoid_sketch([self.path]).labels(), ['grasp', 'reach', 'release'])

    def test_mixed_tasks_have_no_single_medoid(self):
        write_trajectories(self.path, [trajectory(['grasp']), trajectory(['reach'], task='peg')])
        self.assertEqual(len(analyze_sketches([self.path])), 2)
        with self.assertRaises(ExperimentError):
            medoid_sketch([self.path])

    def test_unreadable_logs(self):
        with self.assertRaises(ExperimentError):
            read_trajectories(Path(self.tmp.name) / 'missing.jsonl')
        self.path.write_text('{"phase": "final"\n')
        with self.assertRaises(ExperimentError):
            read_trajectories(self.path)
        self.path.write_text('')
        with self.assertRaises(ExperimentError):
            analyze_sketches([self.path])


class EvaluationTests(SimpleTestCase):

    def test_same_seeds_same_record(self):
        trainer = make_trainer(tiny_config(task='cleanup'))
        first, second = evaluate(trainer, 2), evaluate(trainer, 2)
        self.assertEqual(first, second)
        self.assertEqual(first.env_steps, 0)
        self.assertAlmostEqual(sum(first.usage.values()), 1.0, places=12)

    def test_random_policy_does_not_clean_up(self):
        trainer = make_trainer(tiny_config(task='cleanup'))
        episodes = [trainer.collect(seed, 'explore', trainer.explore_rng) for seed in trainer.eval_seeds[:5]]
        self.assertFalse(any(e.success for e in episodes))

    def test_task_entropy_is_reported(self):
        trainer = make_trainer(tiny_config(task='lift'))
        record = evaluate(trainer, 2)
        self.assertGreater(record.entropy_tsk, 0.0)
        self.assertLessEqual(record.entropy_tsk, math.log(trainer.agent.k) + 1e-9)
        self.assertIn('entropy_tsk=', record.as_text())


class ExperimentRunnerTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_run_directory(self):
        records = ExperimentRunner(tiny_config(), self.root / 'lift0').run()
        out = self.root / 'lift0'
        lines = (out / 'metrics.csv').read_text().splitlines()
        self.assertEqual(lines[0], CSV_HEADER)
        self.assertEqual(lines[1:], [r.csv_row() for r in records])
        self.assertEqual(len(records), 2)
        self.assertTrue((out / 'checkpoints' / 'latest.ckpt').exists())
        self.assertTrue((out / 'checkpoints' / f'step_{records[-1].env_steps:08d}.ckpt').exists())
        self.assertEqual(json.loads((out / 'config.json').read_text())['hidden_sizes'], '8')

        phases = [r['phase'] for r in read_trajectories(out / 'trajs.jsonl')]
        self.assertEqual(phases.count('eval'), 4)
        self.assertEqual(phases.count('final'), 2)
        self.assertIn('explore', phases)

        run = TrainingRun.objects.get()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.evaluations.count(), 2)
        self.assertEqual(run.final_success_rate, records[-1].success_rate)
        self.assertEqual(run.latest_evaluation.env_steps, records[-1].env_steps)

    def test_summary_file(self):
        runner = ExperimentRunner(tiny_config(smoothing_fraction='1.0'), self.root / 'smoothed')
        records = runner.run()
        summary = json.loads((self.root / 'smoothed' / 'summary.json').read_text())
        self.assertEqual(summary, runner.summary)
        self.assertEqual(summary['smoothing_window'], 300)
        self.assertEqual(summary['env_steps'], [r.env_steps for r in records])
        self.assertAlmostEqual(summary['smoothed_return_norm'][0], records[0].return_norm, places=12)
        self.assertAlmostEqual(summary['final_success_rate'],
                               (records[0].success_rate + records[1].success_rate) / 2, places=12)

    def test_fixed_seed_runs_are_identical(self):
        ExperimentRunner(tiny_config(), self.root / 'a').run()
        ExperimentRunner(tiny_config(), self.root / 'b').run()
        for name in ('metrics.csv', 'trajs.jsonl', 'config.json'):
            self.assertEqual((self.root / 'a' / name).read_text(), (self.root / 'b' / name).read_text(), name)

    def test_checkpoint_restores_the_final_policy(self):
        records = ExperimentRunner(tiny_config(), self.root / 'run').run()
        trainer = restore_trainer(self.root / 'run' / 'checkpoints' / 'latest.ckpt')
        self.assertEqual(trainer.env_steps, records[-1].env_steps)
        self.assertEqual(evaluate(trainer), records[-1])

    def test_failed_run_is_recorded(self):
        with mock.patch('maple.services.Trainer.run', side_effect=RuntimeError('boom')):
            with self.assertRaises(ExperimentError):
                ExperimentRunner(tiny_config(), self.root / 'broken').run()
        run = TrainingRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertIn('boom', run.error_message)

    def test_bad_checkpoint(self):
        with self.assertRaises(ExperimentError):
            restore_trainer(self.root / 'missing.ckpt')
        junk = self.root / 'junk.ckpt'
        junk.write_bytes(b'not a checkpoint\n')
        with self.assertRaises(ExperimentError):
            restore_trainer(junk)
