"""
Experiment harness services: evaluation protocol, metric smoothing, run
output files, checkpoints and the run registry.

A run directory holds:
    config.json     the validated configuration
    metrics.csv     env_steps,return_norm,success_rate,alpha_tsk,alpha_p
    trajs.jsonl     one episode per line (phase, seeds, sketch, rewards, success)
    summary.json    smoothed return and success curves of the run
    checkpoints/    step_<env_steps>.ckpt and latest.ckpt
"""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from django.db import DatabaseError
from django.utils import timezone

from .config import ExperimentConfig, validate
from .diffnet import load_arrays, save_arrays
from .pamdp import ContractViolation, TaskSketch
from .sketches import SketchReport, report
from .tasks import get_task
from .training import Episode, SketchTransferTrainer, Trainer, TrainingHooks, parse_sketch

logger = logging.getLogger(__name__)

CSV_HEADER = 'env_steps,return_norm,success_rate,alpha_tsk,alpha_p'


class ExperimentError(Exception):
    """Custom exception for experiment harness failures"""
    pass


@dataclass
class MetricRecord:
    env_steps: int
    return_norm: float
    success_rate: float
    alpha_tsk: float
    alpha_p: float
    entropy_tsk: float = 0.0
    usage: Dict[str, float] = field(default_factory=dict)

    def csv_row(self) -> str:
        return (f"{self.env_steps},{self.return_norm:.6f},{self.success_rate:.6f},"
                f"{self.alpha_tsk:.6f},{self.alpha_p:.6f}")

    def as_text(self) -> str:
        usage = ' '.join(f"{label}={share:.3f}" for label, share in self.usage.items())
        return (f"env_steps={self.env_steps} return_norm={self.return_norm:.2f} "
                f"success_rate={self.success_rate:.3f} alpha_tsk={self.alpha_tsk:.4f} "
                f"alpha_p={self.alpha_p:.4f} entropy_tsk={self.entropy_tsk:.3f} usage: {usage}")


def normalized_return(episode: Episode, r_max: float, cap: int) -> float:
    """100 * task reward over the first `cap` atomic steps / (r_max * cap); affordance excluded"""
    return 100.0 * float(sum(episode.atomic_rewards[:cap])) / (r_max * cap)


def evaluate(trainer: Trainer, episodes: Optional[int] = None,
             on_episode: Optional[Callable[[Episode], None]] = None) -> MetricRecord:
    """
    Greedy episodes on the trainer's fixed evaluation seeds

    Args:
        trainer: Supplies the agent, the task and the episode schedule
        episodes: Number of episodes (config.eval_episodes by default)
        on_episode: Called with every finished episode
    """
    n = episodes or trainer.config.eval_episodes
    cap = trainer.config.episode_length
    labels = trainer.agent.library.labels()
    counts = np.zeros(len(labels))
    returns, successes, states, decisions = [], [], [], []
    for seed in trainer.eval_seeds[:n]:
        episode = trainer.collect(seed, 'greedy', None)
        returns.append(normalized_return(episode, trainer.task.r_max, cap))
        successes.append(float(episode.success))
        for index in episode.type_indices:
            counts[index] += 1
        for transition in episode.transitions:
            states.append(transition.state)
            decisions.append(transition.decision_index)
        if on_episode:
            on_episode(episode)
    total = counts.sum()
    usage = {label: float(c / total) if total else 0.0 for label, c in zip(labels, counts)}
    entropy = 0.0
    if states:
        entropy = float(np.mean(trainer.agent.task_entropy(np.stack(states), np.array(decisions))))
    return MetricRecord(
        env_steps=trainer.env_steps,
        return_norm=float(np.mean(returns)),
        success_rate=float(np.mean(successes)),
        alpha_tsk=trainer.agent.alpha_tsk,
        alpha_p=trainer.agent.alpha_p,
        entropy_tsk=entropy,
        usage=usage,
    )


def smooth(values: Sequence[float], window: int, steps: Optional[Sequence[int]] = None) -> List[float]:
    """
    Trailing moving average.

    Without `steps` the window counts records; with `steps` it is measured on
    the env-step axis and covers records with step > current - window.
    """
    if window < 1:
        raise ContractViolation("Smoothing window must be at least 1")
    values = np.asarray(values, dtype=np.float64)
    axis = np.arange(1, len(values) + 1) if steps is None else np.asarray(steps)
    smoothed = []
    for i in range(len(values)):
        inside = (axis[:i + 1] > axis[i] - window)
        smoothed.append(float(np.mean(values[:i + 1][inside])))
    return smoothed


def summarize(records: Sequence[MetricRecord], window: int) -> dict:
    """Smoothed return and success curves on the env-step axis, plus their final values"""
    if not records:
        return {}
    steps = [r.env_steps for r in records]
    returns = smooth([r.return_norm for r in records], window, steps)
    successes = smooth([r.success_rate for r in records], window, steps)
    return {
        'smoothing_window': window,
        'env_steps': steps,
        'smoothed_return_norm': returns,
        'smoothed_success_rate': successes,
        'final_return_norm': returns[-1],
        'final_success_rate': successes[-1],
    }


# Run directory

class RunLogger:
    """Single-owner writer for one run directory"""

    def __init__(self, out_dir, config: ExperimentConfig):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.metrics_path = self.out_dir / 'metrics.csv'
        self.trajectories_path = self.out_dir / 'trajs.jsonl'
        self.checkpoint_dir = self.out_dir / 'checkpoints'
        (self.out_dir / 'config.json').write_text(json.dumps(config.as_dict(), indent=2, sort_keys=True) + '\n')
        self.metrics_path.write_text(CSV_HEADER + '\n')
        self.trajectories_path.write_text('')

    def write_metric(self, record: MetricRecord) -> None:
        with open(self.metrics_path, 'a') as handle:
            handle.write(record.csv_row() + '\n')

    def write_episode(self, phase: str, episode: Episode, env_steps: int) -> None:
        line = {
            'phase': phase,
            'task': self.config.task,
            'method': self.config.method,
            'run_seed': self.config.seed,
            'seed': episode.seed,
            'env_steps': env_steps,
            'sketch': episode.sketch.labels(),
            'rewards': [round(r, 6) for r in episode.decision_rewards],
            'return': round(episode.task_return, 6),
            'success': episode.success,
        }
        with open(self.trajectories_path, 'a') as handle:
            handle.write(json.dumps(line) + '\n')

    def write_summary(self, summary: dict) -> Path:
        path = self.out_dir / 'summary.json'
        path.write_text(json.dumps(summary, indent=2) + '\n')
        return path

    def save_checkpoint(self, trainer: Trainer) -> Path:
        meta = {'env_steps': trainer.env_steps, 'config': self.config.as_dict()}
        arrays = trainer.agent.state_arrays()
        path = save_arrays(self.checkpoint_dir / f"step_{trainer.env_steps:08d}.ckpt", arrays, meta)
        save_arrays(self.checkpoint_dir / 'latest.ckpt', arrays, meta)
        logger.info(f"Checkpoint written: {path}")
        return path


def make_trainer(config: ExperimentConfig, hooks: TrainingHooks = None) -> Trainer:
    task = get_task(config.task, **config.task_options())
    if config.method == 'transfer':
        return SketchTransferTrainer(config, task, parse_sketch(config.transfer_sketch), hooks)
    return Trainer(config, task, hooks)


def restore_trainer(path) -> Trainer:
    """Rebuild a trainer from a checkpoint, networks and temperatures included"""
    try:
        arrays, meta = load_arrays(path)
    except FileNotFoundError:
        raise ExperimentError(f"Checkpoint not found: {path}")
    except ContractViolation as e:
        raise ExperimentError(str(e))
    if 'config' not in meta:
        raise ExperimentError(f"Checkpoint {path} carries no configuration")
    trainer = make_trainer(validate(meta['config']))
    try:
        trainer.agent.load_state_arrays(arrays)
    except ContractViolation as e:
        raise ExperimentError(f"Checkpoint {path} does not match its configuration: {e}")
    trainer.env_steps = int(meta.get('env_steps', 0))
    return trainer


# Run registry

class RunRegistry:
    """Records runs in the database; degrades to a no-op when the database is unavailable"""

    def __init__(self, config: ExperimentConfig, out_dir: Path):
        self.run = None
        try:
            from .models import TrainingRun
            self.run = TrainingRun.objects.create(
                task=config.task, method=config.method, seed=config.seed,
                out_dir=str(out_dir), status='pending',
            )
        except DatabaseError as e:
            logger.warning(f"Run registry unavailable, continuing without it: {e}")

    def _save(self, **fields) -> None:
        if self.run is None:
            return
        for name, value in fields.items():
            setattr(self.run, name, value)
        try:
            self.run.save()
        except DatabaseError as e:
            logger.warning(f"Could not update run {self.run.id}: {e}")

    def started(self) -> None:
        self._save(status='running', started_at=timezone.now())

    def completed(self, success_rate: Optional[float]) -> None:
        self._save(status='completed', final_success_rate=success_rate)

    def failed(self, message: str) -> None:
        self._save(status='failed', error_message=message)

    def add_metric(self, record: MetricRecord) -> None:
        if self.run is None:
            return
        try:
            self.run.evaluations.create(
                env_steps=record.env_steps,
                return_norm=record.return_norm,
                success_rate=record.success_rate,
                alpha_tsk=record.alpha_tsk,
                alpha_p=record.alpha_p,
                usage=record.usage,
            )
        except DatabaseError as e:
            logger.warning(f"Could not store evaluation for run {self.run.id}: {e}")


class ExperimentRunner(TrainingHooks):
    """Runs one training (or sketch-transfer) job and writes its run directory"""

    def __init__(self, config: ExperimentConfig, out_dir, progress: Callable[[str], None] = None):
        self.config = config
        self.out = RunLogger(out_dir, config)
        self.registry = RunRegistry(config, self.out.out_dir)
        self.progress = progress or (lambda message: None)
        self.records: List[MetricRecord] = []
        self.summary: dict = {}

    def on_episode(self, phase, episode, env_steps):
        self.out.write_episode(phase, episode, env_steps)

    def on_evaluate(self, trainer):
        record = evaluate(trainer, on_episode=lambda e: self.out.write_episode('eval', e, trainer.env_steps))
        self.records.append(record)
        self.out.write_metric(record)
        self.registry.add_metric(record)
        logger.info(f"Evaluation: {record.as_text()}")
        self.progress(record.as_text())

    def on_checkpoint(self, trainer):
        self.out.save_checkpoint(trainer)

    def run(self) -> List[MetricRecord]:
        self.registry.started()
        try:
            trainer = make_trainer(self.config, hooks=self)
            trainer.run()
            for episode in trainer.sample_sketches(self.config.sketch_episodes):
                self.out.write_episode('final', episode, trainer.env_steps)
        except Exception as e:
            logger.error(f"Run failed: {e}")
            self.registry.failed(str(e))
            raise ExperimentError(f"Run failed: {e}") from e
        final = self.records[-1].success_rate if self.records else None
        self.registry.completed(final)
        self.summary = summarize(self.records, self.config.smoothing_window)
        if self.summary:
            self.out.write_summary(self.summary)
            logger.info(
                f"Smoothed over {self.summary['smoothing_window']} env steps: "
                f"return_norm={self.summary['final_return_norm']:.2f} "
                f"success_rate={self.summary['final_success_rate']:.3f}"
            )
        return self.records


# Trajectory analysis

def read_trajectories(path) -> List[dict]:
    path = Path(path)
    if not path.exists():
        raise ExperimentError(f"Trajectory log not found: {path}")
    records = []
    with open(path) as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                raise ExperimentError(f"{path}:{number} is not a JSON record")
    return records


def sketches_by_task(records: Iterable[dict]) -> Dict[str, Dict[int, List[TaskSketch]]]:
    """
    Group logged sketches by task and run seed. Where a run logged final
    sketches only those are used; otherwise every logged episode counts.
    """
    grouped = defaultdict(lambda: defaultdict(list))
    has_final = set()
    records = list(records)
    for record in records:
        if record.get('phase') == 'final':
            has_final.add((record['task'], record['run_seed']))
    for record in records:
        key = (record['task'], record['run_seed'])
        if key in has_final and record.get('phase') != 'final':
            continue
        sketch = TaskSketch.from_labels(record['sketch'], bool(record['success']), float(record.get('return', 0.0)))
        grouped[record['task']][record['run_seed']].append(sketch)
    return {task: dict(seeds) for task, seeds in grouped.items()}


def analyze_sketches(paths: Sequence) -> List[SketchReport]:
    records = []
    for path in paths:
        records.extend(read_trajectories(path))
    grouped = sketches_by_task(records)
    if not grouped:
        raise ExperimentError("No sketches found in the given logs")
    return [report(task, seeds) for task, seeds in sorted(grouped.items())]


def medoid_sketch(paths: Sequence) -> TaskSketch:
    """Medoid of all successful sketches in the given logs"""
    reports = analyze_sketches(paths)
    if len(reports) > 1:
        raise ExperimentError(f"Logs mix several tasks: {', '.join(r.task for r in reports)}")
    if reports[0].medoid is None:
        raise ExperimentError(f"No successful sketches for {reports[0].task}")
    return reports[0].medoid
