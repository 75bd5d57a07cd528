import numpy as np
from django.core.management.base import BaseCommand, CommandError

from maple.services import ExperimentError, ExperimentRunner

from ._options import add_config_arguments, build_config, resolve_out_dir


class Command(BaseCommand):
    help = 'Train an agent on a task analogue; writes metrics.csv, trajs.jsonl, summary.json and checkpoints'

    def add_arguments(self, parser):
        parser.add_argument('--task', help='Task analogue (lift, stack, pnp, pnp-bread, cleanup, peg)')
        parser.add_argument('--method', help='maple, atomic, flat, openloop, nonatomic, noaff, noreach or nograsp')
        parser.add_argument(
            '--all-seeds',
            action='store_true',
            help='Run once per entry of the seeds key; --out then names the parent directory',
        )
        add_config_arguments(parser)

    def handle(self, *args, **options):
        config = build_config(options, task=options['task'], method=options['method'])
        if config.method == 'transfer':
            raise CommandError("Use the transfer command for sketch transfer")

        if not options['all_seeds']:
            self.train(config, resolve_out_dir(options, config))
            return

        finals = []
        for seed in config.seeds:
            seeded = config.replace(seed=seed)
            summary = self.train(seeded, resolve_out_dir(options, seeded, per_seed=True))
            if summary:
                finals.append(summary['final_success_rate'])
        if finals:
            self.stdout.write(self.style.SUCCESS(
                f"All seeds: smoothed success rate {np.mean(finals):.2f} +/- {np.std(finals):.2f} "
                f"over {len(finals)} runs"
            ))

    def train(self, config, out_dir) -> dict:
        self.stdout.write(f"Training {config.method} on {config.task} (seed {config.seed}) into {out_dir}")
        runner = ExperimentRunner(config, out_dir, progress=self.stdout.write)
        try:
            records = runner.run()
        except ExperimentError as e:
            raise CommandError(str(e))

        if not records:
            self.stdout.write(self.style.WARNING("Finished without an evaluation"))
            return runner.summary
        self.stdout.write(self.style.SUCCESS(
            f"Finished: success rate {records[-1].success_rate:.2f} at {records[-1].env_steps} env steps "
            f"(smoothed {runner.summary['final_success_rate']:.2f}, "
            f"return_norm {runner.summary['final_return_norm']:.2f})"
        ))
        return runner.summary
