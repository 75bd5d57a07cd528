from django.core.management.base import BaseCommand, CommandError

from maple.services import ExperimentError, ExperimentRunner, medoid_sketch

from ._options import add_config_arguments, build_config, resolve_out_dir


class Command(BaseCommand):
    help = 'Train a parameter policy on a target task by following a task sketch'

    def add_arguments(self, parser):
        parser.add_argument('--task', help='Target task analogue')
        source = parser.add_mutually_exclusive_group()
        source.add_argument('--sketch', help="Primitive sequence, e.g. 'grasp reach release'")
        source.add_argument(
            '--source',
            nargs='+',
            help='trajs.jsonl files of a source task; their medoid sketch is used',
        )
        add_config_arguments(parser)

    def handle(self, *args, **options):
        sketch = options['sketch']
        if options['source']:
            try:
                medoid = medoid_sketch(options['source'])
            except ExperimentError as e:
                raise CommandError(str(e))
            sketch = ' '.join(medoid.labels())
            self.stdout.write(f"Medoid sketch: {sketch}")

        config = build_config(options, task=options['task'], method='transfer', transfer_sketch=sketch)
        out_dir = resolve_out_dir(options, config)

        self.stdout.write(f"Sketch transfer to {config.task} with [{config.transfer_sketch}] into {out_dir}")
        runner = ExperimentRunner(config, out_dir, progress=self.stdout.write)
        try:
            records = runner.run()
        except ExperimentError as e:
            raise CommandError(str(e))

        if records:
            self.stdout.write(self.style.SUCCESS(
                f"Finished: success rate {records[-1].success_rate:.2f} "
                f"(smoothed {runner.summary['final_success_rate']:.2f})"
            ))
