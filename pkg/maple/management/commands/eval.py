from django.core.management.base import BaseCommand, CommandError

from maple.services import ExperimentError, evaluate, restore_trainer


class Command(BaseCommand):
    help = 'Evaluate a checkpoint with greedy episodes and print its metric record'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', help='Path to a .ckpt file')
        parser.add_argument('--episodes', type=int, help='Number of evaluation episodes (default from config)')

    def handle(self, *args, **options):
        try:
            trainer = restore_trainer(options['checkpoint'])
        except ExperimentError as e:
            raise CommandError(str(e))

        record = evaluate(trainer, options['episodes'])
        self.stdout.write(self.style.SUCCESS(record.as_text()))
