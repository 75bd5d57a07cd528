from django.core.management.base import BaseCommand, CommandError

from maple.gradcheck import run_all


class Command(BaseCommand):
    help = 'Run the finite-difference gradient suites; fails on any mismatch'

    def add_arguments(self, parser):
        parser.add_argument('--instances', type=int, default=20, help='Randomized instances per suite (default: 20)')
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        results = run_all(options['instances'], options['seed'])
        failed = [result for result in results if not result.passed]
        for result in failed:
            self.stdout.write(self.style.WARNING(str(result)))
        if failed:
            raise CommandError(f"{len(failed)} of {len(results)} gradient checks failed")
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} gradient checks passed"))
