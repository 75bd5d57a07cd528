from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from maple.services import ExperimentError, analyze_sketches


class Command(BaseCommand):
    help = 'Compositionality score and medoid sketch from trajectory logs'

    def add_arguments(self, parser):
        parser.add_argument('paths', nargs='+', help='trajs.jsonl files; several seeds of one task may be given')
        parser.add_argument('--out', help='Also write the report to this file')

    def handle(self, *args, **options):
        try:
            reports = analyze_sketches(options['paths'])
        except ExperimentError as e:
            raise CommandError(str(e))

        text = '\n\n'.join(report.as_text() for report in reports)
        self.stdout.write(text)
        if options['out']:
            Path(options['out']).write_text(text + '\n')
            self.stdout.write(self.style.SUCCESS(f"Report written to {options['out']}"))
