"""Options shared by the train and transfer commands"""

from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from maple.config import ConfigError, load_config, parse_assignments


def add_config_arguments(parser):
    parser.add_argument('--seed', type=int, help='Run seed (default from config)')
    parser.add_argument('--out', help='Run directory (relative paths go under MAPLE_RUNS_DIR)')
    parser.add_argument('--config', help='Config file of key = value lines')
    parser.add_argument(
        '--set',
        action='append',
        default=[],
        metavar='KEY=VALUE',
        help='Override one configuration key; may be repeated',
    )


def build_config(options, **explicit):
    """Merge defaults, config file, environment, --set and explicit flags"""
    try:
        overrides = parse_assignments(options.get('set'))
        overrides.update({key: value for key, value in explicit.items() if value is not None})
        if options.get('seed') is not None:
            overrides['seed'] = options['seed']
        return load_config(options.get('config'), overrides)
    except ConfigError as e:
        raise CommandError(f"Invalid configuration: {e}")


def resolve_out_dir(options, config, per_seed: bool = False) -> Path:
    """Run directory; with per_seed, --out is the parent of <task>_<method>_<seed>"""
    run_name = f"{config.task}_{config.method}_{config.seed}"
    if per_seed:
        path = Path(options.get('out') or '') / run_name
    else:
        path = Path(options.get('out') or run_name)
    if not path.is_absolute():
        path = Path(settings.MAPLE_RUNS_DIR) / path
    return path
