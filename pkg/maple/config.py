"""
Experiment configuration.

Values are layered, lowest precedence first: settings.MAPLE_DEFAULTS, a
config file of `key = value` lines, MAPLE_<KEY> environment variables (or a
.env file) and explicit overrides from the command line. The merged values
are validated by ExperimentConfigForm.
"""

import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

from decouple import config as env_config
from django.conf import settings

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or unknown configuration key; the message starts with the key"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    method: str
    seed: int
    seeds: Tuple[int, ...]

    hidden_sizes: Tuple[int, ...]
    learning_rate: float
    batch_size: int
    target_network_update_rate: float
    replay_buffer_size: int
    discount_factor: float
    reward_scale: float
    twin_critics: bool

    automatic_entropy_tuning: bool
    initial_temperature: float
    temperature_learning_rate: float
    target_task_policy_entropy: float
    target_parameter_policy_entropy: Union[str, float]

    episode_length: int
    training_steps_per_epoch: int
    exploration_actions_per_epoch: int
    terminate_on_success: bool

    total_env_steps: int
    warmup_steps: int
    min_replay_size: int
    eval_interval: int
    checkpoint_interval: int
    eval_episodes: int
    sketch_episodes: int
    smoothing_fraction: float

    affordance_score_scale: float
    affordance_threshold_reach: float
    affordance_threshold_grasp: float
    affordance_threshold_push: float

    spawn_half_range: float
    lift_height: float
    peg_clearance: float
    insertion_depth: float

    transfer_sketch: str
    transfer_attempts: int
    transfer_affordance_threshold: float
    transfer_atomic_steps: int

    def replace(self, **changes) -> 'ExperimentConfig':
        return validate(dict(asdict(self), **changes))

    def as_dict(self) -> dict:
        data = asdict(self)
        data['seeds'] = ','.join(str(s) for s in self.seeds)
        data['hidden_sizes'] = ','.join(str(s) for s in self.hidden_sizes)
        return data

    def task_options(self) -> dict:
        return {
            'episode_length': self.episode_length,
            'spawn_half_range': self.spawn_half_range,
            'lift_height': self.lift_height,
            'peg_clearance': self.peg_clearance,
            'insertion_depth': self.insertion_depth,
        }

    @property
    def smoothing_window(self) -> int:
        """Trailing moving-average window in env steps"""
        return max(1, int(round(self.smoothing_fraction * self.total_env_steps)))


def default_values() -> dict:
    return dict(settings.MAPLE_DEFAULTS)


def parse_config_file(path) -> dict:
    """
    Read flat `key = value` lines; `#` starts a comment.

    Raises:
        ConfigError: For a malformed line (keyed by file and line number)
    """
    values = {}
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(str(path), f"cannot read config file ({e.strerror})")
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f"{path.name}:{number}", f"expected 'key = value', got {raw.strip()!r}")
        values[key.strip()] = value.strip()
    return values


def environment_values(keys) -> dict:
    """MAPLE_<KEY> variables from the environment or a .env file"""
    values = {}
    for key in keys:
        value = env_config(f"MAPLE_{key.upper()}", default=None)
        if value is not None:
            values[key] = value
    return values


def _check_known(values: Mapping, known, source: str) -> None:
    for key in values:
        if key not in known:
            raise ConfigError(key, f"unknown configuration key (from {source})")


def validate(values: Mapping) -> ExperimentConfig:
    from .forms import ExperimentConfigForm

    _check_known(values, default_values(), 'input')
    form = ExperimentConfigForm(data=dict(values))
    if not form.is_valid():
        key, errors = next(iter(form.errors.items()))
        raise ConfigError(key, ' '.join(str(e) for e in errors))
    return ExperimentConfig(**form.cleaned_data)


def load_config(path=None, overrides: Optional[Mapping] = None, use_environment: bool = True) -> ExperimentConfig:
    """Merge every configuration layer and validate the result"""
    values = default_values()
    known = set(values)
    if path:
        from_file = parse_config_file(path)
        _check_known(from_file, known, str(path))
        values.update(from_file)
    if use_environment:
        values.update(environment_values(known))
    if overrides:
        given = {key: value for key, value in overrides.items() if value is not None}
        _check_known(given, known, 'command line')
        values.update(given)
    config = validate(values)
    logger.debug(f"Loaded config: task={config.task} method={config.method} seed={config.seed}")
    return config


def parse_assignments(pairs) -> dict:
    """Turn ['key=value', ...] from --set flags into a dict"""
    values = {}
    for pair in pairs or []:
        key, sep, value = pair.partition('=')
        if not sep or not key.strip():
            raise ConfigError(pair, "expected key=value")
        values[key.strip()] = value.strip()
    return values
