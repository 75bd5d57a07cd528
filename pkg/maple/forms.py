from django import forms
from django.core.exceptions import ValidationError

from .tasks import TASKS

METHOD_CHOICES = [
    ('maple', 'MAPLE'),
    ('atomic', 'Atomic primitive only'),
    ('flat', 'Flat policy'),
    ('openloop', 'Open-loop task policy'),
    ('nonatomic', 'MAPLE without the atomic primitive'),
    ('transfer', 'Sketch transfer'),
    ('noaff', 'MAPLE without affordance reward'),
    ('noreach', 'MAPLE without the reach primitive'),
    ('nograsp', 'MAPLE without the grasp primitive'),
]

TRUE_STRINGS = {'1', 'true', 'yes', 'on'}
FALSE_STRINGS = {'0', 'false', 'no', 'off'}


class FlagField(forms.Field):
    """Boolean that accepts true/false, yes/no, on/off and 1/0"""

    def to_python(self, value):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in TRUE_STRINGS:
            return True
        if text in FALSE_STRINGS:
            return False
        raise ValidationError(f'Expected a boolean, got {value!r}.')


class CountField(forms.IntegerField):
    """Non-negative integer; scientific notation such as 1e6 is allowed"""

    def to_python(self, value):
        if isinstance(value, str) and value.strip():
            try:
                number = float(value)
            except ValueError:
                raise ValidationError(f'Expected an integer, got {value!r}.')
            if not number.is_integer():
                raise ValidationError(f'Expected an integer, got {value!r}.')
            value = int(number)
        return super().to_python(value)


class PositiveFloatField(forms.FloatField):
    def validate(self, value):
        super().validate(value)
        if value is not None and not value > 0:
            raise ValidationError('Must be greater than zero.')


class IntegerListField(forms.CharField):
    """Comma-separated integers, e.g. '256,256'"""

    def __init__(self, *args, min_item=0, **kwargs):
        self.min_item = min_item
        super().__init__(*args, **kwargs)

    def to_python(self, value):
        if isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [part for part in str(value).replace(' ', '').split(',') if part]
        try:
            numbers = tuple(int(item) for item in items)
        except ValueError:
            raise ValidationError(f'Expected comma-separated integers, got {value!r}.')
        if not numbers:
            raise ValidationError('At least one integer is required.')
        if any(n < self.min_item for n in numbers):
            raise ValidationError(f'Every entry must be >= {self.min_item}.')
        return numbers


class EntropyTargetField(forms.Field):
    """'auto' (minus the widest parameter dimension) or a number"""

    def to_python(self, value):
        if isinstance(value, str) and value.strip().lower() == 'auto':
            return 'auto'
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"Expected 'auto' or a number, got {value!r}.")


class ExperimentConfigForm(forms.Form):
    """Validates one merged experiment configuration"""

    task = forms.ChoiceField(choices=[(name, name) for name in TASKS])
    method = forms.ChoiceField(choices=METHOD_CHOICES)
    seed = forms.IntegerField(min_value=0)
    seeds = IntegerListField(min_item=0)

    hidden_sizes = IntegerListField(min_item=1)
    learning_rate = PositiveFloatField()
    batch_size = CountField(min_value=1)
    target_network_update_rate = forms.FloatField(min_value=0.0, max_value=1.0)
    replay_buffer_size = CountField(min_value=1)
    discount_factor = forms.FloatField(min_value=0.0, max_value=1.0)
    reward_scale = PositiveFloatField()
    twin_critics = FlagField()

    automatic_entropy_tuning = FlagField()
    initial_temperature = PositiveFloatField()
    temperature_learning_rate = PositiveFloatField()
    target_task_policy_entropy = forms.FloatField(min_value=0.0, max_value=1.0)
    target_parameter_policy_entropy = EntropyTargetField()

    episode_length = CountField(min_value=1)
    training_steps_per_epoch = CountField(min_value=0)
    exploration_actions_per_epoch = CountField(min_value=1)
    terminate_on_success = FlagField()

    total_env_steps = CountField(min_value=1)
    warmup_steps = CountField(min_value=0)
    min_replay_size = CountField(min_value=1)
    eval_interval = CountField(min_value=1)
    checkpoint_interval = CountField(min_value=1)
    eval_episodes = CountField(min_value=1)
    sketch_episodes = CountField(min_value=0)
    smoothing_fraction = forms.FloatField(min_value=0.0, max_value=1.0)

    affordance_score_scale = forms.FloatField(min_value=0.0)
    affordance_threshold_reach = PositiveFloatField()
    affordance_threshold_grasp = PositiveFloatField()
    affordance_threshold_push = PositiveFloatField()

    spawn_half_range = forms.FloatField(min_value=0.0, max_value=0.2)
    lift_height = PositiveFloatField()
    peg_clearance = PositiveFloatField()
    insertion_depth = PositiveFloatField()

    transfer_sketch = forms.CharField(required=False, strip=True)
    transfer_attempts = CountField(min_value=1)
    transfer_affordance_threshold = forms.FloatField(min_value=0.0, max_value=1.0)
    transfer_atomic_steps = CountField(min_value=0)

    def clean_transfer_sketch(self):
        sketch = self.cleaned_data.get('transfer_sketch', '')
        labels = [token for token in sketch.replace(',', ' ').split() if token]
        known = {'reach', 'grasp', 'push', 'release', 'atomic'}
        unknown = [label for label in labels if label.lower() not in known]
        if unknown:
            raise ValidationError(f'Unknown primitive(s) in sketch: {", ".join(unknown)}.')
        return ' '.join(label.lower() for label in labels)

    def clean(self):
        cleaned_data = super().clean()
        if cleaned_data.get('method') == 'transfer' and not cleaned_data.get('transfer_sketch'):
            self.add_error('transfer_sketch', 'The transfer method needs a sketch.')
        return cleaned_data
