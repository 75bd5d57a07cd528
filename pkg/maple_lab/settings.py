"""
Django settings for the maple_lab project.

The project hosts the `maple` application: a tabletop manipulation simulator,
a behavior primitive library and a hierarchical soft actor-critic trainer,
driven through management commands (`python manage.py train ...`).

Experiment hyperparameters live in MAPLE_DEFAULTS below. They can be
overridden by a config file, by MAPLE_<KEY> environment variables (or a .env
file, read through python-decouple) and by command-line flags.
"""

from pathlib import Path

import dj_database_url
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: the admin is for local browsing of runs only
SECRET_KEY = config('DJANGO_SECRET_KEY', default='django-insecure-maple-lab-local-only-key')

DEBUG = config('DJANGO_DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = ['localhost', '127.0.0.1', 'testserver']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'maple',  # Our main app
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'maple_lab.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database (run registry)
# SQLite unless DATABASE_URL points somewhere else

DATABASES = {
    'default': dj_database_url.parse(
        config('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}"),
        conn_max_age=0,
    )
}


LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = '/static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Experiment output root used when a command gets a relative --out
MAPLE_RUNS_DIR = Path(config('MAPLE_RUNS_DIR', default=str(BASE_DIR / 'runs')))

# Experiment hyperparameters; every key is validated by maple.forms.ExperimentConfigForm
MAPLE_DEFAULTS = {
    'task': 'lift',
    'method': 'maple',
    'seed': 0,
    'seeds': '0,1,2',

    # Networks and optimization
    'hidden_sizes': '256,256',
    'learning_rate': 3e-5,
    'batch_size': 1024,
    'target_network_update_rate': 1e-3,
    'replay_buffer_size': 1_000_000,
    'discount_factor': 0.99,
    'reward_scale': 5.0,
    'twin_critics': True,

    # Entropy tuning
    'automatic_entropy_tuning': True,
    'initial_temperature': 1.0,
    'temperature_learning_rate': 3e-4,
    'target_task_policy_entropy': 0.5,        # multiplied by log(k)
    'target_parameter_policy_entropy': 'auto',  # -max_a d_a

    # Episodes and epochs
    'episode_length': 150,
    'training_steps_per_epoch': 1000,
    'exploration_actions_per_epoch': 3000,
    'terminate_on_success': False,

    # Desk-scale budget
    'total_env_steps': 200_000,
    'warmup_steps': 30_000,
    'min_replay_size': 1024,
    'eval_interval': 10_000,
    'checkpoint_interval': 10_000,
    'eval_episodes': 20,
    'sketch_episodes': 50,
    'smoothing_fraction': 0.15,

    # Affordances
    'affordance_score_scale': 3.0,
    'affordance_threshold_reach': 0.06,
    'affordance_threshold_grasp': 0.03,
    'affordance_threshold_push': 0.12,

    # Initial-state samplers
    'spawn_half_range': 0.08,
    'lift_height': 0.04,
    'peg_clearance': 0.004,
    'insertion_depth': 0.025,

    # Sketch transfer
    'transfer_sketch': '',
    'transfer_attempts': 5,
    'transfer_affordance_threshold': 0.9,
    'transfer_atomic_steps': 10,
}


# Logging configuration
MAPLE_LOG_LEVEL = config('MAPLE_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose' if DEBUG else 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'maple': {
            'handlers': ['console'],
            'level': MAPLE_LOG_LEVEL,
            'propagate': False,
        },
    },
}
