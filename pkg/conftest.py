"""Run the Django test suite under plain pytest (mirrors `manage.py test`)."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'maple_lab.settings')
django.setup()

from django.test.utils import (  # noqa: E402
    setup_databases, setup_test_environment, teardown_databases, teardown_test_environment,
)


def pytest_sessionstart(session):
    setup_test_environment()
    session._maple_db_config = setup_databases(verbosity=0, interactive=False)


def pytest_sessionfinish(session, exitstatus):
    config = getattr(session, '_maple_db_config', None)
    if config is not None:
        teardown_databases(config, verbosity=0)
    teardown_test_environment()
