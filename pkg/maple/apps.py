from django.apps import AppConfig


class MapleConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'maple'
    verbose_name = 'MAPLE experiments'
