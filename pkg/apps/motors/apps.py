from django.apps import AppConfig


class MotorsConfig(AppConfig):
    name = 'apps.motors'
    verbose_name = 'Motor Dynamics'
