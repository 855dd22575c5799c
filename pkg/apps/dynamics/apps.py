from django.apps import AppConfig


class DynamicsConfig(AppConfig):
    name = 'apps.dynamics'
    verbose_name = 'Rigid-Body Dynamics'
