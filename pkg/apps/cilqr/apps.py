from django.apps import AppConfig


class CilqrConfig(AppConfig):
    name = 'apps.cilqr'
    verbose_name = 'Receding-Horizon Nullspace Optimizer'
