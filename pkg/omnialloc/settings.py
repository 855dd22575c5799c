"""
Django settings for the omnialloc simulation project.

Process-level configuration comes from the environment (optionally a local
.env file). Experiment configuration lives in the JSON ``*.cfg`` files under
``configs/`` and is validated by ``apps.harness.serializers``.
"""

from pathlib import Path
import os
import logging

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent

env_path = BASE_DIR / '.env'
if env_path.exists():
    load_dotenv(env_path)


def env_flag(name, default='False'):
    return os.environ.get(name, default).lower() in ('true', '1', 'on', 'yes')


SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-dev-secret-key-change-in-production')

DEBUG = env_flag('DJANGO_DEBUG')

allowed_hosts_env = os.environ.get('DJANGO_ALLOWED_HOSTS', '127.0.0.1,localhost')
ALLOWED_HOSTS = [host.strip() for host in allowed_hosts_env.split(',') if host.strip()]

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Simulation apps
    'apps.dynamics',
    'apps.allocation',
    'apps.motors',
    'apps.controller',
    'apps.cilqr',
    'apps.harness',

    # Third-party apps
    'rest_framework',
    'django_filters',
    'drf_spectacular',
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

ROOT_URLCONF = 'omnialloc.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'omnialloc.wsgi.application'

database_name = os.environ.get('DATABASE_NAME', 'db.sqlite3')
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / database_name,
        'OPTIONS': {
            'timeout': 20,
        },
    }
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

STATIC_URL = '/static/'
STATIC_ROOT = os.path.join(BASE_DIR, 'staticfiles')

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Django REST Framework settings (read-only run browser)
REST_FRAMEWORK = {
    'DEFAULT_PERMISSION_CLASSES': [
        'rest_framework.permissions.AllowAny'
    ],
    'DEFAULT_SCHEMA_CLASS': 'drf_spectacular.openapi.AutoSchema',
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 50,
    'DEFAULT_FILTER_BACKENDS': [
        'django_filters.rest_framework.DjangoFilterBackend',
        'rest_framework.filters.OrderingFilter',
    ],
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
        'rest_framework.renderers.BrowsableAPIRenderer',
    ] if DEBUG else [
        'rest_framework.renderers.JSONRenderer',
    ],
}

SPECTACULAR_SETTINGS = {
    'TITLE': 'Omnialloc Run Browser API',
    'DESCRIPTION': 'Read-only access to recorded allocator experiment runs',
    'VERSION': '1.0.0',
    'SERVE_INCLUDE_SCHEMA': False,
}

# Simulation settings
OMNIALLOC_OUTPUT_DIR = Path(os.environ.get('OMNIALLOC_OUTPUT_DIR', BASE_DIR / 'runs'))
OMNIALLOC_DEFAULT_CONFIG = Path(
    os.environ.get('OMNIALLOC_DEFAULT_CONFIG', BASE_DIR / 'configs' / 'flip_maneuver_ci.cfg')
)
OMNIALLOC_STORE_RUNS = env_flag('OMNIALLOC_STORE_RUNS', 'True')
OMNIALLOC_LOG_LEVEL = os.environ.get('OMNIALLOC_LOG_LEVEL', 'DEBUG' if DEBUG else 'INFO').upper()
OMNIALLOC_SOLVER_TRACE = env_flag('OMNIALLOC_SOLVER_TRACE')


class SolverTraceFilter(logging.Filter):
    """Drop per-iteration DEBUG records from the optimizer unless tracing is on."""

    def filter(self, record):
        if OMNIALLOC_SOLVER_TRACE:
            return True
        if record.levelno <= logging.DEBUG and record.name.startswith('apps.cilqr'):
            return False
        return True


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'filters': {
        'solver_trace_filter': {
            '()': SolverTraceFilter,
        },
    },
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'level': OMNIALLOC_LOG_LEVEL,
            'class': 'logging.FileHandler',
            'filename': os.path.join(BASE_DIR, 'logs', 'omnialloc.log'),
            'formatter': 'verbose',
            'filters': ['solver_trace_filter'],
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
        'apps': {
            'handlers': ['console', 'file'],
            'level': OMNIALLOC_LOG_LEVEL,
            'propagate': False,
            'filters': ['solver_trace_filter'],
        },
    },
}

# Ensure logs directory exists
os.makedirs(os.path.join(BASE_DIR, 'logs'), exist_ok=True)
