import os

DEBUG = True if os.environ.get('DJANGO_DEBUG') in ['True', 'true'] else False

# No models, no sessions: the toolkit only uses Django for settings, logging,
# management commands and the test runner.
DATABASES = {}

TIME_ZONE = 'UTC'
USE_TZ = True
USE_I18N = False

SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'mixitse-offline-toolkit')

INSTALLED_APPS = (
  'mixitse',
)

# Threads used by `manage.py enhance` when given a directory.
MIXITSE_WORKERS = int(os.environ.get('MIXITSE_WORKERS', '2'))

# Long acceptance experiments in the test suite.
MIXITSE_SLOW_TESTS = os.environ.get('MIXITSE_SLOW_TESTS') in ['1', 'True', 'true']

MIXITSE_LOG_LEVEL = os.environ.get('MIXITSE_LOG_LEVEL', 'INFO')
MIXITSE_LOG_FILE = os.environ.get('MIXITSE_LOG_FILE')

SENTRY_DSN = os.environ.get('SENTRY_DSN')

LOGGING = {
  'version': 1,
  'disable_existing_loggers': True,
  'root': {
    'level': 'WARNING',
    'handlers': ['console'],
  },
  'formatters': {
    'verbose': {
      'format': '%(levelname)s %(asctime)s %(module)s %(process)d %(thread)d %(message)s'
    },
  },
  'handlers': {
    'console': {
      'level': 'DEBUG',
      'class': 'logging.StreamHandler',
      'formatter': 'verbose'
    },
  },
  'loggers': {
    'mixitse': {
      'level': MIXITSE_LOG_LEVEL,
      'handlers': ['console'],
      'propagate': False,
    },
  },
}

if MIXITSE_LOG_FILE:
  LOGGING['handlers']['file'] = {
    'level': 'DEBUG',
    'class': 'logging.FileHandler',
    'formatter': 'verbose',
    'filename': MIXITSE_LOG_FILE,
  }
  LOGGING['loggers']['mixitse']['handlers'].append('file')

if SENTRY_DSN:
  LOGGING['handlers']['sentry'] = {
    'level': 'ERROR',
    'class': 'raven.handlers.logging.SentryHandler',
    'dsn': SENTRY_DSN,
  }
  LOGGING['root']['handlers'].append('sentry')
  LOGGING['loggers']['mixitse']['handlers'].append('sentry')
