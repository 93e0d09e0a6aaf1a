import ast
import os
import dj_database_url
from pathlib import Path

# set the repo root as the BASE_DIR, project root at PROJECT_DIR
PROJECT_DIR = Path(__file__).resolve().parent
BASE_DIR = PROJECT_DIR.parent

SECRET_KEY = os.getenv("SECRET_KEY", "codeserve-dev-only-secret")
WSGI_APPLICATION = "codeserve.wsgi.application"
ROOT_URLCONF = 'codeserve.urls'

DEBUG = ast.literal_eval(os.getenv("DEBUG", "False"))

ALLOWED_HOSTS = ast.literal_eval(os.getenv("ALLOWED_HOSTS", "['localhost', '127.0.0.1']"))

# empty string disables the key check on the HTTP api
CODESERVE_API_KEY = os.getenv("CODESERVE_API_KEY", "")

LOG_DIR = Path(os.getenv('LOG_DIR', BASE_DIR / "logs"))
os.makedirs(LOG_DIR, exist_ok=True)

LANGUAGE_CODE = os.getenv('LANGUAGE_CODE', "en")
USE_TZ = True

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'django.contrib.sessions',
    'django.contrib.admin',
    'django.contrib.staticfiles',
    'django.contrib.messages',

    'ninja',

    'codeserve.api',
    'codeserve.backends',
    'codeserve.completion',
    'codeserve.context',
    'codeserve.edits',
    'codeserve.harness',
    'codeserve.metrics',
    'codeserve.session',
]

TEMPLATES = [
  {
    "NAME": "Project Templates",
    "BACKEND": "django.template.backends.django.DjangoTemplates",
    "DIRS": [],
    "APP_DIRS": True,
    "OPTIONS": {
      "context_processors": [
        "django.template.context_processors.debug",
        "django.template.context_processors.request",
        "django.contrib.auth.context_processors.auth",
        "django.contrib.messages.context_processors.messages",
      ],
      "debug": DEBUG,
    }
  }
]

# replay runs are the only persisted objects, sqlite is plenty by default
DATABASES = {
    'default': dj_database_url.parse(
        os.getenv('DATABASE_URL', f"sqlite:///{BASE_DIR / 'codeserve.sqlite3'}"),
        conn_max_age=0
    )
}

DEFAULT_AUTO_FIELD = 'django.db.models.AutoField'

STATIC_URL = '/static/'
STATIC_ROOT = os.getenv("STATIC_ROOT", BASE_DIR / 'static')

MIDDLEWARE = (
    'django.middleware.common.CommonMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
    'django.middleware.security.SecurityMiddleware',
)

ENABLE_CPROFILER = ast.literal_eval(os.getenv("ENABLE_CPROFILER", "False"))
if ENABLE_CPROFILER:
    MIDDLEWARE += ('django_cprofile_middleware.middleware.ProfilerMiddleware', )

## ----------------------------------------------------------------------------
## ENGINE SETTINGS
## every key below can be overridden per run by a config file passed to the
## replay/serve commands, see codeserve/config.py

# scheduler
MAX_IN_FLIGHT = int(os.getenv("MAX_IN_FLIGHT", 2))
CACHE_CAPACITY = int(os.getenv("CACHE_CAPACITY", 16))
CACHE_TTL_MS = int(os.getenv("CACHE_TTL_MS", 30000))
PREFIX_WINDOW_CHARS = int(os.getenv("PREFIX_WINDOW_CHARS", 4096))
SUFFIX_WINDOW_CHARS = int(os.getenv("SUFFIX_WINDOW_CHARS", 1024))

# session
EDIT_HISTORY_CAPACITY = int(os.getenv("EDIT_HISTORY_CAPACITY", 32))

# context packing
EDIT_CONTEXT_LINES = int(os.getenv("EDIT_CONTEXT_LINES", 3))
MATCH_WINDOW_LINES = int(os.getenv("MATCH_WINDOW_LINES", 30))
MATCH_STRIDE_LINES = int(os.getenv("MATCH_STRIDE_LINES", 10))
CURSOR_CONTEXT_LINES = int(os.getenv("CURSOR_CONTEXT_LINES", 10))
PROMPT_BUDGET_TOKENS = int(os.getenv("PROMPT_BUDGET_TOKENS", 8192))
OUTPUT_BUDGET_TOKENS = int(os.getenv("OUTPUT_BUDGET_TOKENS", 128))
TOKEN_ESTIMATOR = os.getenv("TOKEN_ESTIMATOR", "codeserve.context.tokens.CharRatioEstimator")
CHARS_PER_TOKEN = int(os.getenv("CHARS_PER_TOKEN", 4))

# model backend, "oracle" or "http"
MODEL_BACKEND = os.getenv("MODEL_BACKEND", "oracle")
ORACLE_FIXTURE = os.getenv("ORACLE_FIXTURE", "")
ORACLE_HORIZON_CHARS = int(os.getenv("ORACLE_HORIZON_CHARS", 64))
ORACLE_LATENCY_MS = int(os.getenv("ORACLE_LATENCY_MS", 200))
ORACLE_FAIL_RATE = int(os.getenv("ORACLE_FAIL_RATE", 0))
MODEL_ENDPOINT = os.getenv("MODEL_ENDPOINT", "")
MODEL_TIMEOUT_S = float(os.getenv("MODEL_TIMEOUT_S", 10))
MODEL_LATENCY_MS = int(os.getenv("MODEL_LATENCY_MS", 0))

# service
SERVE_LISTEN = os.getenv("SERVE_LISTEN", "127.0.0.1:8765")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': True,
    'formatters': {
        'verbose': {
            'format': '%(levelname)s %(asctime)s %(name)s %(funcName)s %(process)d '
                      '%(message)s'
        },
        'moderate': {
            'format': '%(levelname)s %(asctime)s %(module)s %(message)s'
        },
        'simple': {
            'format': '%(message)s',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose'
        },
        'info': {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': os.path.join(LOG_DIR, 'info.log'),
            'formatter': 'moderate',
        },
        'engine-debug': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': os.path.join(LOG_DIR, 'engine-debug.log'),
            'formatter': 'verbose',
        },
        'edits-debug': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': os.path.join(LOG_DIR, 'edits-debug.log'),
            'formatter': 'verbose',
        },
        'harness-debug': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': os.path.join(LOG_DIR, 'harness-debug.log'),
            'formatter': 'verbose',
        },
    },
    "loggers": {
        "django": {
            "handlers": ["console"], "level": "ERROR", },
        # logging for this project specifically
        "codeserve.session": {
            "handlers": ["info", "engine-debug"], "level": "DEBUG", },
        "codeserve.completion": {
            "handlers": ["info", "engine-debug"], "level": "DEBUG", },
        "codeserve.context": {
            "handlers": ["info", "engine-debug"], "level": "DEBUG", },
        "codeserve.backends": {
            "handlers": ["info", "engine-debug"], "level": "DEBUG", },
        "codeserve.edits": {
            "handlers": ["info", "edits-debug"], "level": "DEBUG", },
        "codeserve.metrics": {
            "handlers": ["info", "harness-debug"], "level": "DEBUG", },
        "codeserve.harness": {
            "handlers": ["info", "harness-debug"], "level": "DEBUG", },
        "codeserve.api": {
            "handlers": ["info"], "level": "INFO", },
        "codeserve.commands": {
            "handlers": ["console", "info"], "level": "INFO", },
        "codeserve.config": {
            "handlers": ["info", "harness-debug"], "level": "DEBUG", },
    },
}

if DEBUG:
    for name in ['codeserve.harness', 'codeserve.completion', 'codeserve.edits']:
        LOGGING['loggers'][name]['handlers'].append('console')
