from pathlib import Path
import os
import dj_database_url

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# The engine never serves requests; the key only satisfies Django's startup checks.
SECRET_KEY = os.environ.get('SECRET_KEY', 'django-insecure-sentiment-engine-local-only')

DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "sentiment",
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

# The run ledger lives in PostgreSQL when a URL is provided, SQLite otherwise
DATABASE_URL = os.environ.get('POSTGRES_URL') or os.environ.get('DATABASE_URL')

if DATABASE_URL:
    DATABASES = {
        'default': dj_database_url.config(
            default=DATABASE_URL,
            conn_max_age=600,
            conn_health_checks=True,
        )
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "sentiment": {
            "handlers": ["console"],
            "level": os.environ.get('SENTIMENT_LOG_LEVEL', 'INFO'),
            "propagate": False,
        },
    },
}


# Sentiment engine defaults
# Every key can be overridden per run from a config file or a command-line flag.

def _int_list(value):
    return [int(part) for part in value.split(',') if part.strip()]


SENTIMENT = {
    "SEED": int(os.environ.get('SENTIMENT_SEED', '42')),
    "MAX_LEN": int(os.environ.get('SENTIMENT_MAX_LEN', '400')),
    "MIN_FREQ": int(os.environ.get('SENTIMENT_MIN_FREQ', '1')),
    "EMBEDDING_DIM": int(os.environ.get('SENTIMENT_EMBEDDING_DIM', '300')),
    "OOV_SCALE": float(os.environ.get('SENTIMENT_OOV_SCALE', '0.25')),
    "HIDDEN_UNITS": int(os.environ.get('SENTIMENT_HIDDEN_UNITS', '150')),
    "FILTER_WIDTHS": _int_list(os.environ.get('SENTIMENT_FILTER_WIDTHS', '3,4,5')),
    "FILTERS_PER_WIDTH": int(os.environ.get('SENTIMENT_FILTERS_PER_WIDTH', '100')),
    "EPOCHS": int(os.environ.get('SENTIMENT_EPOCHS', '20')),
    "PATIENCE": int(os.environ.get('SENTIMENT_PATIENCE', '3')),
    "K_FOLDS": int(os.environ.get('SENTIMENT_K_FOLDS', '3')),
    "TEST_FRACTION": float(os.environ.get('SENTIMENT_TEST_FRACTION', '0.2')),
    "VALIDATION_FRACTION": float(os.environ.get('SENTIMENT_VALIDATION_FRACTION', '0.1')),
    "STOPWORDS_FILE": os.environ.get(
        'SENTIMENT_STOPWORDS_FILE', str(BASE_DIR / 'sentiment' / 'data' / 'urdu_stopwords.txt')
    ),
    "DEFAULT_GRID": {
        "dropout_rate": [0.5, 0.6, 0.8],
        "batch_size": [32],
        "learning_rate": [2e-05, 1e-4, 1e-3],
        "activation": ["softmax"],
    },
}
