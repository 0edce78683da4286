"""Run configuration: settings defaults, presets, a JSON file and command-line flags.

Precedence, strongest first: flag, file, preset, ``settings.SENTIMENT``.
"""
import copy
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from django.conf import settings

from .corpus import DEFAULT_LABEL_MAP
from .exceptions import ConfigError
from .networks import ARCHITECTURES, PRESETS, HyperParams
from .textproc import Preprocessor

logger = logging.getLogger(__name__)

DEFAULT_ARCH = 'bilstm-slmfcnn'

# Hyperparameters fixed by the encoded corpus and the embedding file, not searchable.
STRUCTURAL_KEYS = ('max_len', 'embedding_dim')


@dataclass
class DataConfig:
    path: str = None
    text_column: str = 'text'
    label_column: str = 'label'
    label_map: dict = field(default_factory=lambda: dict(DEFAULT_LABEL_MAP))


@dataclass
class EmbeddingConfig:
    path: str = None
    trainable: bool = True
    oov_scale: float = 0.25


@dataclass
class PreprocessConfig:
    stopwords: str = None
    strip_diacritics: bool = False
    min_freq: int = 1
    max_len: int = 400
    subsample: str = None


SECTIONS = {
    'data': DataConfig,
    'embeddings': EmbeddingConfig,
    'preprocess': PreprocessConfig,
}
SCALARS = ('arch', 'preset', 'seed', 'out', 'jobs', 'k_folds', 'test_fraction', 'validation_fraction')


def _section(cls, values, name):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f'unknown key(s) in "{name}": {", ".join(unknown)}')
    return cls(**values)


def _merge(base: dict, update: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != 'label_map':
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def settings_defaults() -> dict:
    """The nested config every run starts from."""
    s = settings.SENTIMENT
    return {
        'data': {},
        'embeddings': {'oov_scale': s['OOV_SCALE']},
        'preprocess': {
            'stopwords': s['STOPWORDS_FILE'],
            'min_freq': s['MIN_FREQ'],
            'max_len': s['MAX_LEN'],
        },
        'hyperparams': {
            'embedding_dim': s['EMBEDDING_DIM'],
            'hidden_units': s['HIDDEN_UNITS'],
            'filter_widths': list(s['FILTER_WIDTHS']),
            'filters_per_width': s['FILTERS_PER_WIDTH'],
            'epochs': s['EPOCHS'],
            'patience': s['PATIENCE'],
        },
        'arch': DEFAULT_ARCH,
        'preset': None,
        'seed': s['SEED'],
        'out': 'runs',
        'jobs': 1,
        'k_folds': s['K_FOLDS'],
        'test_fraction': s['TEST_FRACTION'],
        'validation_fraction': s['VALIDATION_FRACTION'],
    }


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    embeddings: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    hyperparams: HyperParams = field(default_factory=HyperParams)
    arch: str = DEFAULT_ARCH
    preset: str = None
    seed: int = 42
    out: str = 'runs'
    jobs: int = 1
    k_folds: int = 3
    test_fraction: float = 0.2
    validation_fraction: float = 0.1

    @classmethod
    def from_dict(cls, data: dict):
        unknown = sorted(set(data) - set(SECTIONS) - {'hyperparams'} - set(SCALARS))
        if unknown:
            raise ConfigError(f'unknown configuration key(s): {", ".join(unknown)}')
        for name in (*SECTIONS, 'hyperparams'):
            if name in data and not isinstance(data[name], dict):
                raise ConfigError(f'"{name}" must be an object')
        sections = {name: _section(cls_, data.get(name, {}), name) for name, cls_ in SECTIONS.items()}
        hp_values = dict(data.get('hyperparams', {}))
        if 'max_len' in hp_values:
            raise ConfigError('set max_len under "preprocess", not "hyperparams"')
        hp_values['max_len'] = sections['preprocess'].max_len
        hp = HyperParams.from_dict(hp_values)
        scalars = {k: data[k] for k in SCALARS if k in data}
        return cls(hyperparams=hp, **sections, **scalars).validate()

    @classmethod
    def build(cls, file_data=None, overrides=None):
        """Layer settings defaults, the chosen preset, file values and flag values."""
        file_data = file_data or {}
        overrides = overrides or {}
        preset = overrides.get('preset') or file_data.get('preset')
        layered = settings_defaults()
        if preset:
            if preset not in PRESETS:
                raise ConfigError(f'unknown preset {preset!r}; choose one of {", ".join(PRESETS)}')
            layered = _merge(layered, {'hyperparams': PRESETS[preset], 'preset': preset})
        layered = _merge(layered, file_data)
        layered = _merge(layered, overrides)
        return cls.from_dict(layered)

    @classmethod
    def from_file(cls, path, overrides=None):
        path = Path(path)
        try:
            file_data = json.loads(path.read_text(encoding='utf-8'))
        except FileNotFoundError:
            raise ConfigError(f'config file {path} does not exist') from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f'{path}: line {exc.lineno}: {exc.msg}') from exc
        if not isinstance(file_data, dict):
            raise ConfigError(f'{path}: top level must be an object')
        logger.debug('read config %s', path)
        return cls.build(file_data, overrides)

    def validate(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f'unknown architecture {self.arch!r}; choose one of {", ".join(sorted(ARCHITECTURES))}')
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f'seed must be an integer, got {self.seed!r}')
        if self.jobs < 1:
            raise ConfigError('jobs must be at least 1')
        if self.k_folds < 2:
            raise ConfigError('k_folds must be at least 2')
        for name in ('test_fraction', 'validation_fraction'):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f'{name} must lie in [0, 1)')
        if self.preprocess.min_freq < 1:
            raise ConfigError('min_freq must be at least 1')
        if set(self.data.label_map.values()) != {0, 1}:
            raise ConfigError('label_map must map onto both classes 0 and 1')
        self.hyperparams.validate()
        return self

    def check_paths(self, require_data=True):
        """Every referenced file must exist before any work starts."""
        if require_data and not self.data.path:
            raise ConfigError('no dataset given; use --data or "data.path"')
        for label, value in (('dataset', self.data.path), ('embeddings', self.embeddings.path),
                             ('stopword file', self.preprocess.stopwords)):
            if value and not Path(value).is_file():
                raise ConfigError(f'{label} {value} does not exist')
        return self

    def preprocessor(self) -> Preprocessor:
        return Preprocessor.from_file(self.preprocess.stopwords, self.preprocess.strip_diacritics)

    def to_dict(self) -> dict:
        hp = self.hyperparams.to_dict()
        hp.pop('max_len')
        return {
            'data': vars(self.data).copy(),
            'embeddings': vars(self.embeddings).copy(),
            'preprocess': vars(self.preprocess).copy(),
            'hyperparams': hp,
            **{k: getattr(self, k) for k in SCALARS},
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + '\n'
        if path is not None:
            Path(path).write_text(text, encoding='utf-8')
        return text

    def with_hyperparams(self, hp: HyperParams):
        return replace(self, hyperparams=replace(hp, max_len=self.preprocess.max_len))


def load_grid(path=None) -> dict:
    """Read a grid file, or fall back to ``settings.SENTIMENT['DEFAULT_GRID']``."""
    if path is None:
        grid = copy.deepcopy(settings.SENTIMENT['DEFAULT_GRID'])
    else:
        try:
            grid = json.loads(Path(path).read_text(encoding='utf-8'))
        except FileNotFoundError:
            raise ConfigError(f'grid file {path} does not exist') from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f'{path}: line {exc.lineno}: {exc.msg}') from exc
    if not isinstance(grid, dict) or not grid:
        raise ConfigError('grid must be a non-empty object of candidate lists')
    fixed = sorted(set(grid) & set(STRUCTURAL_KEYS))
    if fixed:
        raise ConfigError(f'{", ".join(fixed)} cannot be searched over')
    return grid
