import json
import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase, override_settings

from sentiment.config import RunConfig, load_grid
from sentiment.exceptions import ConfigError


class RunConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, data, name='config.json'):
        path = Path(self.tmp.name) / name
        path.write_text(data if isinstance(data, str) else json.dumps(data), encoding='utf-8')
        return path

    def test_settings_defaults(self):
        cfg = RunConfig.build()
        self.assertEqual(cfg.arch, 'bilstm-slmfcnn')
        self.assertEqual(cfg.seed, settings.SENTIMENT['SEED'])
        self.assertEqual(cfg.hyperparams.max_len, cfg.preprocess.max_len)
        self.assertEqual(cfg.hyperparams.filter_widths, (3, 4, 5))

    @override_settings(SENTIMENT={**settings.SENTIMENT, 'EPOCHS': 7, 'MAX_LEN': 50})
    def test_settings_are_the_bottom_layer(self):
        cfg = RunConfig.build()
        self.assertEqual(cfg.hyperparams.epochs, 7)
        self.assertEqual(cfg.hyperparams.max_len, 50)

    def test_precedence(self):
        file_data = {'preset': 'imdb-medium', 'hyperparams': {'dropout_rate': 0.3, 'batch_size': 8}, 'seed': 1}
        cfg = RunConfig.build(file_data, {'seed': 9, 'hyperparams': {'batch_size': 16}})
        self.assertEqual(cfg.hyperparams.learning_rate, 0.001)
        self.assertEqual(cfg.hyperparams.dropout_rate, 0.3)
        self.assertEqual(cfg.hyperparams.batch_size, 16)
        self.assertEqual(cfg.seed, 9)

    def test_flag_preset_overrides_file_preset(self):
        cfg = RunConfig.build({'preset': 'imdb-medium'}, {'preset': 'vtc'})
        self.assertEqual(cfg.preset, 'vtc')
        self.assertEqual(cfg.hyperparams.learning_rate, 2e-05)

    def test_label_map_is_replaced_not_merged(self):
        cfg = RunConfig.build({'data': {'label_map': {'pos': 1, 'neg': 0}}})
        self.assertEqual(cfg.data.label_map, {'pos': 1, 'neg': 0})

    def test_unknown_keys(self):
        with self.assertRaisesMessage(ConfigError, 'learning_rte'):
            RunConfig.build({'learning_rte': 0.1})
        with self.assertRaisesMessage(ConfigError, 'delimiter'):
            RunConfig.build({'data': {'delimiter': ';'}})
        with self.assertRaisesMessage(ConfigError, 'momentum'):
            RunConfig.build({'hyperparams': {'momentum': 0.9}})

    def test_max_len_belongs_to_preprocess(self):
        with self.assertRaisesMessage(ConfigError, 'preprocess'):
            RunConfig.build({'hyperparams': {'max_len': 10}})

    def test_invalid_values(self):
        for data in ({'arch': 'rnn'}, {'preset': 'imdb-huge'}, {'seed': 'x'}, {'k_folds': 1},
                     {'test_fraction': 1.0}, {'hyperparams': {'dropout_rate': 1.5}},
                     {'data': {'label_map': {'yes': 1}}}):
            with self.assertRaises(ConfigError, msg=repr(data)):
                RunConfig.build(data)

    def test_from_file_errors(self):
        with self.assertRaisesMessage(ConfigError, 'line 2'):
            RunConfig.from_file(self.write('{\n  "seed": ,\n}'))
        with self.assertRaises(ConfigError):
            RunConfig.from_file(self.write('[1, 2]'))
        with self.assertRaisesMessage(ConfigError, 'does not exist'):
            RunConfig.from_file(Path(self.tmp.name) / 'absent.json')

    def test_check_paths(self):
        with self.assertRaisesMessage(ConfigError, 'no dataset'):
            RunConfig.build().check_paths()
        RunConfig.build().check_paths(require_data=False)
        with self.assertRaisesMessage(ConfigError, 'embeddings'):
            RunConfig.build({'embeddings': {'path': '/nonexistent/vectors.txt'}}).check_paths(False)

    def test_json_round_trip(self):
        cfg = RunConfig.build({'preset': 'vtc', 'preprocess': {'max_len': 64}, 'seed': 3})
        path = Path(self.tmp.name) / 'saved.json'
        cfg.to_json(path)
        saved = json.loads(path.read_text(encoding='utf-8'))
        self.assertNotIn('max_len', saved['hyperparams'])
        self.assertEqual(RunConfig.from_file(path), cfg)

    def test_with_hyperparams_keeps_max_len(self):
        cfg = RunConfig.build({'preprocess': {'max_len': 64}})
        updated = cfg.with_hyperparams(RunConfig.build().hyperparams)
        self.assertEqual(updated.hyperparams.max_len, 64)


class GridFileTests(SimpleTestCase):
    def test_default_grid(self):
        grid = load_grid()
        self.assertEqual(grid['dropout_rate'], [0.5, 0.6, 0.8])
        grid['dropout_rate'].append(0.9)
        self.assertEqual(load_grid()['dropout_rate'], [0.5, 0.6, 0.8])

    def test_structural_keys_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'grid.json'
            path.write_text(json.dumps({'max_len': [100, 200]}), encoding='utf-8')
            with self.assertRaisesMessage(ConfigError, 'max_len cannot be searched'):
                load_grid(path)

    def test_missing_grid_file(self):
        with self.assertRaises(ConfigError):
            load_grid('/nonexistent/grid.json')
