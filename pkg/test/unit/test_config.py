import json
import os
import tempfile
import unittest

from rfbpnet.config import (DEFAULT_THRESHOLD, ExperimentConfig, apply_overrides, build_config,
                            load_config, preset)
from rfbpnet.utils import ConfigurationError, ParameterError


class ExperimentConfigTestCase(unittest.TestCase):
    def test_defaults_validate(self):
        config = ExperimentConfig().validate()
        self.assertIsNone(config.dataset)
        self.assertEqual(config.threshold, DEFAULT_THRESHOLD)
        self.assertEqual(config.evaluator, 'mlp')
        self.assertEqual(config.validators, ['knn', 'nb', 'dt', 'svm', 'mlp', 'cnn'])

    def test_dict_round_trip(self):
        config = preset('wifi')
        self.assertEqual(ExperimentConfig.from_dict(config.to_dict()), config)

    def test_sections_merge_field_by_field(self):
        config = ExperimentConfig.from_dict({'train': {'epochs': 3}}, preset('rfid'))
        self.assertEqual(config.train.epochs, 3)
        self.assertEqual(config.train.alpha, 0.7)
        self.assertEqual(config.extractor.feature_size, 64)

    def test_unknown_keys(self):
        for values in ({'epochs': 3}, {'train': {'epoch': 3}}, {'train': 3}, [1]):
            with self.assertRaises(ConfigurationError):
                ExperimentConfig.from_dict(values)

    def test_invalid_values(self):
        for values in ({'threshold': 1.5}, {'validators': []}, {'workers': 0},
                       {'pair_balance': 'half'}, {'train': {'pairs': 1001}},
                       {'dataset': '/nonexistent/rfbpnet'}):
            with self.assertRaises(ConfigurationError):
                ExperimentConfig.from_dict(values).validate()
        with self.assertRaises(ParameterError):
            ExperimentConfig.from_dict({'train': {'alpha': -0.1}}).validate()

    def test_set_seed(self):
        config = ExperimentConfig()
        config.set_seed(7)
        self.assertEqual((config.synth.seed, config.pair_seed, config.train.seed,
                          config.split.seed), (7, 7, 7, 7))


class PresetTestCase(unittest.TestCase):
    def test_presets(self):
        rfid = preset('rfid')
        self.assertEqual(rfid.extractor.input_shape, [2, 30, 49])
        self.assertEqual((rfid.synth.num_users, rfid.synth.num_behaviors), (5, 10))
        wifi = preset('wifi')
        self.assertEqual(wifi.train.alpha, 0.8)
        self.assertEqual(wifi.extractor.feature_size, 128)
        self.assertEqual(wifi.extractor.num_identities, 10)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigurationError):
            preset('radar')


class OverridesTestCase(unittest.TestCase):
    def test_flags(self):
        config = apply_overrides(ExperimentConfig(), {
            'alpha': 0.9, 'pairs': 200, 'batches': 4, 'epochs': 5, 'feature_size': 32,
            'activation': 'tanh', 'seed': 3, 'out': 'elsewhere', 'batches_per_epoch': None})
        self.assertEqual((config.train.alpha, config.train.pairs, config.train.batches,
                          config.train.epochs), (0.9, 200, 4, 5))
        self.assertEqual(config.extractor.feature_size, 32)
        self.assertEqual(config.extractor.final_activation, 'tanh')
        self.assertEqual(config.split.seed, 3)
        self.assertEqual(config.out, 'elsewhere')

    def test_original_untouched(self):
        original = ExperimentConfig()
        apply_overrides(original, {'alpha': 0.1})
        self.assertEqual(original.train.alpha, 0.5)

    def test_unknown_flag(self):
        with self.assertRaises(ConfigurationError):
            apply_overrides(ExperimentConfig(), {'margin': 2.0})


class LoadConfigTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()  # pylint: disable=consider-using-with
        self.path = os.path.join(self.tmp.name, 'run.json')

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        with open(self.path, 'w', encoding='utf-8') as stream:
            stream.write(text)

    def test_layering(self):
        self.write(json.dumps({'train': {'alpha': 0.6, 'epochs': 9}, 'threshold': 0.5}))
        config = build_config(self.path, 'wifi', {'epochs': 2})
        self.assertEqual(config.train.alpha, 0.6)
        self.assertEqual(config.train.epochs, 2)
        self.assertEqual(config.threshold, 0.5)
        self.assertEqual(config.extractor.feature_size, 128)

    def test_unreadable(self):
        with self.assertRaises(ConfigurationError):
            load_config(self.path)
        self.write('{"train": ')
        with self.assertRaises(ConfigurationError):
            load_config(self.path)
