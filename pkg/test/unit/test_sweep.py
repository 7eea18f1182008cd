import os
import tempfile
import unittest

from rfbpnet.sweep import SweepResult, SweepRow, parse_values, run_sweep
from rfbpnet.utils import ConfigurationError

from helpers import tiny_dataset, tiny_experiment_config


class ParseValuesTestCase(unittest.TestCase):
    def test_typed_values(self):
        self.assertEqual(parse_values('pairs', ['100', '200']), [100, 200])
        self.assertEqual(parse_values('alpha', ['0.5']), [0.5])
        self.assertEqual(parse_values('activation', ['relu']), ['relu'])

    def test_bad_values(self):
        with self.assertRaises(ConfigurationError):
            parse_values('pairs', ['many'])
        with self.assertRaises(ConfigurationError):
            parse_values('margin', ['1'])


class SweepResultTestCase(unittest.TestCase):
    def test_best_and_csv(self):
        result = SweepResult('alpha', [SweepRow(0.1, 0.9, 0.2, 0.7), SweepRow(0.5, 0.3, 0.9, -0.6),
                                       SweepRow(0.9, 0.8, 0.1, 0.7)])
        self.assertEqual(result.best().value, 0.1)
        self.assertEqual(result.to_csv().splitlines(),
                         ['value,id_acc,beh_acc,diff', '0.100000,0.900000,0.200000,0.700000',
                          '0.500000,0.300000,0.900000,-0.600000',
                          '0.900000,0.800000,0.100000,0.700000'])
        self.assertIsNone(SweepResult('alpha').best())


class RunSweepTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dataset = tiny_dataset()

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()  # pylint: disable=consider-using-with
        self.config = tiny_experiment_config(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_alpha(self):
        result = run_sweep('alpha', [0.0, 1.0], self.config, self.dataset)
        self.assertEqual([row.value for row in result.rows], [0.0, 1.0])
        for row in result.rows:
            self.assertAlmostEqual(row.diff, row.id_acc - row.beh_acc)
        self.assertTrue(os.path.exists(os.path.join(self.tmp.name, 'alpha_1.0', 'summary.json')))
        path = os.path.join(self.tmp.name, 'sweep.csv')
        result.write(path)
        with open(path, encoding='utf-8') as stream:
            self.assertEqual(stream.readline(), 'value,id_acc,beh_acc,diff\n')

    def test_pairs_share_one_pair_set(self):
        result = run_sweep('pairs', [12, 25, 24], self.config, self.dataset)
        self.assertEqual([row.value for row in result.rows], [12, 24])
        self.assertEqual([failure['value'] for failure in result.failures], [25])
        lines = {}
        for size in (12, 24):
            with open(os.path.join(self.tmp.name, 'pairs_%d' % size, 'pairs.csv'),
                      encoding='utf-8') as stream:
                lines[size] = stream.read().splitlines()
        self.assertEqual(lines[12], lines[24][:13])

    def test_users(self):
        result = run_sweep('users', [2, 3, 4], self.config, self.dataset)
        self.assertEqual([row.value for row in result.rows], [2, 3])
        self.assertEqual(len(result.failures), 1)
        self.assertIn('4 of 3', result.failures[0]['error'])

    def test_workers_do_not_change_rows(self):
        serial = run_sweep('feature_size', [2, 4], self.config, self.dataset)
        parallel = run_sweep('feature_size', [2, 4], self.config, self.dataset, workers=2)
        self.assertEqual(serial.rows, parallel.rows)

    def test_bad_sweeps(self):
        for parameter, values in (('margin', [1.0]), ('alpha', []), ('activation', ['swish'])):
            with self.assertRaises(ConfigurationError):
                run_sweep(parameter, values, self.config, self.dataset)
