import os
import tempfile
import unittest

import numpy as np

from rfbpnet.checkpoint import (MAGIC, CheckpointFormatError, CheckpointMismatchError,
                                load_checkpoint, pack_checkpoint, save_checkpoint,
                                unpack_checkpoint)
from rfbpnet.pairing import build_pairs
from rfbpnet.rfbp_net import RfbpNet
from rfbpnet.trainer import TrainConfig, train

from helpers import tiny_dataset, tiny_extractor_config


class CheckpointTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dataset = tiny_dataset()
        cls.net = RfbpNet(tiny_extractor_config(), seed=5)
        train(cls.net, build_pairs(cls.dataset, 12, seed=1), cls.dataset,
              TrainConfig(pairs=12, batches=2, epochs=1))

    def test_round_trip_reproduces_features(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'checkpoint.bin')
            save_checkpoint(self.net, path)
            loaded = load_checkpoint(path, tiny_extractor_config())
        np.testing.assert_array_equal(loaded.extract_batches(self.dataset.samples),
                                      self.net.extract_batches(self.dataset.samples))
        for (name, array), (_, original) in zip(loaded.buffers(), self.net.buffers()):
            np.testing.assert_array_equal(array, original, err_msg=name)
        self.assertEqual(loaded.metadata['epochs'], 1)

    def test_repack_is_bitwise(self):
        data = pack_checkpoint(self.net)
        self.assertTrue(data.startswith(MAGIC))
        self.assertEqual(pack_checkpoint(unpack_checkpoint(data)), data)

    def test_architecture_mismatch(self):
        data = pack_checkpoint(self.net)
        with self.assertRaises(CheckpointMismatchError) as context:
            unpack_checkpoint(data, tiny_extractor_config(feature_size=8))
        self.assertIn('feature_size', str(context.exception))

    def test_corrupt_data(self):
        data = pack_checkpoint(self.net)
        for broken in (data[:-4], data + b'\0\0\0\0', b'NOTACKPT' + data[8:], data[:10],
                       data[:12] + b'x' + data[13:]):
            with self.assertRaises(CheckpointFormatError):
                unpack_checkpoint(broken)

    def test_load_names_the_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'checkpoint.bin')
            with open(path, 'wb') as stream:
                stream.write(pack_checkpoint(self.net)[:-1])
            with self.assertRaises(CheckpointFormatError) as context:
                load_checkpoint(path)
        self.assertIn(path, str(context.exception))
