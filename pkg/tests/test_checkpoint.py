#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試檢查點二進位格式
"""

import unittest
import tempfile
import shutil
from pathlib import Path

import numpy as np

# 添加src目錄到路徑
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from model_watermark_analyzer.checkpoint import MAGIC, ModelCheckpoint
from model_watermark_analyzer.error_handler import CheckpointFormatError
from model_watermark_analyzer.tinynet import Mlp


class TestModelCheckpoint(unittest.TestCase):
    """測試 ModelCheckpoint"""

    def setUp(self):
        self.model = Mlp.initialize([2, 6, 3], seed=4)
        self.checkpoint = ModelCheckpoint.from_model(self.model, 'hashmark', filter_rounds=2)
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_bytes_are_reproducible(self):
        data = self.checkpoint.to_bytes()
        self.assertTrue(data.startswith(MAGIC))
        restored = ModelCheckpoint.from_bytes(data)
        self.assertEqual(restored.to_bytes(), data)
        self.assertEqual(restored.scheme, 'hashmark')
        self.assertEqual(restored.metadata['filter_rounds'], 2)
        for a, b in zip(restored.layers, self.model.params):
            np.testing.assert_array_equal(a, b)

    def test_save_and_load(self):
        path = self.checkpoint.save(Path(self.temp_dir) / "model.nmk")
        loaded = ModelCheckpoint.load(path)
        self.assertEqual(loaded.to_bytes(), self.checkpoint.to_bytes())

    def test_to_model(self):
        model = self.checkpoint.to_model()
        self.assertEqual(model.layer_sizes, [2, 6, 3])
        self.assertIsNone(model.velocity)

    def test_corrupted_inputs(self):
        data = self.checkpoint.to_bytes()
        cases = [
            (b"XXXX" + data[4:], "魔術字"),
            (data[:4] + (2).to_bytes(4, 'little') + data[8:], "版本"),
            (data[:-3], "截斷"),
            (data + b"\x00", "多餘位元組"),
        ]
        for corrupted, reason in cases:
            with self.subTest(reason=reason):
                with self.assertRaises(CheckpointFormatError):
                    ModelCheckpoint.from_bytes(corrupted)

    def test_oversized_layer_header(self):
        """層形狀的元素個數超過剩餘位元組時視為格式錯誤，不會溢位"""
        def u32(value):
            return value.to_bytes(4, 'little')

        for dims, reason in [((2 ** 32 - 1,) * 4, "乘積超過 64 位元"),
                             ((2 ** 16, 2 ** 16), "乘積恰為 2^32"),
                             ((1000,), "元素多於檔案內容")]:
            header = MAGIC + u32(1) + u32(1) + u32(len(dims)) + b"".join(u32(d) for d in dims)
            with self.subTest(reason=reason):
                with self.assertRaises(CheckpointFormatError):
                    ModelCheckpoint.from_bytes(header + b"\x00" * 64)

    def test_unknown_scheme(self):
        with self.assertRaises(ValueError):
            ModelCheckpoint.from_model(self.model, 'greedy')

    def test_with_layers_keeps_metadata(self):
        layers = [np.zeros_like(p) for p in self.checkpoint.layers]
        pruned = self.checkpoint.with_layers(layers, attack='prune')
        self.assertEqual(pruned.scheme, 'hashmark')
        self.assertEqual(pruned.metadata['attack'], 'prune')
        self.assertNotIn('attack', self.checkpoint.metadata)
        self.assertTrue(np.any(self.checkpoint.layers[0]))


if __name__ == '__main__':
    unittest.main()
