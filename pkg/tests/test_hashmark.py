#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試金鑰序列化、雜湊浮水印與檔案讀寫
"""

import struct
import unittest
import tempfile
import shutil
from pathlib import Path

import numpy as np

# 添加src目錄到路徑
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from model_watermark_analyzer.error_handler import KeyFormatError, WatermarkFormatError
from model_watermark_analyzer.hashmark import (SecretKey, Watermark, avalanche_score, generate_watermark,
                                               hamming_fraction, load_key, load_watermark, save_key,
                                               save_watermark, serialize_key, shake_bits)


class TestShakeBits(unittest.TestCase):
    """測試 SHAKE-256 位元展開"""

    def test_empty_input_vector(self):
        """空輸入的前 8 個位元組為 46 b9 dd 2b 0b a8 8d 13"""
        expected = np.unpackbits(np.array([0x46, 0xb9, 0xdd, 0x2b, 0x0b, 0xa8, 0x8d, 0x13], dtype=np.uint8))
        np.testing.assert_array_equal(shake_bits(b"", 64), expected)

    def test_msb_first_prefix(self):
        """0x46 由最高位元開始展開為 01000110"""
        np.testing.assert_array_equal(shake_bits(b"", 8), [0, 1, 0, 0, 0, 1, 1, 0])
        np.testing.assert_array_equal(shake_bits(b"", 5), [0, 1, 0, 0, 0])

    def test_invalid_length(self):
        with self.assertRaises(WatermarkFormatError):
            shake_bits(b"", 0)


class TestSerializeKey(unittest.TestCase):
    """測試金鑰序列化"""

    def test_little_endian_row_major(self):
        key = SecretKey(np.array([[1.0, 2.0], [3.0, -0.5]]))
        self.assertEqual(serialize_key(key), struct.pack('<4d', 1.0, 2.0, 3.0, -0.5))

    def test_length_includes_aux(self):
        key = SecretKey.sample(3, 5, 0)
        self.assertEqual(len(serialize_key(key)), 8 * 3 * 5)
        self.assertEqual(len(serialize_key(key, b"owner")), 8 * 3 * 5 + 5)

    def test_non_finite_index(self):
        """非有限值回報 (row, col)"""
        with self.assertRaises(KeyFormatError) as ctx:
            SecretKey(np.array([[1.0, 2.0], [np.nan, 0.0]]))
        self.assertEqual(ctx.exception.index, (1, 0))

        with self.assertRaises(KeyFormatError):
            SecretKey(np.array([1.0, 2.0]))

    def test_key_is_read_only(self):
        key = SecretKey.sample(2, 2, 0)
        with self.assertRaises(ValueError):
            key.values[0, 0] = 5.0


class TestGenerateWatermark(unittest.TestCase):
    """測試雜湊浮水印產生"""

    def setUp(self):
        self.key = SecretKey.sample(64, 64, 7)

    def test_deterministic(self):
        first = generate_watermark(self.key)
        second = generate_watermark(SecretKey(self.key.values.copy()))
        self.assertEqual(first, second)
        self.assertEqual(first.n, 64)

    def test_matches_shake_of_serialization(self):
        expected = shake_bits(serialize_key(self.key, b"ctx"), 64)
        np.testing.assert_array_equal(generate_watermark(self.key, b"ctx").bits, expected)

    def test_aux_changes_watermark(self):
        self.assertNotEqual(generate_watermark(self.key), generate_watermark(self.key, b"ctx"))

    def test_length_must_match_columns(self):
        with self.assertRaises(WatermarkFormatError):
            generate_watermark(self.key, n=32)
        with self.assertRaises(WatermarkFormatError):
            generate_watermark(self.key, n=0)


class TestAvalanche(unittest.TestCase):
    """測試雪崩效應"""

    def test_single_flip_near_half(self):
        """每次試驗約為 Binomial(n, 1/2)/n，200 次平均落在 ±4σ 之內"""
        for n in (64, 256):
            with self.subTest(n=n):
                key = SecretKey.sample(8, n, n)
                score = avalanche_score(key, trials=200, rng_seed=1)
                sigma = 0.5 / np.sqrt(n * 200)
                self.assertLess(abs(score - 0.5), 4 * sigma)

    def test_zero_flips(self):
        key = SecretKey.sample(4, 16, 0)
        self.assertEqual(avalanche_score(key, trials=3, rng_seed=0, flips=0), 0.0)

    def test_invalid_trials(self):
        key = SecretKey.sample(4, 16, 0)
        with self.assertRaises(ValueError):
            avalanche_score(key, trials=0, rng_seed=0)

    def test_hamming_fraction(self):
        self.assertEqual(hamming_fraction(np.array([0, 1, 1, 0]), np.array([0, 1, 0, 1])), 0.5)


class TestArtifactFiles(unittest.TestCase):
    """測試金鑰與浮水印檔案"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.key = SecretKey.sample(4, 8, 3)
        self.watermark = generate_watermark(self.key)

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_key_file(self):
        path = save_key(Path(self.temp_dir) / "key.bin", self.key)
        self.assertEqual(path.stat().st_size, 8 * 4 * 8)
        self.assertEqual(load_key(path, 4, 8), self.key)
        with self.assertRaises(KeyFormatError):
            load_key(path, 4, 4)

    def test_watermark_file(self):
        path = save_watermark(Path(self.temp_dir) / "wm.txt", self.watermark)
        text = path.read_text(encoding='ascii')
        self.assertEqual(len(text), 9)
        self.assertTrue(text.endswith("\n"))
        self.assertEqual(load_watermark(path, 8), self.watermark)

    def test_watermark_text_errors(self):
        cases = [
            ("0101", "缺少換行"),
            ("01x1\n", "非法字元"),
            ("\n", "空內容"),
            ("010\n", "長度不符"),
        ]
        for text, reason in cases:
            with self.subTest(reason=reason):
                with self.assertRaises(WatermarkFormatError):
                    Watermark.from_text(text, 4)

    def test_non_ascii_watermark_file(self):
        path = Path(self.temp_dir) / "bad.txt"
        path.write_bytes("01０1\n".encode('utf-8'))
        with self.assertRaises(WatermarkFormatError):
            load_watermark(path)

    def test_invalid_bits(self):
        with self.assertRaises(WatermarkFormatError):
            Watermark(np.array([0, 1, 2]))


if __name__ == '__main__':
    unittest.main()
