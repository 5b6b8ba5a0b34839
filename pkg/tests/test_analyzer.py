#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試 ParameterAnalyzer 類別
"""

import unittest
import numpy as np
from pathlib import Path

# 添加src目錄到路徑
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from model_watermark_analyzer.analyzer import ParameterAnalyzer
from model_watermark_analyzer.checkpoint import ModelCheckpoint
from model_watermark_analyzer.error_handler import ShapeMismatchError
from model_watermark_analyzer.hashmark import Watermark
from model_watermark_analyzer.tinynet import Mlp


class TestParameterAnalyzer(unittest.TestCase):
    """測試 ParameterAnalyzer 類別"""

    def setUp(self):
        """設定測試環境"""
        self.analyzer = ParameterAnalyzer(bins=11)
        self.first = ModelCheckpoint.from_model(Mlp.initialize([2, 8, 8, 3], seed=0), 'hashmark')
        self.second = ModelCheckpoint.from_model(Mlp.initialize([2, 8, 8, 3], seed=1), 'clean')

    def test_calculate_statistics(self):
        """測試逐層統計"""
        stats = self.analyzer.calculate_statistics(self.first)
        self.assertEqual(len(stats), 6)
        self.assertEqual(list(stats['shape'][:2]), ['2x8', '8'])
        self.assertEqual(int(stats['count'].sum()), 24 + 72 + 27)
        self.assertAlmostEqual(stats['mean'][2], float(np.mean(self.first.layers[2])))

    def test_histograms(self):
        """同一層共用數值範圍，每個檢查點的計數總和等於參數量"""
        hist = self.analyzer.histograms({'a': self.first, 'b': self.second})
        self.assertEqual(list(hist.columns), ['checkpoint', 'layer', 'bin', 'left', 'right', 'count'])
        layer = hist[hist['layer'] == 2]
        for label in ('a', 'b'):
            with self.subTest(label=label):
                self.assertEqual(int(layer[layer['checkpoint'] == label]['count'].sum()), 64)
        np.testing.assert_array_equal(layer[layer['checkpoint'] == 'a']['left'].values,
                                      layer[layer['checkpoint'] == 'b']['left'].values)

    def test_histogram_distance(self):
        """相同分佈為 0，完全不相交為 2"""
        self.assertEqual(self.analyzer.histogram_distance(self.first, self.first, 2), 0.0)
        shifted = self.first.with_layers([p + 100.0 for p in self.first.layers])
        self.assertAlmostEqual(self.analyzer.histogram_distance(self.first, shifted, 2), 2.0)

    def test_constant_layer(self):
        """全零的偏差層仍可計算距離"""
        self.assertEqual(self.analyzer.histogram_distance(self.first, self.second, 1), 0.0)

    def test_distance_table(self):
        table = self.analyzer.distance_table({'a': self.first, 'b': self.second, 'c': self.first})
        self.assertEqual(list(table.columns), ['a', 'b', 'layer', 'l1_distance', 'threshold',
                                               'indistinguishable'])
        self.assertEqual(len(table), 3 * 6)
        same = table[(table['a'] == 'a') & (table['b'] == 'c')]
        self.assertTrue(same['indistinguishable'].all())

    def test_layer_count_mismatch(self):
        other = ModelCheckpoint.from_model(Mlp.initialize([2, 8, 3], seed=0), 'clean')
        with self.assertRaises(ShapeMismatchError):
            self.analyzer.distance_table({'a': self.first, 'b': other})

    def test_overlap_curve(self):
        """16 個參數、n = 4：第 4 輪存活數不足，曲線在第 3 輪截止"""
        owner = Watermark(np.array([1, 0, 1, 0]))
        fake = Watermark(np.array([0, 1, 1, 0]))
        curve = self.analyzer.overlap_curve(16, owner, [fake, owner], max_rounds=6)
        self.assertEqual(list(curve['rounds']), [1, 2, 3])
        np.testing.assert_allclose(curve['min_overlap'], [0.5, 0.0, 0.0])
        np.testing.assert_allclose(curve['max_overlap'], [1.0, 1.0, 1.0])
        self.assertEqual(list(curve['counterfeits']), [2, 2, 2])

    def test_analyze(self):
        owner = Watermark(np.array([1, 0, 1, 1]))
        results = self.analyzer.analyze({'a': self.first, 'b': self.second}, owner,
                                        [Watermark(np.array([0, 1, 1, 0]))], max_rounds=2)
        self.assertEqual(set(results), {'histograms', 'statistics', 'distances', 'overlap'})
        self.assertEqual(len(results['statistics']), 12)
        self.assertEqual(len(results['overlap']), 2)

        single = self.analyzer.analyze({'a': self.first})
        self.assertEqual(set(single), {'histograms', 'statistics'})

    def test_invalid_bins(self):
        with self.assertRaises(ValueError):
            ParameterAnalyzer(bins=0)


if __name__ == '__main__':
    unittest.main()
