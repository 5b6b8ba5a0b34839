#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試偽造、覆寫、微調與剪枝攻擊
"""

import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np

# 添加src目錄到路徑
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from model_watermark_analyzer.attacks import (adversary_tuple, evaluate_success, finetune, forge_attack,
                                              forge_random, overwrite, overwrite_sweep, prune, prune_layer,
                                              prune_sweep)
from model_watermark_analyzer.checkpoint import ModelCheckpoint
from model_watermark_analyzer.config import ExperimentConfig
from model_watermark_analyzer.embedder import WatermarkTuple, train_watermarked
from model_watermark_analyzer.error_handler import ConfigError
from model_watermark_analyzer.tinynet import Mlp, TrainConfig, make_blobs, relabel
from model_watermark_analyzer.utils import STREAM_KEY, STREAM_RELABEL, derive_rng, derive_seed
from model_watermark_analyzer.vanilla import VanillaTuple, vanilla_train
from model_watermark_analyzer.verifier import verify


def small_config():
    """2-16-16-3 網路、n = 16、k = 8、R = 1"""
    return TrainConfig(hidden_sizes=(16, 16), watermark_len=16, key_rows=8, filter_rounds=1,
                       epochs=5, batch_size=20)


class TestEvaluateSuccess(unittest.TestCase):
    """測試攻擊成功準則"""

    def test_forge(self):
        self.assertTrue(evaluate_success('forge', 1.0, 0.9, 0.9, 0.9, adversary_verdict=True))
        self.assertFalse(evaluate_success('forge', 0.0, 0.9, 0.9, 0.9, adversary_verdict=False))

    def test_removal_attacks(self):
        cases = [
            (('prune', 0.5, 0.9, 0.95, 0.93), True, "移除且效能維持"),
            (('prune', 0.95, 0.9, 0.95, 0.93), False, "浮水印仍在"),
            (('finetune', 0.5, 0.9, 0.95, 0.80), False, "效能下降過多"),
            (('finetune', 0.5, 0.9, 0.95, 0.90), True, "剛好在容許範圍"),
        ]
        for args, expected, reason in cases:
            with self.subTest(reason=reason):
                self.assertEqual(evaluate_success(*args), expected)

    def test_overwrite_needs_adversary(self):
        self.assertTrue(evaluate_success('overwrite', 0.5, 0.9, 0.95, 0.95, adversary_verdict=True))
        self.assertFalse(evaluate_success('overwrite', 0.5, 0.9, 0.95, 0.95, adversary_verdict=False))
        # 兩個浮水印並存不算成功
        self.assertFalse(evaluate_success('overwrite', 0.95, 0.9, 0.95, 0.95, adversary_verdict=True))

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            evaluate_success('steal', 0.5, 0.9, 0.9, 0.9)


class TestForgery(unittest.TestCase):
    """隨機偽造對凍結模型的偵測率"""

    def setUp(self):
        self.config = TrainConfig()
        model = Mlp.initialize([2, 64, 64, 4], seed=0)
        self.checkpoint = ModelCheckpoint.from_model(model, 'hashmark')
        self.owner = WatermarkTuple.create(64, 64, 0)

    def test_forged_rates_near_half(self):
        before = self.checkpoint.to_bytes()
        rhos = forge_random(self.checkpoint, self.config, trials=50, seed=3)
        self.assertEqual(len(rhos), 50)
        self.assertGreaterEqual(np.mean(rhos), 0.38)
        self.assertLessEqual(np.mean(rhos), 0.62)
        self.assertLess(max(rhos), 57 / 64)
        self.assertEqual(self.checkpoint.to_bytes(), before)

    def test_forge_report(self):
        report = forge_attack(self.checkpoint, self.owner, self.config, make_blobs(40, 4, 2, 0.5, seed=0),
                              trials=10, seed=3)
        self.assertEqual(report.attack_kind, 'forge')
        self.assertFalse(report.adversary_verdict)
        self.assertFalse(report.success)
        self.assertEqual(len(report.attack_params['rhos']), 10)
        self.assertEqual(report.accuracy_before, report.accuracy_after)

    def test_adversary_tuples(self):
        first = adversary_tuple(self.config, 3, 0)
        self.assertTrue(first.is_hash_consistent())
        self.assertFalse(np.array_equal(first.key.values, adversary_tuple(self.config, 3, 1).key.values))
        self.assertFalse(adversary_tuple(self.config, 3, 0, hash_consistent=False).is_hash_consistent())

    def test_invalid_trials(self):
        with self.assertRaises(ValueError):
            forge_random(self.checkpoint, self.config, trials=0, seed=0)


class TestTrainedAttacks(unittest.TestCase):
    """對小型浮水印模型執行覆寫、微調與剪枝"""

    @classmethod
    def setUpClass(cls):
        cls.config = small_config()
        cls.data = make_blobs(60, 3, 2, 0.5, seed=0)
        cls.test_set = make_blobs(30, 3, 2, 0.5, seed=1)
        cls.owner = WatermarkTuple.create(8, 16, 0)
        cls.training_run = train_watermarked(cls.data, cls.owner, cls.config, cls.test_set)
        cls.checkpoint = cls.training_run.checkpoint

    def test_overwrite_structure(self):
        before = self.checkpoint.to_bytes()
        adversary = adversary_tuple(self.config, 7)
        attacked, report = overwrite(self.checkpoint, self.data, adversary, 1.0, 0.01, 2, 7,
                                     self.owner, self.config, self.test_set)
        self.assertIsNotNone(attacked)
        self.assertEqual(attacked.metadata['attack'], 'overwrite')
        self.assertEqual(report.attack_kind, 'overwrite')
        self.assertFalse(report.diverged)
        self.assertIsNotNone(report.adversary_rho)
        self.assertEqual(report.original_rho_before, verify(self.checkpoint, self.owner, self.config).rho)
        self.assertEqual(report.attack_params['adversary_rounds'], 1)
        self.assertEqual(self.checkpoint.to_bytes(), before)

    def test_overwrite_divergence(self):
        adversary = adversary_tuple(self.config, 7)
        with np.errstate(all='ignore'):
            attacked, report = overwrite(self.checkpoint, self.data, adversary, 1.0, 1e6, 40, 7,
                                         self.owner, self.config)
        self.assertIsNone(attacked)
        self.assertTrue(report.diverged)
        self.assertFalse(report.success)

    def test_overwrite_sweep_table(self):
        adversary = adversary_tuple(self.config, 7)
        result = overwrite_sweep(self.checkpoint, self.data, adversary, [0.0, 1.0], [0.01], 1, 7,
                                 self.owner, self.config, self.test_set)
        self.assertEqual(len(result.table), 2)
        self.assertEqual(list(result.table.columns),
                         ['lam_a', 'lr_a', 'original_rho', 'adversary_rho', 'accuracy_before',
                          'accuracy_after', 'success'])
        self.assertEqual(len(result.checkpoints), 2)

    def test_finetune_zero_epochs(self):
        attacked, report = finetune(self.checkpoint, self.data, 'all', 0.01, 0, 0, self.owner, self.config)
        self.assertEqual(attacked.to_bytes(), self.checkpoint.to_bytes())
        self.assertEqual(report.original_rho, report.original_rho_before)
        self.assertFalse(report.success)

    def test_finetune_watermark_layer_scope(self):
        attacked, report = finetune(self.checkpoint, relabel(self.data, 4), 'watermark_layer', 0.01, 2, 0,
                                    self.owner, self.config, self.test_set)
        for tensor in (0, 1, 3):
            with self.subTest(tensor=tensor):
                np.testing.assert_array_equal(attacked.layers[tensor], self.checkpoint.layers[tensor])
        self.assertFalse(np.array_equal(attacked.layers[4], self.checkpoint.layers[4]))
        self.assertEqual(report.attack_params['scope'], 'watermark_layer')

    def test_finetune_invalid_scope(self):
        with self.assertRaises(ValueError):
            finetune(self.checkpoint, self.data, 'head', 0.01, 1, 0, self.owner, self.config)

    def test_prune_zero_ratio(self):
        attacked, report = prune(self.checkpoint, 0.0, 2, 0, self.owner, self.config, self.test_set)
        for a, b in zip(attacked.layers, self.checkpoint.layers):
            np.testing.assert_array_equal(a, b)
        self.assertEqual(report.original_rho, report.original_rho_before)
        self.assertEqual(report.accuracy_after, report.accuracy_before)
        self.assertEqual(report.attack_params['zeroed'], 0)

    def test_prune_sweep_table(self):
        result = prune_sweep(self.checkpoint, [0.0, 0.2, 0.4, 0.6, 0.8], 2, 0, self.owner, self.config,
                             self.test_set)
        self.assertEqual(list(result.table.columns), ['ratio', 'rho', 'accuracy'])
        self.assertEqual(len(result.table), 5)
        self.assertEqual(list(result.table['ratio']), [0.0, 0.2, 0.4, 0.6, 0.8])

    def test_prune_invalid_layer(self):
        with self.assertRaises(ConfigError):
            prune(self.checkpoint, 0.5, 9, 0, self.owner, self.config, self.test_set)


class TestPruneLayer(unittest.TestCase):
    """測試單層剪枝"""

    def test_zeroes_floor_of_ratio(self):
        cases = [(0.3, 30), ("0.35", 35), (1.0, 100), (0.0, 0), (0.999, 99)]
        for ratio, expected in cases:
            with self.subTest(ratio=ratio):
                pruned, zeroed = prune_layer(np.ones((10, 10)), ratio, seed=0)
                self.assertEqual(pruned.shape, (10, 10))
                self.assertEqual(int(np.sum(pruned == 0)), expected)
                self.assertEqual(len(zeroed), expected)

    def test_invalid_ratio(self):
        with self.assertRaises(ValueError):
            prune_layer(np.ones(4), 1.5, seed=0)


class TestDeskRobustness(unittest.TestCase):
    """桌面規模設定下的覆寫、剪枝與微調"""

    @classmethod
    def setUpClass(cls):
        cls.experiment = ExperimentConfig()
        cls.config = cls.experiment.to_train_config()
        cls.train_set = cls.experiment.train_dataset()
        cls.test_set = cls.experiment.test_dataset()
        cls.rho_star = 57 / 64

        cls.owner = WatermarkTuple.create(64, 64, derive_rng(0, STREAM_KEY))
        cls.checkpoint = train_watermarked(cls.train_set, cls.owner, cls.config, cls.test_set).checkpoint
        cls.unpooled = train_watermarked(cls.train_set, cls.owner, replace(cls.config, pooling=False),
                                         cls.test_set).checkpoint

        cls.vanilla_owner = VanillaTuple.create(64, 64, derive_rng(0, STREAM_KEY))
        cls.vanilla_checkpoint = vanilla_train(cls.train_set, cls.vanilla_owner, cls.config,
                                               cls.test_set).checkpoint

    def test_trained_owner_verdict(self):
        report = verify(self.checkpoint, self.owner, self.config)
        self.assertEqual(report.rho, 1.0)

    def test_overwrite_leaves_owner_above_boundary(self):
        adversary = adversary_tuple(self.config, seed=1)
        result = overwrite_sweep(self.checkpoint, self.train_set, adversary, self.experiment.attack_lams,
                                 self.experiment.attack_lrs, self.experiment.attack_epochs, 1,
                                 self.owner, self.config, self.test_set)
        self.assertEqual(len(result.reports), 3)
        for report in result.reports:
            lam_a = report.attack_params['lam_a']
            with self.subTest(lam_a=lam_a):
                self.assertFalse(report.diverged)
                self.assertGreaterEqual(report.original_rho, self.rho_star)
                self.assertTrue(report.adversary_verdict)
                self.assertFalse(report.success)
                if lam_a == 100.0:
                    self.assertEqual(report.adversary_rho, 1.0)

    def test_overwrite_breaks_vanilla_owner(self):
        adversary = VanillaTuple.create(64, 64, derive_rng(1, STREAM_KEY))
        _, report = overwrite(self.vanilla_checkpoint, self.train_set, adversary, 100.0,
                              self.experiment.attack_lrs[0], self.experiment.attack_epochs, 1,
                              self.vanilla_owner, self.config, self.test_set)
        self.assertFalse(report.diverged)
        self.assertGreaterEqual(report.original_rho_before, self.rho_star)
        self.assertLess(report.original_rho, self.rho_star)

    def test_prune_keeps_owner_above_boundary(self):
        result = prune_sweep(self.checkpoint, [0.2, 0.4, 0.6], 2, 0, self.owner, self.config, self.test_set)
        for ratio, rho in zip(result.table['ratio'], result.table['rho']):
            with self.subTest(ratio=ratio):
                self.assertGreaterEqual(rho, self.rho_star)

    def test_pooling_survives_heavier_pruning(self):
        unpooled_config = replace(self.config, pooling=False)
        _, pooled = prune(self.checkpoint, 0.6, 2, 0, self.owner, self.config, self.test_set)
        _, unpooled = prune(self.unpooled, 0.6, 2, 0, self.owner, unpooled_config, self.test_set)
        self.assertGreater(pooled.original_rho, unpooled.original_rho)

    def test_finetune_on_relabeled_task(self):
        relabel_seed = derive_seed(self.experiment.seed, STREAM_RELABEL)
        _, report = finetune(self.checkpoint, relabel(self.train_set, relabel_seed), 'all',
                             self.experiment.finetune_lr, self.experiment.attack_epochs, 0,
                             self.owner, self.config, relabel(self.test_set, relabel_seed))
        self.assertEqual(report.original_rho, 1.0)
        self.assertFalse(report.success)


if __name__ == '__main__':
    unittest.main()
