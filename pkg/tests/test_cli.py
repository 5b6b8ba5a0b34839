#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
測試命令列介面與結束碼
"""

import io
import json
import unittest
import tempfile
import shutil
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pandas as pd

# 添加src目錄到路徑
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from model_watermark_analyzer.cli import main
from model_watermark_analyzer.config import load_config
from model_watermark_analyzer.error_handler import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VERDICT_FALSE


def run_cli(*argv):
    """執行命令列並回傳 (結束碼, 標準輸出)"""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue()


class TestBoundaryCommand(unittest.TestCase):
    """測試 boundary 子命令"""

    def test_n256(self):
        code, output = run_cli('boundary', '--n', 256, '--log2-target', '-128')
        self.assertEqual(code, EXIT_OK)
        self.assertIn("227/256", output)
        self.assertIn("t = 226", output)

    def test_default_target(self):
        """預設 n = 64、目標 2^-32"""
        code, output = run_cli('boundary')
        self.assertEqual(code, EXIT_OK)
        self.assertIn("57/64", output)

    def test_bound_for_rate(self):
        code, output = run_cli('boundary', '--n', 64, '--rho', '57/64')
        self.assertEqual(code, EXIT_OK)
        self.assertIn("至少 57 位相符", output)

    def test_enumeration_example(self):
        code, output = run_cli('boundary', '--n', 4, '--rho', '0.75')
        self.assertEqual(code, EXIT_OK)
        self.assertIn("5/16 = 0.3125", output)

    def test_unreachable(self):
        code, _ = run_cli('boundary', '--n', 8, '--log2-target', '-10')
        self.assertEqual(code, EXIT_VERDICT_FALSE)

    def test_usage_errors(self):
        cases = [
            (('boundary', '--log2-target', '5'), "目標必須為負"),
            ((), "缺少子命令"),
            (('boundary', '--log2-target', '-1', '--rho', '0.5'), "互斥參數"),
        ]
        for argv, reason in cases:
            with self.subTest(reason=reason):
                code, _ = run_cli(*argv)
                self.assertEqual(code, EXIT_USAGE)


class TestWorkflow(unittest.TestCase):
    """訓練、驗證、攻擊與分析的完整流程"""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = Path(tempfile.mkdtemp())
        cls.run_dir = cls.temp_dir / "train"
        cls.train_code, cls.train_output = run_cli('train', '--out', cls.run_dir)
        cls.artifacts = ['--checkpoint', cls.run_dir / "model.nmk",
                         '--key', cls.run_dir / "key.bin",
                         '--watermark', cls.run_dir / "watermark.txt"]

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.temp_dir)

    def test_train_outputs(self):
        self.assertEqual(self.train_code, EXIT_OK)
        for name in ('config.txt', 'model.nmk', 'key.bin', 'watermark.txt', 'curves.csv',
                     'train_report.json', 'summary.md'):
            with self.subTest(name=name):
                self.assertTrue((self.run_dir / name).exists())
        self.assertEqual(len(pd.read_csv(self.run_dir / "curves.csv")), 200)
        self.assertEqual((self.run_dir / "key.bin").stat().st_size, 64 * 64 * 8)

    def test_verify_matches_train(self):
        out_dir = self.temp_dir / "verify"
        code, output = run_cli('verify', *self.artifacts, '--out', out_dir)
        self.assertEqual(code, self.train_code)
        self.assertIn("=== 驗證結果 ===", output)
        report = json.loads((out_dir / "verify_report.json").read_text(encoding='utf-8'))
        train_report = json.loads((self.run_dir / "train_report.json").read_text(encoding='utf-8'))
        self.assertEqual(report['matches'], train_report['matches'])
        curves = pd.read_csv(self.run_dir / "curves.csv")
        self.assertTrue(train_report['verdict'])
        self.assertEqual(report['rho'], 1.0)
        self.assertAlmostEqual(curves['rho'].iloc[-1], report['rho'])
        self.assertTrue(report['hash_consistent'])

    def test_verify_rejects_flipped_bit(self):
        bits = (self.run_dir / "watermark.txt").read_text(encoding='ascii')
        flipped = ('1' if bits[0] == '0' else '0') + bits[1:]
        path = self.temp_dir / "flipped.txt"
        path.write_text(flipped, encoding='ascii')
        code, output = run_cli('verify', '--checkpoint', self.run_dir / "model.nmk",
                               '--key', self.run_dir / "key.bin", '--watermark', path)
        self.assertEqual(code, EXIT_VERDICT_FALSE)
        self.assertIn("雜湊一致：否", output)

    def test_input_errors(self):
        corrupted = self.temp_dir / "corrupted.txt"
        corrupted.write_text("0101x\n", encoding='ascii')
        bad_config = self.temp_dir / "bad.txt"
        bad_config.write_text("colour = red\n", encoding='utf-8')
        cases = [
            (('verify', '--checkpoint', self.temp_dir / "missing.nmk",
              '--key', self.run_dir / "key.bin", '--watermark', self.run_dir / "watermark.txt"),
             EXIT_IO, "檢查點不存在"),
            (('verify', '--checkpoint', self.run_dir / "model.nmk",
              '--key', self.run_dir / "key.bin", '--watermark', corrupted), EXIT_IO, "浮水印檔案損壞"),
            (('verify', '--checkpoint', self.run_dir / "model.nmk"), EXIT_USAGE, "缺少金鑰"),
            (('boundary', '--config', bad_config), EXIT_USAGE, "未知的設定鍵"),
        ]
        for argv, expected, reason in cases:
            with self.subTest(reason=reason):
                code, _ = run_cli(*argv)
                self.assertEqual(code, expected)

    def test_prune_attack(self):
        out_dir = self.temp_dir / "prune"
        code, _ = run_cli('attack', 'prune', *self.artifacts, '--out', out_dir)
        self.assertEqual(code, EXIT_OK)
        table = pd.read_csv(out_dir / "prune_sweep.csv")
        self.assertEqual(list(table.columns), ['ratio', 'rho', 'accuracy'])
        self.assertEqual(len(table), 5)
        self.assertTrue((out_dir / "prune_0.40.nmk").exists())

    def test_forge_attack(self):
        out_dir = self.temp_dir / "forge"
        code, _ = run_cli('attack', 'forge', *self.artifacts, '--trials', 3, '--out', out_dir)
        self.assertEqual(code, EXIT_OK)
        report = json.loads((out_dir / "forge_report.json").read_text(encoding='utf-8'))
        self.assertFalse(report['success'])
        self.assertEqual(len(report['attack_params']['rhos']), 3)

    def test_config_in_output_dir_is_kept(self):
        out_dir = self.temp_dir / "reuse"
        out_dir.mkdir()
        config_path = out_dir / "config.txt"
        config_path.write_text("epochs = 1\n", encoding='utf-8')
        code, _ = run_cli('train', '--config', config_path, '--out', out_dir)
        self.assertIn(code, (EXIT_OK, EXIT_VERDICT_FALSE))
        self.assertEqual(config_path.read_text(encoding='utf-8'), "epochs = 1\n")
        resolved = load_config(out_dir / "config.resolved.txt")
        self.assertEqual(resolved.epochs, 1)
        self.assertEqual(len(pd.read_csv(out_dir / "curves.csv")), 1)

    def test_train_is_deterministic(self):
        first, second = self.temp_dir / "repeat_a", self.temp_dir / "repeat_b"
        run_cli('train', '--epochs', 1, '--out', first)
        run_cli('train', '--epochs', 1, '--out', second)
        self.assertEqual((first / "model.nmk").read_bytes(), (second / "model.nmk").read_bytes())
        self.assertEqual((first / "key.bin").read_bytes(), (second / "key.bin").read_bytes())

    def test_analyze(self):
        out_dir = self.temp_dir / "analyze"
        clean_dir = self.temp_dir / "clean"
        code, _ = run_cli('train', '--scheme', 'clean', '--epochs', 1, '--out', clean_dir)
        self.assertEqual(code, EXIT_OK)
        self.assertFalse((clean_dir / "key.bin").exists())

        code, _ = run_cli('analyze', clean_dir / "model.nmk", self.run_dir / "model.nmk",
                          '--watermark', self.run_dir / "watermark.txt", '--counterfeits', 3,
                          '--max-rounds', 2, '--out', out_dir)
        self.assertEqual(code, EXIT_OK)
        distances = pd.read_csv(out_dir / "distances.csv")
        self.assertEqual(len(distances), 6)
        self.assertEqual(set(distances['a']), {'clean/model'})
        self.assertLessEqual(len(pd.read_csv(out_dir / "overlap.csv")), 2)
        self.assertTrue((out_dir / "analyze_report.json").exists())


if __name__ == '__main__':
    unittest.main()
