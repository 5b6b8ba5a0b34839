#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
雜湊浮水印工具 - 快速啟動腳本
以桌面規模設定訓練一個浮水印模型，驗證所有權並執行一次隨機偽造
"""

import sys
from pathlib import Path


def main():
    """快速啟動示範"""

    print("=== 雜湊浮水印工具 - 快速啟動 ===")

    output_dir = Path("./quick_start_results")
    output_dir.mkdir(exist_ok=True)
    print(f"結果將儲存至：{output_dir}")

    try:
        sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

        from model_watermark_analyzer import ExperimentConfig, WatermarkTuple, train_watermarked, verify
        from model_watermark_analyzer.attacks import forge_random
        from model_watermark_analyzer.error_handler import ErrorHandler
        from model_watermark_analyzer.result_manager import ResultManager
        from model_watermark_analyzer.utils import STREAM_KEY, derive_rng, format_rate

        ErrorHandler.setup_logging()
        config = ExperimentConfig(output_dir=str(output_dir))
        train_config = config.to_train_config()
        owner = WatermarkTuple.create(config.key_rows, config.watermark_len,
                                      derive_rng(config.seed, STREAM_KEY))

        print(f"\n訓練 2-64-64-4 網路（{config.epochs} epochs，n = k = {config.watermark_len}）...")
        run = train_watermarked(config.train_dataset(), owner, train_config, config.test_dataset())
        report = verify(run.checkpoint, owner, train_config)
        forged = forge_random(run.checkpoint, train_config, trials=10, seed=config.seed)

        results = ResultManager(output_dir, config)
        results.save_checkpoint('model.nmk', run.checkpoint)
        results.save_key('key.bin', owner.key)
        results.save_watermark('watermark.txt', owner.watermark)
        results.save_table('curves.csv', run.curves)
        results.add_result('train', 'train_report', report.to_dict())
        results.save_summary()

        print(f"\n擁有者 ρ：{format_rate(report.rho)}（{report.matches}/{report.n}），"
              f"判定：{'✅ 通過' if report.verdict else '❌ 未通過'}")
        print(f"測試準確率：{format_rate(run.final['test_acc'])}")
        print(f"10 次隨機偽造的平均 ρ：{format_rate(sum(forged) / len(forged))}")
        print(f"📁 結果儲存在：{output_dir.absolute()}")

    except ImportError as e:
        print(f"❌ 導入錯誤：{e}")
        print("請先執行 pip install -e . 安裝套件")
    except Exception as e:
        print(f"❌ 執行錯誤：{e}")


if __name__ == "__main__":
    main()
