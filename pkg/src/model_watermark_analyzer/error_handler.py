#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Error Handler - 錯誤處理和驗證模組

提供例外類別、輸入驗證、錯誤記錄以及命令列結束碼對應
"""

import sys
import logging
import traceback
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple


# 命令列結束碼
EXIT_OK = 0
EXIT_VERDICT_FALSE = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class WatermarkError(ValueError):
    """浮水印工具的基礎例外"""


class KeyFormatError(WatermarkError):
    """金鑰格式錯誤（非有限值、檔案大小不符、形狀錯誤）"""

    def __init__(self, message: str, index: Optional[Tuple[int, ...]] = None):
        super().__init__(message)
        self.index = index


class WatermarkFormatError(WatermarkError):
    """浮水印位元向量或檔案格式錯誤"""


class FilterError(WatermarkError):
    """過濾或池化的前置條件不成立"""

    def __init__(self, message: str, round_index: Optional[int] = None):
        super().__init__(message)
        self.round_index = round_index


class ShapeMismatchError(WatermarkError):
    """維度或長度不一致"""


class StaleCacheError(WatermarkError):
    """前向快取與目前模型版本不符"""


class DivergenceError(WatermarkError, ArithmeticError):
    """損失或更新出現非有限值"""

    def __init__(self, message: str, epoch: Optional[int] = None,
                 step: Optional[int] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
        self.details = details or {}


class CheckpointFormatError(WatermarkError):
    """檢查點檔案無法解析"""


class ConfigError(WatermarkError):
    """設定檔錯誤或前置條件不成立"""

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        super().__init__(message)
        self.errors = errors or [message]


class ErrorHandler:
    """錯誤處理器"""

    def __init__(self, verbose: bool = False):
        """
        初始化錯誤處理器

        Args:
            verbose: 是否輸出 DEBUG 等級日誌與完整追蹤
        """
        self.verbose = verbose
        self.error_log: List[Dict[str, Any]] = []
        self.logger = logging.getLogger(__name__)

    @staticmethod
    def setup_logging(verbose: bool = False) -> None:
        """設定日誌記錄（僅由命令列與腳本呼叫）"""
        logging.basicConfig(
            level=logging.DEBUG if verbose else logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s',
            stream=sys.stderr,
        )

    def log_error(self, error_type: str, message: str, details: Optional[Dict] = None):
        """
        記錄錯誤

        Args:
            error_type: 錯誤類型
            message: 錯誤訊息
            details: 錯誤詳情
        """
        error_entry = {
            'timestamp': datetime.now(),
            'type': error_type,
            'message': message,
            'details': details or {},
            'traceback': traceback.format_exc(),
        }

        self.error_log.append(error_entry)
        self.logger.error(f"{error_type}: {message}")

    def display_error(self, message: str, suggestions: Optional[List[str]] = None):
        """
        在標準錯誤輸出顯示使用者友善的錯誤訊息

        Args:
            message: 錯誤訊息
            suggestions: 解決建議
        """
        print(f"錯誤：{message}", file=sys.stderr)
        if suggestions:
            print("解決建議：", file=sys.stderr)
            for i, suggestion in enumerate(suggestions, 1):
                print(f"  {i}. {suggestion}", file=sys.stderr)
        if self.verbose and self.error_log:
            print(self.error_log[-1]['traceback'], file=sys.stderr)

    def handle_exception(self, operation: str, error: BaseException) -> int:
        """
        處理例外並回傳對應的結束碼

        Args:
            operation: 操作名稱
            error: 例外物件

        Returns:
            命令列結束碼
        """
        if isinstance(error, (CheckpointFormatError, KeyFormatError, WatermarkFormatError)):
            suggestions = [
                "確認檔案沒有被截斷或修改",
                "確認 key_rows 與 watermark_len 設定與產生金鑰時一致",
            ]
            self.log_error("file_error", f"{operation}: {error}")
            self.display_error(f"無法解析輸入檔案 ({operation}): {error}", suggestions)
            return EXIT_IO
        if isinstance(error, (OSError, UnicodeDecodeError)):
            suggestions = [
                "檢查檔案是否存在且可讀取",
                "確認輸出目錄有寫入權限",
            ]
            self.log_error("io_error", f"{operation}: {error}")
            self.display_error(f"檔案存取失敗 ({operation}): {error}", suggestions)
            return EXIT_IO
        if isinstance(error, ConfigError):
            self.log_error("config_error", f"{operation}: {error}", {'errors': error.errors})
            self.display_error(f"設定錯誤 ({operation}): {error}", error.errors)
            return EXIT_USAGE
        if isinstance(error, (DivergenceError, FloatingPointError)):
            details = getattr(error, 'details', {})
            suggestions = [
                "降低學習率或 lambda",
                "確認資料集沒有非有限值",
            ]
            self.log_error("numeric_error", f"{operation}: {error}", details)
            self.display_error(f"數值計算失敗 ({operation}): {error}", suggestions)
            return EXIT_NUMERIC
        if isinstance(error, ValueError):
            self.log_error("usage_error", f"{operation}: {error}")
            self.display_error(f"參數無效 ({operation}): {error}")
            return EXIT_USAGE

        self.log_error("unexpected_error", f"{operation}: {error}")
        self.display_error(f"執行 {operation} 時發生未預期的錯誤: {error}")
        return EXIT_NUMERIC


class InputValidator:
    """輸入驗證器"""

    @staticmethod
    def validate_train_settings(lam: float, learning_rate: float, momentum: float,
                                weight_decay: float, epochs: int, batch_size: int,
                                seed: int) -> Tuple[bool, List[str]]:
        """
        驗證訓練參數

        Returns:
            (是否有效, 錯誤訊息列表)
        """
        errors = []

        if lam < 0:
            errors.append(f"lambda 必須 >= 0，目前為 {lam}")
        if learning_rate <= 0:
            errors.append(f"learning_rate 必須 > 0，目前為 {learning_rate}")
        if not 0 <= momentum < 1:
            errors.append(f"momentum 必須在 [0, 1) 之間，目前為 {momentum}")
        if weight_decay < 0:
            errors.append(f"weight_decay 必須 >= 0，目前為 {weight_decay}")
        if epochs < 0:
            errors.append(f"epochs 不能為負數，目前為 {epochs}")
        if batch_size < 1:
            errors.append(f"batch_size 必須 >= 1，目前為 {batch_size}")
        if seed < 0:
            errors.append(f"seed 必須為非負整數，目前為 {seed}")

        return len(errors) == 0, errors

    @staticmethod
    def validate_watermark_settings(watermark_len: int, key_rows: int,
                                    filter_rounds: int) -> Tuple[bool, List[str]]:
        """
        驗證浮水印相關參數

        Returns:
            (是否有效, 錯誤訊息列表)
        """
        errors = []

        if watermark_len < 1:
            errors.append(f"watermark_len 必須 >= 1，目前為 {watermark_len}")
        if key_rows < 1:
            errors.append(f"key_rows 必須 >= 1，目前為 {key_rows}")
        if filter_rounds < 1:
            errors.append(f"filter_rounds 必須 >= 1，目前為 {filter_rounds}")

        return len(errors) == 0, errors

    @staticmethod
    def validate_dataset_settings(samples: int, classes: int, dims: int,
                                  spread: float) -> Tuple[bool, List[str]]:
        """
        驗證合成資料集參數

        Returns:
            (是否有效, 錯誤訊息列表)
        """
        errors = []

        if classes < 2:
            errors.append(f"classes 必須 >= 2，目前為 {classes}")
        if samples < classes:
            errors.append(f"samples ({samples}) 不能少於 classes ({classes})")
        if dims < 1:
            errors.append(f"dims 必須 >= 1，目前為 {dims}")
        elif dims < 2 and classes > dims:
            errors.append("dims 為 1 時無法放置兩個以上的群集中心")
        if spread <= 0:
            errors.append(f"spread 必須 > 0，目前為 {spread}")

        return len(errors) == 0, errors

    @staticmethod
    def validate_ratio(ratio: float, name: str = "ratio") -> Tuple[bool, str]:
        """
        驗證比例值是否位於 [0, 1]

        Returns:
            (是否有效, 錯誤訊息)
        """
        if not 0.0 <= ratio <= 1.0:
            return False, f"{name} 必須在 [0, 1] 之間，目前為 {ratio}"
        return True, ""

    @staticmethod
    def validate_attack_settings(attack_lams: Sequence[float], attack_lrs: Sequence[float],
                                 attack_epochs: int, forge_trials: int,
                                 prune_ratios: Sequence[float],
                                 accuracy_tolerance: float) -> Tuple[bool, List[str]]:
        """
        驗證攻擊參數

        Returns:
            (是否有效, 錯誤訊息列表)
        """
        errors = []

        if any(lam < 0 for lam in attack_lams):
            errors.append(f"attack_lams 必須皆 >= 0，目前為 {tuple(attack_lams)}")
        if any(lr <= 0 for lr in attack_lrs):
            errors.append(f"attack_lrs 必須皆 > 0，目前為 {tuple(attack_lrs)}")
        if attack_epochs < 0:
            errors.append(f"attack_epochs 不能為負數，目前為 {attack_epochs}")
        if forge_trials < 1:
            errors.append(f"forge_trials 必須 >= 1，目前為 {forge_trials}")
        for ratio in prune_ratios:
            is_valid, message = InputValidator.validate_ratio(ratio, "prune_ratios")
            if not is_valid:
                errors.append(message)
        is_valid, message = InputValidator.validate_ratio(accuracy_tolerance, "accuracy_tolerance")
        if not is_valid:
            errors.append(message)

        return len(errors) == 0, errors
