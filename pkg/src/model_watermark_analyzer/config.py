#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Config - 實驗設定模組

平面的 `key = value` 文字設定檔：`#` 為註解、空行忽略、序列以逗號分隔、
布林值為 true/false；未知或重複的鍵一律視為錯誤
"""

import math
import logging
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union, get_args

try:
    from .error_handler import ConfigError, InputValidator
    from .tinynet import Dataset, Mlp, TrainConfig, make_blobs
    from .utils import STREAM_DATA_TEST, STREAM_DATA_TRAIN, derive_seed, fingerprint_text, to_fraction
except ImportError:
    from error_handler import ConfigError, InputValidator
    from tinynet import Dataset, Mlp, TrainConfig, make_blobs
    from utils import STREAM_DATA_TEST, STREAM_DATA_TRAIN, derive_seed, fingerprint_text, to_fraction


logger = logging.getLogger(__name__)

SCHEMES = ('hashmark', 'vanilla', 'clean')
AUTO = 'auto'


@dataclass
class ExperimentConfig:
    """一次實驗的完整設定（預設值即桌面規模設定）"""
    scheme: str = 'hashmark'
    seed: int = 0
    output_dir: str = 'runs'

    # 訓練與嵌入
    lam: float = 1.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    epochs: int = 200
    batch_size: int = 32
    filter_rounds: int = 2
    embed_layer: int = 2
    extra_embed_layers: Tuple[int, ...] = ()
    watermark_len: int = 64
    key_rows: int = 64
    hidden_sizes: Tuple[int, ...] = (64, 64)
    pooling: bool = True
    bit_reduction: str = 'sum'
    lr_milestones: Tuple[int, ...] = ()
    lr_gamma: float = 0.1
    log_every: int = 50
    aux: str = ''
    security_log2: str = AUTO

    # 資料集
    samples: int = 400
    test_samples: int = 400
    classes: int = 4
    dims: int = 2
    spread: float = 0.5

    # 攻擊
    attack_lams: Tuple[float, ...] = (1.0, 10.0, 100.0)
    attack_lrs: Tuple[float, ...] = (0.001,)
    attack_epochs: int = 100
    adversary_rounds: int = 0
    hash_consistent_adversary: bool = True
    forge_trials: int = 10
    forge_steps: int = 2000
    forge_lr: float = 100.0
    finetune_scope: str = 'all'
    finetune_lr: float = 0.001
    finetune_relabel: bool = True
    prune_ratios: Tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)
    prune_layer: int = 2
    accuracy_tolerance: float = 0.05

    # 分析
    counterfeits: int = 0
    max_rounds: int = 6
    hist_bins: int = 101

    def to_train_config(self) -> TrainConfig:
        """取出訓練設定"""
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{name: getattr(self, name) for name in names})

    def aux_bytes(self) -> bytes:
        return self.aux.encode('utf-8')

    def log2_target(self) -> Fraction:
        """安全目標的 log2；auto 為 −n/2"""
        if self.security_log2 == AUTO:
            return Fraction(-self.watermark_len, 2)
        return to_fraction(self.security_log2)

    def train_dataset(self) -> Dataset:
        return make_blobs(self.samples, self.classes, self.dims, self.spread,
                          derive_seed(self.seed, STREAM_DATA_TRAIN), split='train')

    def test_dataset(self) -> Dataset:
        return make_blobs(self.test_samples, self.classes, self.dims, self.spread,
                          derive_seed(self.seed, STREAM_DATA_TEST), split='test')

    def layer_sizes(self) -> List[int]:
        return [self.dims, *self.hidden_sizes, self.classes]

    def validate(self) -> None:
        """
        在任何工作開始前檢查所有前置條件

        Raises:
            ConfigError: 列出所有不合法的設定
        """
        errors: List[str] = []
        if self.scheme not in SCHEMES:
            errors.append(f"scheme 必須為 {SCHEMES} 之一，目前為 '{self.scheme}'")
        try:
            self.to_train_config().validate()
        except ConfigError as e:
            errors.extend(e.errors)

        _, dataset_errors = InputValidator.validate_dataset_settings(
            self.samples, self.classes, self.dims, self.spread)
        errors.extend(dataset_errors)
        if self.test_samples < self.classes:
            errors.append(f"test_samples ({self.test_samples}) 不能少於 classes ({self.classes})")

        _, attack_errors = InputValidator.validate_attack_settings(
            self.attack_lams, self.attack_lrs, self.attack_epochs, self.forge_trials,
            self.prune_ratios, self.accuracy_tolerance)
        errors.extend(attack_errors)
        if self.adversary_rounds < 0:
            errors.append(f"adversary_rounds 不能為負數（0 表示與擁有者相同），目前為 {self.adversary_rounds}")
        if self.forge_steps < 0 or self.forge_lr <= 0:
            errors.append("forge_steps 必須 >= 0 且 forge_lr 必須 > 0")
        if self.finetune_scope not in ('all', 'watermark_layer'):
            errors.append(f"finetune_scope 必須為 all 或 watermark_layer，目前為 '{self.finetune_scope}'")
        if self.finetune_lr <= 0:
            errors.append(f"finetune_lr 必須 > 0，目前為 {self.finetune_lr}")
        if self.counterfeits < 0 or self.max_rounds < 1 or self.hist_bins < 1:
            errors.append("counterfeits 必須 >= 0，max_rounds 與 hist_bins 必須 >= 1")

        errors.extend(self._layer_errors())
        if self.security_log2 != AUTO:
            try:
                if to_fraction(self.security_log2) >= 0:
                    errors.append(f"security_log2 必須 < 0，目前為 {self.security_log2}")
            except ValueError:
                errors.append(f"security_log2 必須為數值或 auto，目前為 '{self.security_log2}'")

        if errors:
            raise ConfigError("; ".join(errors), errors)

    def _layer_errors(self) -> List[str]:
        errors = []
        if any(h < 1 for h in self.hidden_sizes) or self.dims < 1 or self.classes < 2:
            return errors
        shapes = Mlp.expected_shapes(self.layer_sizes())
        embed = (self.embed_layer,) + tuple(self.extra_embed_layers)
        if any(not 0 <= i < len(shapes) for i in embed):
            errors.append(f"嵌入層索引 {embed} 超出範圍（共 {len(shapes)} 個參數張量）")
            return errors
        if not 0 <= self.prune_layer < len(shapes):
            errors.append(f"prune_layer={self.prune_layer} 超出範圍（共 {len(shapes)} 個參數張量）")
        m = sum(math.prod(shapes[i]) for i in embed)
        if self.scheme != 'clean' and m < max(self.watermark_len, self.key_rows):
            errors.append(f"嵌入層共 {m} 個參數，少於 watermark_len 或 key_rows")
        return errors

    def with_overrides(self, **overrides: Any) -> 'ExperimentConfig':
        """套用命令列覆寫（None 值略過）"""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def fingerprint(self) -> str:
        """設定指紋（不含 output_dir）"""
        return fingerprint_text(dump_config(replace(self, output_dir='')))


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(kind: type, text: str, key: str) -> Any:
    if kind is bool:
        lowered = text.lower()
        if lowered not in ('true', 'false'):
            raise ConfigError(f"{key} 必須為 true 或 false，目前為 '{text}'")
        return lowered == 'true'
    if kind is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key} 必須為整數，目前為 '{text}'")
    if kind is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key} 必須為數值，目前為 '{text}'")
    return text


def _parse_value(field_type: Any, text: str, key: str) -> Any:
    args = get_args(field_type)
    if args:
        if not text:
            return ()
        return tuple(_parse_scalar(args[0], part.strip(), key) for part in text.split(','))
    return _parse_scalar(field_type, text, key)


def parse_config(text: str) -> ExperimentConfig:
    """
    解析設定檔內容

    Args:
        text: 設定檔文字

    Returns:
        ExperimentConfig（尚未驗證前置條件）

    Raises:
        ConfigError: 語法錯誤、未知或重複的鍵、數值格式錯誤
    """
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    values: Dict[str, Any] = {}
    errors: List[str] = []

    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            errors.append(f"第 {line_no} 行缺少 '=': {raw}")
            continue
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in known:
            errors.append(f"第 {line_no} 行有未知的設定鍵 '{key}'")
            continue
        if key in values:
            errors.append(f"第 {line_no} 行重複設定 '{key}'")
            continue
        try:
            values[key] = _parse_value(known[key], value, key)
        except ConfigError as e:
            errors.append(f"第 {line_no} 行: {e}")

    if errors:
        raise ConfigError("; ".join(errors), errors)
    return ExperimentConfig(**values)


def dump_config(config: ExperimentConfig) -> str:
    """依宣告順序寫出所有欄位；重新解析可得到相同的設定"""
    lines = ["# model-watermark-analyzer experiment config"]
    for f in fields(config):
        lines.append(f"{f.name} = {_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """讀取設定檔"""
    config = parse_config(Path(path).read_text(encoding='utf-8'))
    logger.debug(f"config loaded: {path} ({config.fingerprint()})")
    return config


def save_config(path: Union[str, Path], config: ExperimentConfig) -> Path:
    path = Path(path)
    path.write_text(dump_config(config), encoding='utf-8')
    return path
