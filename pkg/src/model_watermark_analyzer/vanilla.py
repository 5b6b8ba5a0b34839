#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Vanilla - 無雜湊基準方案

將固定、可公開重建的參數子集（整層攤平後平均池化）投影到金鑰上，
浮水印可任意指定，驗證時不檢查雜湊條件
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

try:
    from .checkpoint import ModelCheckpoint
    from .embedder import (TrainingRun, WatermarkObjective, check_tuple, build_plan,
                           config_fingerprint, extract, model_layer_sizes, run_training)
    from .error_handler import FilterError, ShapeMismatchError
    from .filterpool import ParamSlice, avg_pool
    from .hashmark import SecretKey, Watermark
    from .tinynet import Dataset, Mlp, TrainConfig
    from .verifier import DetectionReport, RateLike, build_report
except ImportError:
    from checkpoint import ModelCheckpoint
    from embedder import (TrainingRun, WatermarkObjective, check_tuple, build_plan,
                          config_fingerprint, extract, model_layer_sizes, run_training)
    from error_handler import FilterError, ShapeMismatchError
    from filterpool import ParamSlice, avg_pool
    from hashmark import SecretKey, Watermark
    from tinynet import Dataset, Mlp, TrainConfig
    from verifier import DetectionReport, RateLike, build_report


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class VanillaTuple:
    """基準方案的 {K, b}；b 與 K 沒有雜湊關係"""
    key: SecretKey
    watermark: Watermark

    def __post_init__(self):
        if self.watermark.n != self.key.cols:
            raise ShapeMismatchError(f"浮水印長度 {self.watermark.n} 與金鑰欄數 {self.key.cols} 不符")

    @property
    def n(self) -> int:
        return self.watermark.n

    @classmethod
    def create(cls, rows: int, cols: int, rng: Union[np.random.Generator, int]) -> 'VanillaTuple':
        """抽樣常態金鑰與均勻隨機的浮水印位元"""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        key = SecretKey.sample(rows, cols, rng)
        return cls(key, Watermark(rng.integers(0, 2, size=cols)))


def vanilla_select(checkpoint: Union[ModelCheckpoint, Sequence[np.ndarray]], layer: int,
                   k: int) -> np.ndarray:
    """
    攤平指定層後平均池化為長度 k（不過濾、不雜湊）

    任何取得檢查點的人都能算出同樣的 w̃

    Args:
        checkpoint: 檢查點或參數張量序列
        layer: 參數張量索引
        k: 輸出長度

    Returns:
        長度 k 的向量
    """
    layers = checkpoint.layers if isinstance(checkpoint, ModelCheckpoint) else list(checkpoint)
    if not 0 <= layer < len(layers):
        raise ShapeMismatchError(f"層索引 {layer} 超出範圍（共 {len(layers)} 個張量）")
    flat = ParamSlice.from_layer(layers[layer])
    if len(flat) < k:
        raise FilterError(f"層長度 {len(flat)} 小於 k={k}")
    pooled, _ = avg_pool(flat, k)
    return pooled


def vanilla_objective(params: Sequence[np.ndarray], target: Union[Watermark, np.ndarray],
                      key: SecretKey, config: TrainConfig,
                      lam: Optional[float] = None) -> WatermarkObjective:
    """公開子集上的嵌入項（R = 0 的計畫）"""
    plan = build_plan(params, None, key.rows, 0, config.embed_layers(), config.pooling)
    return WatermarkObjective(key, target, plan, config.lam if lam is None else lam,
                              config.bit_reduction)


def vanilla_train(dataset: Dataset, wm_tuple: VanillaTuple, config: TrainConfig,
                  test_set: Optional[Dataset] = None,
                  metadata: Optional[Dict[str, Any]] = None) -> TrainingRun:
    """
    以基準方案訓練：L_m + λ·L_e(b, δ(w̃K))，w̃ 來自 vanilla_select

    λ = 0 時參數與乾淨訓練完全相同
    """
    config.validate()
    check_tuple(wm_tuple, config)
    model = Mlp.initialize(model_layer_sizes(dataset, config), config.seed)
    objective = vanilla_objective(model.params, wm_tuple.watermark, wm_tuple.key, config)
    logger.info(f"vanilla embedding: n={wm_tuple.n}, k={config.key_rows}, "
                f"layers={config.embed_layers()}, window={objective.plan.pool.window}")

    model, curves = run_training(model, dataset, config, [objective], test_set=test_set)
    meta: Dict[str, Any] = {
        'config_fingerprint': config_fingerprint(config),
        'embed_layers': list(config.embed_layers()),
        'key_rows': config.key_rows,
        'watermark_len': config.watermark_len,
        'pooling': config.pooling,
    }
    if len(curves):
        meta['final_rho'] = float(curves['rho'].iloc[-1])
    meta.update(metadata or {})
    return TrainingRun(model, ModelCheckpoint.from_model(model, 'vanilla', **meta), curves)


def vanilla_verify(checkpoint: ModelCheckpoint, wm_tuple: VanillaTuple, config: TrainConfig,
                   rho_star: Optional[RateLike] = None) -> DetectionReport:
    """基準方案驗證：只比較 ρ ≥ ρ*，報告中 hash_consistent 為 None"""
    if wm_tuple.key.rows != config.key_rows:
        raise ShapeMismatchError(f"金鑰列數 {wm_tuple.key.rows} 與設定 key_rows={config.key_rows} 不符")
    plan = build_plan(checkpoint.layers, None, config.key_rows, 0, config.embed_layers(), config.pooling)
    extracted = extract(plan.w_tilde(checkpoint.layers), wm_tuple.key)
    return build_report(extracted, wm_tuple.watermark, rho_star, hash_consistent=None, scheme='vanilla')
