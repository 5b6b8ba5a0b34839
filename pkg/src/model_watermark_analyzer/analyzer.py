#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Model Watermark Analyzer - 參數分析模組

逐層參數直方圖、檢查點間的直方圖 L1 距離（浮水印隱密性分析）、
以及擁有者與偽造浮水印在各過濾輪數下的索引重疊率曲線
"""

import logging
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

try:
    from .checkpoint import ModelCheckpoint
    from .error_handler import FilterError, ShapeMismatchError
    from .filterpool import overlap_stats, trace_for_layer
    from .hashmark import Watermark
except ImportError:
    from checkpoint import ModelCheckpoint
    from error_handler import FilterError, ShapeMismatchError
    from filterpool import overlap_stats, trace_for_layer
    from hashmark import Watermark


logger = logging.getLogger(__name__)

DEFAULT_BINS = 101
# 直方圖 L1 距離（範圍 [0, 2]）低於此值視為分佈無法區分
SECRECY_L1_THRESHOLD = 0.5


class ParameterAnalyzer:
    """模型參數分析器"""

    def __init__(self, bins: int = DEFAULT_BINS):
        """
        初始化分析器

        Args:
            bins: 直方圖的固定箱數
        """
        if bins < 1:
            raise ValueError(f"bins 必須 >= 1，目前為 {bins}")
        self.bins = bins

    @staticmethod
    def _common_range(values: Sequence[np.ndarray]) -> Tuple[float, float]:
        low = min(float(np.min(v)) for v in values)
        high = max(float(np.max(v)) for v in values)
        if low == high:
            low, high = low - 0.5, high + 0.5
        return low, high

    @staticmethod
    def _check_layers(checkpoints: Dict[str, ModelCheckpoint]) -> int:
        counts = {len(c.layers) for c in checkpoints.values()}
        if len(counts) != 1:
            raise ShapeMismatchError(f"檢查點的張量數量不一致: {sorted(counts)}")
        return counts.pop()

    def calculate_statistics(self, checkpoint: ModelCheckpoint) -> pd.DataFrame:
        """
        逐層參數統計

        Returns:
            每個張量一列：layer, shape, count, mean, std, min, max
        """
        rows = []
        for i, layer in enumerate(checkpoint.layers):
            rows.append({
                'layer': i,
                'shape': 'x'.join(str(d) for d in layer.shape),
                'count': int(layer.size),
                'mean': float(np.mean(layer)),
                'std': float(np.std(layer)),
                'min': float(np.min(layer)),
                'max': float(np.max(layer)),
            })
        return pd.DataFrame(rows)

    def histograms(self, checkpoints: Dict[str, ModelCheckpoint]) -> pd.DataFrame:
        """
        逐層直方圖；同一層的所有檢查點共用觀察到的數值範圍

        Args:
            checkpoints: 標籤 → 檢查點

        Returns:
            DataFrame: checkpoint, layer, bin, left, right, count
        """
        num_layers = self._check_layers(checkpoints)
        frames = []
        for layer in range(num_layers):
            values = [c.layers[layer].reshape(-1) for c in checkpoints.values()]
            value_range = self._common_range(values)
            for label, flat in zip(checkpoints, values):
                counts, edges = np.histogram(flat, bins=self.bins, range=value_range)
                frames.append(pd.DataFrame({
                    'checkpoint': label,
                    'layer': layer,
                    'bin': np.arange(self.bins),
                    'left': edges[:-1],
                    'right': edges[1:],
                    'count': counts,
                }))
        return pd.concat(frames, ignore_index=True)

    def histogram_distance(self, a: ModelCheckpoint, b: ModelCheckpoint, layer: int) -> float:
        """
        兩個檢查點同一層的正規化直方圖 L1 距離

        Returns:
            介於 0 與 2 之間的距離
        """
        va = a.layers[layer].reshape(-1)
        vb = b.layers[layer].reshape(-1)
        value_range = self._common_range([va, vb])
        ha, _ = np.histogram(va, bins=self.bins, range=value_range)
        hb, _ = np.histogram(vb, bins=self.bins, range=value_range)
        return float(np.abs(ha / ha.sum() - hb / hb.sum()).sum())

    def distance_table(self, checkpoints: Dict[str, ModelCheckpoint],
                       threshold: float = SECRECY_L1_THRESHOLD) -> pd.DataFrame:
        """
        所有檢查點兩兩之間、逐層的直方圖距離

        Returns:
            DataFrame: a, b, layer, l1_distance, threshold, indistinguishable
        """
        num_layers = self._check_layers(checkpoints)
        rows = []
        for (label_a, ckpt_a), (label_b, ckpt_b) in combinations(checkpoints.items(), 2):
            for layer in range(num_layers):
                distance = self.histogram_distance(ckpt_a, ckpt_b, layer)
                rows.append({
                    'a': label_a,
                    'b': label_b,
                    'layer': layer,
                    'l1_distance': distance,
                    'threshold': threshold,
                    'indistinguishable': distance < threshold,
                })
        return pd.DataFrame(rows, columns=['a', 'b', 'layer', 'l1_distance', 'threshold', 'indistinguishable'])

    def overlap_curve(self, layer_len: int, owner: Watermark, counterfeits: Sequence[Watermark],
                      max_rounds: int) -> pd.DataFrame:
        """
        最後一輪索引重疊率對過濾輪數的曲線

        某輪數下存活參數不足時，曲線在前一輪截止

        Args:
            layer_len: 攤平後的嵌入層長度
            owner: 擁有者浮水印
            counterfeits: 偽造浮水印
            max_rounds: 最大輪數

        Returns:
            DataFrame: rounds, mean_overlap, min_overlap, max_overlap, counterfeits
        """
        rows = []
        for rounds in range(1, max_rounds + 1):
            try:
                owner_trace = trace_for_layer(layer_len, owner, rounds)
                ratios = [overlap_stats(owner_trace, trace_for_layer(layer_len, fake, rounds), rounds).ratio
                          for fake in counterfeits]
            except FilterError as e:
                logger.warning(f"R={rounds} 無法完成過濾，重疊率曲線在 R={rounds - 1} 截止: {e}")
                break
            rows.append({
                'rounds': rounds,
                'mean_overlap': float(np.mean(ratios)),
                'min_overlap': float(np.min(ratios)),
                'max_overlap': float(np.max(ratios)),
                'counterfeits': len(ratios),
            })
        return pd.DataFrame(rows, columns=['rounds', 'mean_overlap', 'min_overlap', 'max_overlap', 'counterfeits'])

    def analyze(self, checkpoints: Dict[str, ModelCheckpoint],
                owner: Optional[Watermark] = None,
                counterfeits: Sequence[Watermark] = (),
                embed_layers: Sequence[int] = (2,),
                max_rounds: int = 6) -> Dict[str, pd.DataFrame]:
        """
        完整分析流程

        Returns:
            名稱 → DataFrame；單一檢查點時沒有 distances，沒有偽造浮水印時沒有 overlap
        """
        results: Dict[str, pd.DataFrame] = {'histograms': self.histograms(checkpoints)}
        stats: List[pd.DataFrame] = []
        for label, ckpt in checkpoints.items():
            frame = self.calculate_statistics(ckpt)
            frame.insert(0, 'checkpoint', label)
            stats.append(frame)
        results['statistics'] = pd.concat(stats, ignore_index=True)

        if len(checkpoints) > 1:
            results['distances'] = self.distance_table(checkpoints)
        if owner is not None and counterfeits:
            first = next(iter(checkpoints.values()))
            layer_len = sum(first.layers[i].size for i in embed_layers)
            results['overlap'] = self.overlap_curve(layer_len, owner, counterfeits, max_rounds)
        return results
