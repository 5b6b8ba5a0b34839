#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Filterpool - 雜湊浮水印過濾與平均池化模組

以浮水印位元為索引，多輪挑選攤平後的層參數，再以平均池化壓縮為 k 維向量；
保留每輪存活參數的來源索引，用於梯度回傳與重疊率分析
"""

import json
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np

try:
    from .error_handler import FilterError, ShapeMismatchError
    from .hashmark import Watermark
except ImportError:
    from error_handler import FilterError, ShapeMismatchError
    from hashmark import Watermark


logger = logging.getLogger(__name__)

BitsLike = Union[Watermark, Sequence[int], np.ndarray]


def _as_bits(b: BitsLike) -> np.ndarray:
    if isinstance(b, Watermark):
        return b.bits
    return Watermark(np.asarray(b)).bits


@dataclass(frozen=True, eq=False)
class ParamSlice:
    """攤平後的參數片段與其在原層中的來源索引"""
    values: np.ndarray
    source_indices: np.ndarray
    layer_len: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        indices = np.asarray(self.source_indices, dtype=np.int64)
        if values.ndim != 1 or indices.ndim != 1 or len(values) != len(indices):
            raise ShapeMismatchError(
                f"values ({values.shape}) 與 source_indices ({indices.shape}) 長度必須一致")
        if len(indices) > 1 and np.any(np.diff(indices) <= 0):
            raise ShapeMismatchError("source_indices 必須嚴格遞增")
        if len(indices) and (indices[0] < 0 or indices[-1] >= self.layer_len):
            raise ShapeMismatchError(f"source_indices 超出層長度 {self.layer_len}")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'source_indices', indices)

    @classmethod
    def from_layer(cls, values: np.ndarray) -> 'ParamSlice':
        """以整層（攤平）建立片段，來源索引為 0..m-1"""
        flat = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(flat, np.arange(len(flat)), len(flat))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class FilterTrace:
    """每輪過濾後存活的來源索引"""
    layer_len: int
    rounds: Tuple[np.ndarray, ...]

    @property
    def R(self) -> int:
        return len(self.rounds)

    @property
    def final(self) -> np.ndarray:
        return self.rounds[-1] if self.rounds else np.arange(self.layer_len)

    def indices_at(self, round_index: int) -> np.ndarray:
        """第 round_index 輪後的索引；第 0 輪為過濾前的整層"""
        if not 0 <= round_index <= self.R:
            raise ValueError(f"輪次 {round_index} 不在 [0, {self.R}] 範圍內")
        if round_index == 0:
            return np.arange(self.layer_len)
        return self.rounds[round_index - 1]

    def to_json(self) -> str:
        """匯出為整數陣列的陣列（稽核用）"""
        return json.dumps([r.tolist() for r in self.rounds])


@dataclass(frozen=True)
class PoolSpec:
    """池化視窗設定"""
    window: int
    output_len: int
    discarded_tail: int

    @property
    def input_len(self) -> int:
        return self.window * self.output_len + self.discarded_tail


class OverlapStats(NamedTuple):
    ratio: float
    shared: int
    size_a: int
    size_b: int
    empty: bool


def tile_watermark(b: BitsLike, target_len: int) -> np.ndarray:
    """
    重複浮水印至不超過 target_len 的最大整數倍長度

    Args:
        b: 浮水印
        target_len: 目標長度（>= n）

    Returns:
        長度為 n·⌊target_len/n⌋ 的位元向量
    """
    bits = _as_bits(b)
    n = len(bits)
    if target_len < n:
        raise FilterError(f"目標長度 {target_len} 小於浮水印長度 {n}，無法形成完整的一份")
    return np.tile(bits, target_len // n)


def filter_once(ps: ParamSlice, b: BitsLike) -> ParamSlice:
    """
    單輪過濾：保留平鋪後位元為 1 的位置，超出平鋪長度的尾端先行捨棄

    Args:
        ps: 參數片段
        b: 浮水印

    Returns:
        過濾後的片段（來源索引保留）
    """
    bits = _as_bits(b)
    if len(ps) < len(bits):
        raise FilterError(f"片段長度 {len(ps)} 小於浮水印長度 {len(bits)}")
    mask = tile_watermark(bits, len(ps)).astype(bool)
    used = len(mask)
    return ParamSlice(ps.values[:used][mask], ps.source_indices[:used][mask], ps.layer_len)


def filter_rounds(ps: ParamSlice, b: BitsLike, R: int) -> Tuple[ParamSlice, FilterTrace]:
    """
    依序執行 R 輪過濾

    Args:
        ps: 參數片段（通常為整層）
        b: 浮水印
        R: 過濾輪數（>= 1）

    Returns:
        (最後一輪的片段, 各輪索引紀錄)

    Raises:
        FilterError: 任一輪開始前存活數量少於 n 時，指明失敗的輪次
    """
    if R < 1:
        raise FilterError(f"過濾輪數必須 >= 1，目前為 {R}")
    bits = _as_bits(b)
    n = len(bits)

    current = ps
    rounds: List[np.ndarray] = []
    for r in range(1, R + 1):
        if len(current) < n:
            raise FilterError(
                f"第 {r} 輪過濾前只剩 {len(current)} 個參數，少於浮水印長度 {n}", round_index=r)
        current = filter_once(current, bits)
        rounds.append(current.source_indices)
        logger.debug(f"filter round {r}: {len(current)} survivors")

    return current, FilterTrace(ps.layer_len, tuple(rounds))


def trace_for_layer(layer_len: int, b: BitsLike, R: int) -> FilterTrace:
    """只依層長度與浮水印重建索引紀錄（驗證時不需要任何外部紀錄）"""
    _, trace = filter_rounds(ParamSlice(np.zeros(layer_len), np.arange(layer_len), layer_len), b, R)
    return trace


def overlap_stats(a: FilterTrace, b: FilterTrace, round_index: int) -> OverlapStats:
    """
    計算兩份索引紀錄在指定輪次的重疊統計

    Args:
        a: 第一份紀錄
        b: 第二份紀錄
        round_index: 輪次，0 為過濾前

    Returns:
        OverlapStats，分母為兩集合大小的最大值；兩者皆空時比率定義為 0 並標記 empty
    """
    if a.layer_len != b.layer_len:
        raise ShapeMismatchError(f"兩份紀錄的層長度不同: {a.layer_len} vs {b.layer_len}")
    set_a = a.indices_at(round_index)
    set_b = b.indices_at(round_index)
    size = max(len(set_a), len(set_b))
    if size == 0:
        logger.warning(f"第 {round_index} 輪兩份索引集合皆為空，重疊率定義為 0")
        return OverlapStats(0.0, 0, 0, 0, True)
    shared = len(np.intersect1d(set_a, set_b, assume_unique=True))
    return OverlapStats(shared / size, shared, len(set_a), len(set_b), False)


def overlap_ratio(a: FilterTrace, b: FilterTrace, round_index: int) -> float:
    """|A∩B| / max(|A|, |B|)"""
    return overlap_stats(a, b, round_index).ratio


def avg_pool(ps: ParamSlice, k: int) -> Tuple[np.ndarray, PoolSpec]:
    """
    平均池化為長度 k

    視窗大小為 ⌊len/k⌋，尾端不足一個視窗的元素捨棄並記錄

    Returns:
        (長度 k 的向量, PoolSpec)
    """
    if k < 1:
        raise FilterError(f"池化輸出長度必須 >= 1，目前為 {k}")
    if len(ps) < k:
        raise FilterError(f"過濾後只剩 {len(ps)} 個參數，不足以池化為 {k} 維")
    window = len(ps) // k
    used = window * k
    pooled = ps.values[:used].reshape(k, window).mean(axis=1)
    return pooled, PoolSpec(window=window, output_len=k, discarded_tail=len(ps) - used)


def truncate_pool(ps: ParamSlice, k: int) -> Tuple[np.ndarray, PoolSpec]:
    """不做平均，只取前 k 個參數（視窗 1），用於池化消融實驗"""
    if k < 1:
        raise FilterError(f"輸出長度必須 >= 1，目前為 {k}")
    if len(ps) < k:
        raise FilterError(f"過濾後只剩 {len(ps)} 個參數，不足以取出 {k} 維")
    return ps.values[:k].copy(), PoolSpec(window=1, output_len=k, discarded_tail=len(ps) - k)


def route_gradient(grad_pooled: np.ndarray, pool_spec: PoolSpec, trace: FilterTrace) -> np.ndarray:
    """
    將池化輸出的梯度回傳到攤平後的整層

    視窗 j 內的每個來源索引得到 grad_pooled[j] / window，其他位置為 0

    Args:
        grad_pooled: 對池化輸出的梯度（長度 k）
        pool_spec: 池化設定
        trace: 過濾索引紀錄

    Returns:
        長度為層長度 m 的梯度向量
    """
    grad_pooled = np.asarray(grad_pooled, dtype=np.float64)
    if grad_pooled.shape != (pool_spec.output_len,):
        raise ShapeMismatchError(f"梯度形狀 {grad_pooled.shape} 與池化輸出長度 {pool_spec.output_len} 不符")
    final = trace.final
    if len(final) != pool_spec.input_len:
        raise ShapeMismatchError(f"索引紀錄最後一輪有 {len(final)} 個參數，池化設定預期 {pool_spec.input_len}")

    routed = np.zeros(trace.layer_len)
    used = final[:pool_spec.window * pool_spec.output_len]
    routed[used] = np.repeat(grad_pooled / pool_spec.window, pool_spec.window)
    return routed
