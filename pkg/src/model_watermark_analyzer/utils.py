#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Model Watermark Analyzer - 工具函數模組

提供亂數串流、數值梯度、格式化與檔案輸出等通用工具
"""

import json
import hashlib
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Union

import numpy as np


# 亂數串流編號，讓同一個 seed 下的不同用途互不干擾
STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_KEY = 2
STREAM_ADVERSARY = 3
STREAM_PRUNE = 4
STREAM_HEAD = 5
STREAM_DATA_TRAIN = 6
STREAM_DATA_TEST = 7
STREAM_RELABEL = 8
STREAM_AVALANCHE = 9


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    由 (seed, 串流編號...) 衍生獨立的亂數產生器

    Args:
        seed: 全域種子（非負整數）
        *stream: 串流編號與試驗編號等

    Returns:
        numpy 亂數產生器
    """
    if seed < 0:
        raise ValueError(f"seed 必須為非負整數，目前為 {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def derive_seed(seed: int, *stream: int) -> int:
    """由 (seed, 串流編號...) 衍生一個 32 位元整數種子"""
    if seed < 0:
        raise ValueError(f"seed 必須為非負整數，目前為 {seed}")
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1)[0])


def central_difference(func: Callable[[], float], array: np.ndarray, index: Any,
                       eps: float = 1e-6) -> float:
    """
    以中央差分估計 func 對 array[index] 的偏導數

    Args:
        func: 無參數的純量函數，讀取 array 的目前內容
        array: 會被暫時修改的參數陣列
        index: 要擾動的元素索引
        eps: 差分步長

    Returns:
        數值偏導數
    """
    original = array[index]
    array[index] = original + eps
    fplus = func()
    array[index] = original - eps
    fminus = func()
    array[index] = original
    return (fplus - fminus) / (2 * eps)


def relative_error(a: float, b: float, floor: float = 1e-8) -> float:
    """兩數的相對誤差，分母至少為 floor"""
    return abs(a - b) / max(abs(a), abs(b), floor)


def canonical_json(data: Any) -> str:
    """鍵值排序、無多餘空白的 JSON 字串，用於雜湊與可重現輸出"""
    return json.dumps(data, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def fingerprint_text(text: str) -> str:
    """SHA-256 前 16 個十六進位字元"""
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]


def to_fraction(value: Union[Fraction, float, int, str]) -> Fraction:
    """
    轉換為精確有理數

    浮點數以其最短十進位表示解析（0.3 → 3/10），字串則以十進位字面值解析
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def ensure_dir(path: Union[str, Path]) -> Path:
    """建立目錄（含父目錄）並回傳 Path"""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Union[str, Path], data: Dict[str, Any]) -> Path:
    """以固定格式寫出 JSON 報告"""
    path = Path(path)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                    encoding='utf-8')
    return path


def format_rate(rho: float) -> str:
    """
    格式化偵測率顯示

    Args:
        rho: 介於 0 與 1 之間的比例

    Returns:
        百分比字串
    """
    return f"{rho * 100:.2f}%"


def format_log2(value: float) -> str:
    """格式化 log2 機率，例如 2^-126.06"""
    if value == float('-inf'):
        return "0"
    return f"2^{value:.2f}"


def format_fraction(value: Fraction) -> str:
    """以「分子/分母 = 小數」格式顯示有理數"""
    return f"{value.numerator}/{value.denominator} = {float(value):.10g}"
