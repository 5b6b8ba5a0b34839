#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Verifier - 浮水印驗證模組

偵測率、偽造機率的精確二項式上界、安全邊界搜尋，以及雙條件所有權驗證
（ρ ≥ ρ* 且 H(K) = b）
"""

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Optional, Union

import numpy as np

try:
    from .checkpoint import ModelCheckpoint
    from .embedder import ExtractedWatermark, WatermarkTuple, build_plan, extract
    from .error_handler import ShapeMismatchError
    from .hashmark import Watermark
    from .tinynet import TrainConfig
    from .utils import to_fraction
except ImportError:
    from checkpoint import ModelCheckpoint
    from embedder import ExtractedWatermark, WatermarkTuple, build_plan, extract
    from error_handler import ShapeMismatchError
    from hashmark import Watermark
    from tinynet import TrainConfig
    from utils import to_fraction


logger = logging.getLogger(__name__)

RateLike = Union[Fraction, float, int, str]


def threshold_bits(extracted: Union[ExtractedWatermark, np.ndarray]) -> np.ndarray:
    """嚴格大於 0.5 的位置為 1；恰為 0.5 時為 0"""
    probs = extracted.probabilities if isinstance(extracted, ExtractedWatermark) else np.asarray(extracted)
    return (probs > 0.5).astype(np.uint8)


def detection_rate(bits: np.ndarray, target: Union[Watermark, np.ndarray]) -> float:
    """
    偵測率 ρ：相符位元的比例

    Args:
        bits: 二值化後的抽取結果
        target: 浮水印

    Returns:
        介於 0 與 1 之間的比例
    """
    target_bits = target.bits if isinstance(target, Watermark) else np.asarray(target)
    bits = np.asarray(bits)
    if bits.shape != target_bits.shape:
        raise ShapeMismatchError(f"位元長度 {bits.shape} 與浮水印長度 {target_bits.shape} 不符")
    return float(np.mean(bits == target_bits))


@dataclass(frozen=True)
class SecurityBoundary:
    """隨機偽造達到 min_matches 個相符位元的機率上界 numerator / 2^n"""
    n: int
    min_matches: int
    log2_bound: float
    exact_numerator: int
    denominator_log2: int

    @property
    def bound(self) -> Fraction:
        return Fraction(self.exact_numerator, 2 ** self.denominator_log2)

    @property
    def rho(self) -> Fraction:
        return Fraction(self.min_matches, self.n)

    def is_below(self, log2_target: RateLike) -> bool:
        """
        上界是否 <= 2^log2_target

        整數目標以大整數精確比較，非整數目標才退回浮點 log2
        """
        target = to_fraction(log2_target)
        if target.denominator == 1:
            exponent = self.denominator_log2 + int(target)
            if exponent >= 0:
                return self.exact_numerator <= 1 << exponent
            return self.exact_numerator << -exponent <= 1
        return self.log2_bound <= float(target)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'min_matches': self.min_matches,
            'rho': float(self.rho),
            'log2_bound': self.log2_bound,
            'exact_numerator': str(self.exact_numerator),
            'denominator_log2': self.denominator_log2,
        }


def min_matches_for(n: int, rho: RateLike) -> int:
    """⌈ρ·n⌉，以有理數計算避免浮點進位誤差"""
    return math.ceil(to_fraction(rho) * n)


def forgery_bound(n: int, rho: RateLike) -> SecurityBoundary:
    """
    隨機偽造浮水印達到偵測率 ρ 的機率上界

    (1/2^n)·Σ_{i=0}^{n−⌈ρn⌉} C(n, i)，全程使用大整數

    Args:
        n: 浮水印長度
        rho: 偵測率（可為 Fraction、十進位字串或浮點數）

    Returns:
        SecurityBoundary
    """
    if n < 1:
        raise ValueError(f"n 必須 >= 1，目前為 {n}")
    rho = to_fraction(rho)
    if not 0 <= rho <= 1:
        raise ValueError(f"rho 必須在 [0, 1] 之間，目前為 {rho}")

    t = min_matches_for(n, rho)
    numerator = sum(math.comb(n, i) for i in range(n - t + 1))
    return SecurityBoundary(
        n=n,
        min_matches=t,
        log2_bound=math.log2(numerator) - n,
        exact_numerator=numerator,
        denominator_log2=n,
    )


@dataclass(frozen=True)
class ThresholdResult:
    """安全邊界搜尋結果；目標無法達成時 reachable 為 False"""
    n: int
    log2_target: float
    reachable: bool
    rho_star: Optional[Fraction] = None
    boundary: Optional[SecurityBoundary] = None
    previous: Optional[SecurityBoundary] = None

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            'n': self.n,
            'log2_target': self.log2_target,
            'reachable': self.reachable,
            'rho_star': None if self.rho_star is None else float(self.rho_star),
            'rho_star_fraction': None if self.rho_star is None else str(self.rho_star),
        }
        if self.boundary is not None:
            result['boundary'] = self.boundary.to_dict()
        if self.previous is not None:
            result['previous'] = self.previous.to_dict()
        return result


def security_threshold(n: int, log2_target: RateLike) -> ThresholdResult:
    """
    以二分搜尋找出上界不超過 2^log2_target 的最小 t/n

    Args:
        n: 浮水印長度
        log2_target: 目標機率的 log2（< 0）

    Returns:
        ThresholdResult，並附上 t−1 處的上界以證明其最小性
    """
    log2_target = to_fraction(log2_target)
    if log2_target >= 0:
        raise ValueError(f"log2_target 必須 < 0，目前為 {log2_target}")

    def below(t: int) -> bool:
        return forgery_bound(n, Fraction(t, n)).is_below(log2_target)

    if not below(n):
        logger.info(f"n={n} 無法達到 2^{log2_target}")
        return ThresholdResult(n, float(log2_target), False)

    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if below(mid):
            hi = mid
        else:
            lo = mid + 1

    previous = forgery_bound(n, Fraction(lo - 1, n)) if lo > 0 else None
    return ThresholdResult(n, float(log2_target), True, Fraction(lo, n),
                           forgery_bound(n, Fraction(lo, n)), previous)


def default_log2_target(n: int) -> Fraction:
    """長度 n 的預設安全目標：2^(−n/2)"""
    return Fraction(-n, 2)


def default_rho_star(n: int) -> Fraction:
    """預設安全邊界 ρ*(n)，例如 n=64 時為 57/64"""
    result = security_threshold(n, default_log2_target(n))
    return result.rho_star


@dataclass(frozen=True)
class DetectionReport:
    """
    驗證結果

    hash_consistent 為 None 代表未檢查雜湊條件（基準方案），此時判定只看 ρ ≥ ρ*
    """
    rho: float
    rho_star: Fraction
    n: int
    matches: int
    hash_consistent: Optional[bool]
    verdict: bool
    log2_bound: float
    scheme: str = "hashmark"

    @property
    def hash_checked(self) -> bool:
        return self.hash_consistent is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rho': self.rho,
            'rho_star': float(self.rho_star),
            'n': self.n,
            'matches': self.matches,
            'hash_consistent': self.hash_consistent,
            'hash_checked': self.hash_checked,
            'verdict': self.verdict,
            'log2_bound': self.log2_bound,
            'scheme': self.scheme,
        }


def build_report(extracted: ExtractedWatermark, target: Union[Watermark, np.ndarray],
                 rho_star: Optional[RateLike] = None, hash_consistent: Optional[bool] = None,
                 scheme: str = "hashmark") -> DetectionReport:
    """
    由抽取結果建立報告

    Args:
        extracted: 抽取出的機率
        target: 宣稱的浮水印
        rho_star: 安全邊界，省略時使用 default_rho_star(n)
        hash_consistent: 雜湊條件結果；None 表示不檢查
        scheme: 方案標籤

    Returns:
        DetectionReport
    """
    target_bits = target.bits if isinstance(target, Watermark) else np.asarray(target)
    n = len(target_bits)
    rho_star = default_rho_star(n) if rho_star is None else to_fraction(rho_star)
    bits = threshold_bits(extracted)
    matches = int(np.count_nonzero(bits == target_bits))
    rho = detection_rate(bits, target_bits)

    passes = matches >= min_matches_for(n, rho_star)
    verdict = passes and (hash_consistent is None or hash_consistent)
    return DetectionReport(
        rho=rho,
        rho_star=rho_star,
        n=n,
        matches=matches,
        hash_consistent=hash_consistent,
        verdict=verdict,
        log2_bound=forgery_bound(n, Fraction(matches, n)).log2_bound,
        scheme=scheme,
    )


def verify(checkpoint: ModelCheckpoint, wm_tuple: WatermarkTuple, config: TrainConfig,
           rho_star: Optional[RateLike] = None) -> DetectionReport:
    """
    所有權驗證

    依浮水印重建過濾紀錄 → 池化 → 抽取 → 二值化 → 偵測率，並檢查 H(K || C) = b；
    不需要任何訓練時的索引紀錄，也不會修改檢查點

    Args:
        checkpoint: 受檢模型
        wm_tuple: 宣稱者的浮水印組
        config: 嵌入設定（R、嵌入層、k、是否池化）
        rho_star: 安全邊界，省略時使用 default_rho_star(n)

    Returns:
        DetectionReport
    """
    if wm_tuple.key.rows != config.key_rows:
        raise ShapeMismatchError(f"金鑰列數 {wm_tuple.key.rows} 與設定 key_rows={config.key_rows} 不符")
    plan = build_plan(checkpoint.layers, wm_tuple.watermark, config.key_rows,
                      config.filter_rounds, config.embed_layers(), config.pooling)
    extracted = extract(plan.w_tilde(checkpoint.layers), wm_tuple.key)
    report = build_report(extracted, wm_tuple.watermark, rho_star,
                          hash_consistent=wm_tuple.is_hash_consistent())
    logger.debug(f"verify: rho={report.rho:.4f}, rho*={float(report.rho_star):.6f}, "
                 f"hash={report.hash_consistent}, verdict={report.verdict}")
    return report
