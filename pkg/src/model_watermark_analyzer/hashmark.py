#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Hashmark - 雜湊浮水印產生模組

將秘密金鑰矩陣以固定的位元組格式序列化，經 SHAKE-256 產生二元浮水印，
並提供雪崩效應量測與金鑰／浮水印檔案讀寫
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

try:
    from .error_handler import KeyFormatError, WatermarkFormatError
    from .utils import STREAM_AVALANCHE, derive_rng
except ImportError:
    from error_handler import KeyFormatError, WatermarkFormatError
    from utils import STREAM_AVALANCHE, derive_rng


logger = logging.getLogger(__name__)

_KEY_DTYPE = np.dtype('<f8')


def _check_finite(values: np.ndarray) -> None:
    """找出第一個非有限值並回報其 (row, col) 索引"""
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        index = tuple(int(i) for i in bad[0])
        raise KeyFormatError(f"金鑰在索引 {index} 含有非有限值 {values[index]}", index=index)


@dataclass(eq=False)
class SecretKey:
    """秘密金鑰矩陣 K (k × n)"""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise KeyFormatError(f"金鑰必須為二維矩陣，目前維度為 {values.ndim}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise KeyFormatError(f"金鑰形狀無效: {values.shape}")
        _check_finite(values)
        values.setflags(write=False)
        self.values = values

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @classmethod
    def sample(cls, rows: int, cols: int, rng: Union[np.random.Generator, int]) -> 'SecretKey':
        """
        以獨立標準常態分佈抽樣金鑰

        Args:
            rows: k
            cols: n（浮水印長度）
            rng: 亂數產生器或種子

        Returns:
            SecretKey
        """
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return cls(rng.standard_normal((rows, cols)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SecretKey):
            return NotImplemented
        return self.values.shape == other.values.shape and serialize_key(self) == serialize_key(other)


@dataclass(eq=False)
class Watermark:
    """二元浮水印 b（長度 n）"""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or len(bits) == 0:
            raise WatermarkFormatError("浮水印必須為非空的一維位元向量")
        if not np.all((bits == 0) | (bits == 1)):
            raise WatermarkFormatError("浮水印的每個元素必須為 0 或 1")
        bits = bits.astype(np.uint8)
        bits.setflags(write=False)
        self.bits = bits

    @property
    def n(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Watermark):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def to_text(self) -> str:
        """n 個 ASCII '0'/'1' 字元加換行"""
        return ''.join('1' if b else '0' for b in self.bits) + "\n"

    @classmethod
    def from_text(cls, text: str, n: Optional[int] = None) -> 'Watermark':
        """
        從浮水印檔案內容解析

        Raises:
            WatermarkFormatError: 含非 0/1 字元、缺少換行或長度不符時
        """
        if not text.endswith("\n"):
            raise WatermarkFormatError("浮水印檔案必須以換行結尾")
        body = text[:-1]
        if not body or any(ch not in '01' for ch in body):
            raise WatermarkFormatError("浮水印檔案只能包含 '0' 與 '1' 字元")
        if n is not None and len(body) != n:
            raise WatermarkFormatError(f"浮水印長度為 {len(body)}，預期為 {n}")
        return cls(np.frombuffer(body.encode('ascii'), dtype=np.uint8) - ord('0'))


def serialize_key(key: SecretKey, aux: bytes = b"") -> bytes:
    """
    將金鑰序列化為位元組字串

    以列優先順序走訪，每個值編碼為 64 位元 IEEE-754 小端序，再附加輔助內容

    Args:
        key: 秘密金鑰
        aux: 輔助內容（可為空）

    Returns:
        長度為 8·k·n + len(aux) 的位元組字串
    """
    _check_finite(key.values)
    return np.ascontiguousarray(key.values, dtype=_KEY_DTYPE).tobytes(order='C') + bytes(aux)


def shake_bits(data: bytes, n: int) -> np.ndarray:
    """
    SHAKE-256 吸收 data 後擠出 ⌈n/8⌉ 個位元組，每個位元組由最高位元開始展開

    Args:
        data: 輸入位元組
        n: 需要的位元數

    Returns:
        長度 n 的 uint8 位元向量
    """
    if n <= 0:
        raise WatermarkFormatError(f"浮水印長度必須 > 0，目前為 {n}")
    digest = hashlib.shake_256(data).digest((n + 7) // 8)
    return np.unpackbits(np.frombuffer(digest, dtype=np.uint8), bitorder='big')[:n]


def generate_watermark(key: SecretKey, aux: bytes = b"", n: Optional[int] = None) -> Watermark:
    """
    產生雜湊浮水印 b = H(K || C)

    Args:
        key: 秘密金鑰
        aux: 輔助內容
        n: 浮水印長度，必須等於 key.cols（預設即為 key.cols）

    Returns:
        Watermark
    """
    if n is None:
        n = key.cols
    if n <= 0:
        raise WatermarkFormatError(f"浮水印長度必須 > 0，目前為 {n}")
    if n != key.cols:
        raise WatermarkFormatError(f"浮水印長度 {n} 必須等於金鑰欄數 {key.cols}")
    return Watermark(shake_bits(serialize_key(key, aux), n))


def hamming_fraction(a: np.ndarray, b: np.ndarray) -> float:
    """正規化漢明距離"""
    return float(np.mean(np.asarray(a) != np.asarray(b)))


def avalanche_score(key: SecretKey, trials: int, rng_seed: int, aux: bytes = b"",
                    flips: int = 1) -> float:
    """
    量測雪崩效應

    每次試驗在序列化後的位元組中均勻選取 flips 個位元翻轉，比較翻轉前後的
    浮水印正規化漢明距離，回傳所有試驗的平均值

    Args:
        key: 秘密金鑰
        trials: 試驗次數（>= 1）
        rng_seed: 亂數種子
        aux: 輔助內容
        flips: 每次翻轉的位元數，0 表示與自身比較

    Returns:
        介於 0 與 1 之間的平均距離
    """
    if trials < 1:
        raise ValueError(f"trials 必須 >= 1，目前為 {trials}")
    if flips < 0:
        raise ValueError(f"flips 不能為負數，目前為 {flips}")

    data = serialize_key(key, aux)
    n = key.cols
    reference = shake_bits(data, n)
    total_bits = len(data) * 8
    rng = derive_rng(rng_seed, STREAM_AVALANCHE)

    distances = np.empty(trials)
    for t in range(trials):
        mutated = bytearray(data)
        for position in rng.choice(total_bits, size=flips, replace=False):
            mutated[position // 8] ^= 0x80 >> (position % 8)
        distances[t] = hamming_fraction(reference, shake_bits(bytes(mutated), n))

    score = float(distances.mean())
    logger.debug(f"avalanche: n={n}, trials={trials}, score={score:.4f}")
    return score


def save_key(path: Union[str, Path], key: SecretKey) -> Path:
    """金鑰檔案即為 serialize_key 的位元組（不含輔助內容）"""
    path = Path(path)
    path.write_bytes(serialize_key(key))
    return path


def load_key(path: Union[str, Path], rows: int, cols: int) -> SecretKey:
    """
    讀取金鑰檔案

    Raises:
        KeyFormatError: 檔案大小與 rows × cols 不符或含非有限值
    """
    data = Path(path).read_bytes()
    expected = 8 * rows * cols
    if len(data) != expected:
        raise KeyFormatError(f"金鑰檔案大小為 {len(data)} 位元組，預期為 {expected} ({rows}×{cols})")
    return SecretKey(np.frombuffer(data, dtype=_KEY_DTYPE).reshape(rows, cols))


def save_watermark(path: Union[str, Path], watermark: Watermark) -> Path:
    """寫出浮水印文字檔"""
    path = Path(path)
    path.write_bytes(watermark.to_text().encode('ascii'))
    return path


def load_watermark(path: Union[str, Path], n: Optional[int] = None) -> Watermark:
    """讀取浮水印文字檔"""
    raw = Path(path).read_bytes()
    try:
        text = raw.decode('ascii')
    except UnicodeDecodeError as e:
        raise WatermarkFormatError(f"浮水印檔案含非 ASCII 位元組: {e}")
    return Watermark.from_text(text, n)
