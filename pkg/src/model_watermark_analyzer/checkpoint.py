#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Checkpoint - 模型檢查點二進位格式

格式（全部小端序）：
    magic "NMK1" | version u32 | layer count u32 |
    每層：rank u32 + dims u32 × rank + binary64 值 |
    metadata 長度 u32 + UTF-8 JSON（鍵值排序）
"""

import json
import math
import struct
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

try:
    from .error_handler import CheckpointFormatError
    from .tinynet import Mlp
    from .utils import canonical_json
except ImportError:
    from error_handler import CheckpointFormatError
    from tinynet import Mlp
    from utils import canonical_json


logger = logging.getLogger(__name__)

MAGIC = b"NMK1"
FORMAT_VERSION = 1
SCHEMES = ("hashmark", "vanilla", "clean")

_U32 = struct.Struct('<I')


@dataclass(eq=False)
class ModelCheckpoint:
    """層形狀與攤平參數，加上方案標籤等元資料"""
    layers: List[np.ndarray]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def scheme(self) -> str:
        return self.metadata.get('scheme', 'clean')

    @classmethod
    def from_model(cls, model: Mlp, scheme: str, **metadata: Any) -> 'ModelCheckpoint':
        if scheme not in SCHEMES:
            raise ValueError(f"未知的方案標籤 '{scheme}'，可用: {SCHEMES}")
        meta = {'scheme': scheme, 'layer_sizes': list(model.layer_sizes)}
        meta.update(metadata)
        return cls([p.copy() for p in model.params], meta)

    def to_model(self) -> Mlp:
        """還原為 MLP（不含動量）"""
        if len(self.layers) % 2 or not self.layers:
            raise CheckpointFormatError(f"檢查點有 {len(self.layers)} 個張量，無法還原為 MLP")
        sizes = [self.layers[0].shape[0]] + [w.shape[1] for w in self.layers[0::2]]
        return Mlp(sizes, [p.copy() for p in self.layers])

    def copy(self) -> 'ModelCheckpoint':
        return ModelCheckpoint([p.copy() for p in self.layers], json.loads(json.dumps(self.metadata)))

    def with_layers(self, layers: List[np.ndarray], **metadata: Any) -> 'ModelCheckpoint':
        """以新參數建立檢查點，保留並更新元資料"""
        meta = json.loads(json.dumps(self.metadata))
        meta.update(metadata)
        return ModelCheckpoint([np.asarray(p, dtype=np.float64).copy() for p in layers], meta)

    def to_bytes(self) -> bytes:
        """序列化為位元組（可逐位元組重現）"""
        parts = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(self.layers))]
        for layer in self.layers:
            array = np.asarray(layer, dtype='<f8')
            parts.append(_U32.pack(array.ndim))
            parts.extend(_U32.pack(d) for d in array.shape)
            parts.append(np.ascontiguousarray(array).tobytes(order='C'))
        meta = canonical_json(self.metadata).encode('utf-8')
        parts.append(_U32.pack(len(meta)))
        parts.append(meta)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> 'ModelCheckpoint':
        """
        從位元組解析

        Raises:
            CheckpointFormatError: 魔術字、版本、截斷或多餘位元組錯誤
        """
        reader = _Reader(data)
        if reader.take(4) != MAGIC:
            raise CheckpointFormatError("魔術字錯誤，這不是檢查點檔案")
        version = reader.u32()
        if version != FORMAT_VERSION:
            raise CheckpointFormatError(f"不支援的檢查點版本 {version}")

        layers = []
        for _ in range(reader.u32()):
            rank = reader.u32()
            shape = tuple(reader.u32() for _ in range(rank))
            count = math.prod(shape)
            if 8 * count > reader.remaining:
                raise CheckpointFormatError(
                    f"層形狀 {shape} 需要 {8 * count} 位元組，檔案只剩 {reader.remaining}")
            values = np.frombuffer(reader.take(8 * count), dtype='<f8').astype(np.float64)
            layers.append(values.reshape(shape))

        meta_len = reader.u32()
        try:
            metadata = json.loads(reader.take(meta_len).decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointFormatError(f"元資料無法解析: {e}")
        if not reader.exhausted:
            raise CheckpointFormatError(f"檔案結尾有 {reader.remaining} 個多餘位元組")
        return cls(layers, metadata)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        logger.debug(f"checkpoint saved: {path} ({self.scheme})")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ModelCheckpoint':
        return cls.from_bytes(Path(path).read_bytes())


class _Reader:
    """依序讀取位元組，不足時回報截斷"""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointFormatError(
                f"檔案在位移 {self.offset} 處被截斷（需要 {size} 位元組，剩 {self.remaining}）")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    @property
    def exhausted(self) -> bool:
        return self.remaining == 0
