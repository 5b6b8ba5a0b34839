#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tinynet - 最小多層感知器模組

提供 tanh 隱藏層、線性輸出的 MLP、手推的反向傳播、合成群集資料集與
帶動量／權重衰減的 SGD，作為主任務損失 L_m 的載體
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

try:
    from .error_handler import (ConfigError, DivergenceError, InputValidator,
                                ShapeMismatchError, StaleCacheError)
    from .utils import STREAM_INIT, derive_rng
except ImportError:
    from error_handler import (ConfigError, DivergenceError, InputValidator,
                               ShapeMismatchError, StaleCacheError)
    from utils import STREAM_INIT, derive_rng


logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """訓練與嵌入超參數"""
    lam: float = 1.0                  # λ：浮水印損失權重
    learning_rate: float = 0.01       # η
    momentum: float = 0.9
    weight_decay: float = 5e-4
    epochs: int = 200                 # T
    batch_size: int = 32
    seed: int = 0
    filter_rounds: int = 2            # R
    embed_layer: int = 2              # I_e：參數張量索引（W0, b0, W1, b1, ...）
    watermark_len: int = 64           # n
    key_rows: int = 64                # k
    hidden_sizes: Tuple[int, ...] = (64, 64)
    extra_embed_layers: Tuple[int, ...] = ()
    pooling: bool = True
    bit_reduction: str = 'sum'        # L_e 對位元的歸約：sum 或 mean
    lr_milestones: Tuple[int, ...] = ()
    lr_gamma: float = 0.1
    log_every: int = 50

    def embed_layers(self) -> Tuple[int, ...]:
        """嵌入的參數張量索引（依序串接）"""
        return (self.embed_layer,) + tuple(self.extra_embed_layers)

    def learning_rate_at(self, epoch: int) -> float:
        """多段式學習率：每經過一個里程碑乘上 lr_gamma"""
        passed = sum(1 for m in self.lr_milestones if epoch >= m)
        return self.learning_rate * (self.lr_gamma ** passed)

    def validate(self) -> None:
        """
        驗證所有參數

        Raises:
            ConfigError: 列出所有不合法的參數
        """
        errors = []
        _, train_errors = InputValidator.validate_train_settings(
            self.lam, self.learning_rate, self.momentum, self.weight_decay,
            self.epochs, self.batch_size, self.seed)
        errors.extend(train_errors)
        _, wm_errors = InputValidator.validate_watermark_settings(
            self.watermark_len, self.key_rows, self.filter_rounds)
        errors.extend(wm_errors)
        if any(h < 1 for h in self.hidden_sizes):
            errors.append(f"hidden_sizes 必須皆 >= 1，目前為 {self.hidden_sizes}")
        layers = self.embed_layers()
        if len(set(layers)) != len(layers):
            errors.append(f"嵌入層索引重複: {layers}")
        if any(layer < 0 for layer in layers):
            errors.append(f"嵌入層索引不能為負數: {layers}")
        if not 0 < self.lr_gamma <= 1:
            errors.append(f"lr_gamma 必須在 (0, 1] 之間，目前為 {self.lr_gamma}")
        if list(self.lr_milestones) != sorted(self.lr_milestones):
            errors.append(f"lr_milestones 必須遞增，目前為 {self.lr_milestones}")
        if self.bit_reduction not in ('sum', 'mean'):
            errors.append(f"bit_reduction 必須為 sum 或 mean，目前為 '{self.bit_reduction}'")
        if self.log_every < 1:
            errors.append(f"log_every 必須 >= 1，目前為 {self.log_every}")
        if errors:
            raise ConfigError("; ".join(errors), errors)


@dataclass(eq=False)
class Dataset:
    """分類資料集"""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeMismatchError(f"features 必須為二維矩陣，目前為 {self.features.shape}")
        if len(self.features) != len(self.labels):
            raise ShapeMismatchError(
                f"features 有 {len(self.features)} 列，labels 有 {len(self.labels)} 個")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ShapeMismatchError(f"labels 必須介於 0 與 {self.num_classes - 1} 之間")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    def subset(self, index: np.ndarray) -> 'Dataset':
        return Dataset(self.features[index], self.labels[index], self.num_classes, self.split)

    def empty(self) -> 'Dataset':
        return self.subset(np.arange(0))


def blob_centers(classes: int, dims: int, scale: float = 4.0) -> np.ndarray:
    """
    群集中心：dims >= classes 時為縮放後的標準單形頂點，否則均勻分佈於前兩維的圓上
    """
    centers = np.zeros((classes, dims))
    if dims >= classes:
        centers[:, :classes] = scale * np.eye(classes)
    else:
        angles = 2 * np.pi * np.arange(classes) / classes
        centers[:, 0] = scale * np.cos(angles)
        centers[:, 1] = scale * np.sin(angles)
    return centers


def make_blobs(samples: int, classes: int, dims: int, spread: float, seed: int,
               split: str = "train", scale: float = 4.0) -> Dataset:
    """
    產生等向高斯群集資料集

    Args:
        samples: 樣本數（>= classes）
        classes: 類別數（>= 2）
        dims: 特徵維度
        spread: 群集標準差（> 0）
        seed: 亂數種子
        split: 資料分割標籤
        scale: 群集中心的距離尺度

    Returns:
        類別平衡（至多差一個）的 Dataset
    """
    is_valid, errors = InputValidator.validate_dataset_settings(samples, classes, dims, spread)
    if not is_valid:
        raise ConfigError("; ".join(errors), errors)

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(samples) % classes)
    features = blob_centers(classes, dims, scale)[labels] + spread * rng.standard_normal((samples, dims))
    return Dataset(features, labels, classes, split)


def relabel(dataset: Dataset, seed: int) -> Dataset:
    """以隨機類別置換建立新任務（遷移式微調使用）"""
    permutation = np.random.default_rng(seed).permutation(dataset.num_classes)
    return Dataset(dataset.features, permutation[dataset.labels], dataset.num_classes, dataset.split)


@dataclass(eq=False)
class Mlp:
    """多層感知器，參數依序為 W0, b0, W1, b1, ...，W 形狀為 (fan_in, fan_out)"""
    layer_sizes: List[int]
    params: List[np.ndarray]
    velocity: Optional[List[np.ndarray]] = None
    version: int = 0

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        expected = self.expected_shapes(self.layer_sizes)
        if len(self.params) != len(expected):
            raise ShapeMismatchError(f"需要 {len(expected)} 個參數張量，目前為 {len(self.params)}")
        self.params = [np.asarray(p, dtype=np.float64) for p in self.params]
        for i, (p, shape) in enumerate(zip(self.params, expected)):
            if p.shape != shape:
                raise ShapeMismatchError(f"參數 {i} 形狀為 {p.shape}，預期為 {shape}")
            if not np.all(np.isfinite(p)):
                raise DivergenceError(f"參數 {i} 含有非有限值")

    @staticmethod
    def expected_shapes(layer_sizes: Sequence[int]) -> List[Tuple[int, ...]]:
        shapes: List[Tuple[int, ...]] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            shapes.append((fan_in, fan_out))
            shapes.append((fan_out,))
        return shapes

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], seed: int) -> 'Mlp':
        """
        Glorot 均勻初始化：權重在 ±√(6/(fan_in+fan_out)) 內均勻抽樣，偏差為 0
        """
        if len(layer_sizes) < 2:
            raise ShapeMismatchError("至少需要輸入層與輸出層")
        rng = derive_rng(seed, STREAM_INIT)
        params = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        return cls(list(layer_sizes), params)

    @property
    def num_tensors(self) -> int:
        return len(self.params)

    @property
    def head_indices(self) -> Tuple[int, int]:
        """分類頭（最後一層權重與偏差）的張量索引"""
        return len(self.params) - 2, len(self.params) - 1

    def copy(self) -> 'Mlp':
        velocity = None if self.velocity is None else [v.copy() for v in self.velocity]
        return Mlp(list(self.layer_sizes), [p.copy() for p in self.params], velocity, self.version)


@dataclass
class ForwardCache:
    """前向傳播快取"""
    version: int
    inputs: List[np.ndarray] = field(default_factory=list)      # 每層的輸入（含原始特徵）
    activations: List[np.ndarray] = field(default_factory=list)  # 隱藏層 tanh 輸出
    probs: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None


def logits(model: Mlp, features: np.ndarray) -> np.ndarray:
    """輸出層 logits"""
    h = np.asarray(features, dtype=np.float64)
    last = len(model.params) // 2 - 1
    for layer in range(last + 1):
        z = h @ model.params[2 * layer] + model.params[2 * layer + 1]
        h = z if layer == last else np.tanh(z)
    return h


def forward_loss(model: Mlp, batch: Dataset) -> Tuple[float, ForwardCache]:
    """
    前向傳播並計算批次平均 softmax 交叉熵

    Args:
        model: MLP
        batch: 批次資料

    Returns:
        (L_m, 快取)；空批次的 L_m 為 0
    """
    if batch.dims != model.layer_sizes[0]:
        raise ShapeMismatchError(f"特徵維度 {batch.dims} 與輸入層 {model.layer_sizes[0]} 不符")
    if batch.num_classes != model.layer_sizes[-1]:
        raise ShapeMismatchError(f"類別數 {batch.num_classes} 與輸出層 {model.layer_sizes[-1]} 不符")

    cache = ForwardCache(version=model.version, labels=batch.labels)
    h = batch.features
    last = len(model.params) // 2 - 1
    for layer in range(last + 1):
        cache.inputs.append(h)
        z = h @ model.params[2 * layer] + model.params[2 * layer + 1]
        if layer == last:
            h = z
        else:
            h = np.tanh(z)
            cache.activations.append(h)

    if len(batch) == 0:
        cache.probs = np.zeros((0, model.layer_sizes[-1]))
        return 0.0, cache

    log_probs = log_softmax(h, axis=1)
    cache.probs = softmax(h, axis=1)
    loss = float(-np.mean(log_probs[np.arange(len(batch)), batch.labels]))
    return loss, cache


def backward(model: Mlp, cache: ForwardCache) -> List[np.ndarray]:
    """
    由快取計算 L_m 對所有參數的解析梯度

    Raises:
        StaleCacheError: 快取來自不同版本的模型
    """
    if cache.version != model.version or cache.probs is None:
        raise StaleCacheError(f"快取版本 {cache.version} 與模型版本 {model.version} 不符")

    grads = [np.zeros_like(p) for p in model.params]
    batch_size = len(cache.labels)
    if batch_size == 0:
        return grads

    delta = cache.probs.copy()
    delta[np.arange(batch_size), cache.labels] -= 1.0
    delta /= batch_size

    last = len(model.params) // 2 - 1
    for layer in range(last, -1, -1):
        grads[2 * layer] = cache.inputs[layer].T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            a = cache.activations[layer - 1]
            delta = (delta @ model.params[2 * layer].T) * (1.0 - a * a)
    return grads


def sgd_step(model: Mlp, grads: Sequence[np.ndarray], config: TrainConfig,
             learning_rate: Optional[float] = None,
             trainable: Optional[Sequence[bool]] = None) -> Mlp:
    """
    一步帶動量與權重衰減的 SGD

    v ← momentum·v + grad + weight_decay·θ；θ ← θ − η·v

    Args:
        model: 目前模型
        grads: 各參數梯度
        config: 訓練設定
        learning_rate: 覆寫 config.learning_rate（學習率排程使用）
        trainable: 各張量是否更新；凍結的張量不更新也不衰減

    Returns:
        更新後的新模型（version + 1）
    """
    if len(grads) != len(model.params):
        raise ShapeMismatchError(f"梯度數量 {len(grads)} 與參數數量 {len(model.params)} 不符")
    lr = config.learning_rate if learning_rate is None else learning_rate
    velocity = model.velocity or [np.zeros_like(p) for p in model.params]

    new_params, new_velocity = [], []
    for i, (theta, grad, v) in enumerate(zip(model.params, grads, velocity)):
        if grad.shape != theta.shape:
            raise ShapeMismatchError(f"梯度 {i} 形狀 {grad.shape} 與參數形狀 {theta.shape} 不符")
        if trainable is not None and not trainable[i]:
            new_params.append(theta.copy())
            new_velocity.append(v.copy())
            continue
        v_next = config.momentum * v + grad + config.weight_decay * theta
        theta_next = theta - lr * v_next
        if not np.all(np.isfinite(theta_next)):
            bad = int(np.count_nonzero(~np.isfinite(theta_next)))
            raise DivergenceError(
                f"參數 {i} 更新後出現 {bad} 個非有限值",
                details={'tensor': i, 'non_finite': bad,
                         'grad_max_abs': float(np.nanmax(np.abs(grad))), 'learning_rate': lr})
        new_params.append(theta_next)
        new_velocity.append(v_next)

    return Mlp(list(model.layer_sizes), new_params, new_velocity, model.version + 1)


def predict(model: Mlp, features: np.ndarray) -> np.ndarray:
    """預測類別"""
    return np.argmax(logits(model, features), axis=1)


def accuracy(model: Mlp, dataset: Dataset) -> float:
    """分類準確率；空資料集回傳 0"""
    if len(dataset) == 0:
        return 0.0
    return float(np.mean(predict(model, dataset.features) == dataset.labels))
