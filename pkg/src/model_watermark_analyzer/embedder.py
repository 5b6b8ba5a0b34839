#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Embedder - 浮水印嵌入模組

浮水印抽取 b̃ = δ(w̃K)、嵌入損失 L_e、聯合目標 L_m + λ·L_e 的梯度，
以及完整的嵌入訓練流程
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit

try:
    from .checkpoint import ModelCheckpoint
    from .error_handler import DivergenceError, ShapeMismatchError
    from .filterpool import (FilterTrace, ParamSlice, PoolSpec, avg_pool, filter_rounds,
                             route_gradient, truncate_pool)
    from .hashmark import SecretKey, Watermark, generate_watermark
    from .tinynet import Dataset, Mlp, TrainConfig, accuracy, backward, forward_loss, sgd_step
    from .utils import STREAM_SHUFFLE, canonical_json, derive_rng, fingerprint_text
except ImportError:
    from checkpoint import ModelCheckpoint
    from error_handler import DivergenceError, ShapeMismatchError
    from filterpool import (FilterTrace, ParamSlice, PoolSpec, avg_pool, filter_rounds,
                            route_gradient, truncate_pool)
    from hashmark import SecretKey, Watermark, generate_watermark
    from tinynet import Dataset, Mlp, TrainConfig, accuracy, backward, forward_loss, sgd_step
    from utils import STREAM_SHUFFLE, canonical_json, derive_rng, fingerprint_text


logger = logging.getLogger(__name__)

EPSILON = 1e-12

REDUCTIONS = ('sum', 'mean')

CURVE_COLUMNS = ['epoch', 'train_acc', 'test_acc', 'L_m', 'L_e', 'rho']

# 訓練階段編號，區分擁有者訓練與各種攻擊的洗牌串流
STAGE_OWNER = 0
STAGE_OVERWRITE = 1
STAGE_FINETUNE = 2


@dataclass(eq=False)
class WatermarkTuple:
    """浮水印組 {K, b}"""
    key: SecretKey
    watermark: Watermark
    aux: bytes = b""

    def __post_init__(self):
        if self.watermark.n != self.key.cols:
            raise ShapeMismatchError(f"浮水印長度 {self.watermark.n} 與金鑰欄數 {self.key.cols} 不符")

    @property
    def n(self) -> int:
        return self.watermark.n

    def is_hash_consistent(self) -> bool:
        """H(K || C) 是否等於 b"""
        return generate_watermark(self.key, self.aux) == self.watermark

    @classmethod
    def create(cls, rows: int, cols: int, rng: Union[np.random.Generator, int],
               aux: bytes = b"") -> 'WatermarkTuple':
        """抽樣金鑰並以雜湊產生浮水印"""
        key = SecretKey.sample(rows, cols, rng)
        return cls(key, generate_watermark(key, aux), aux)


@dataclass(eq=False)
class ExtractedWatermark:
    """抽取出的浮水印機率 b̃"""
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if probs.ndim != 1:
            raise ShapeMismatchError(f"機率向量必須為一維，目前為 {probs.shape}")
        if np.any((probs <= 0) | (probs >= 1)):
            raise ValueError("機率必須嚴格介於 0 與 1 之間")
        self.probabilities = probs

    @property
    def n(self) -> int:
        return len(self.probabilities)


def extract(w_tilde: np.ndarray, key: SecretKey) -> ExtractedWatermark:
    """
    b̃ = δ(w̃K)，並夾在 [ε, 1−ε] 之內

    Args:
        w_tilde: 池化後的參數（長度 k）
        key: 秘密金鑰 (k × n)

    Returns:
        ExtractedWatermark
    """
    w_tilde = np.asarray(w_tilde, dtype=np.float64)
    if w_tilde.shape != (key.rows,):
        raise ShapeMismatchError(f"w̃ 形狀 {w_tilde.shape} 與金鑰列數 {key.rows} 不符")
    probs = expit(w_tilde @ key.values)
    return ExtractedWatermark(np.clip(probs, EPSILON, 1.0 - EPSILON))


def embed_loss(extracted: ExtractedWatermark, target: Union[Watermark, np.ndarray],
               reduction: str = 'mean') -> float:
    """
    二元交叉熵 L_e

    Args:
        extracted: 抽取出的機率
        target: 目標浮水印
        reduction: 'mean' 對位元取平均；'sum' 對位元加總（訓練目標使用）

    Returns:
        L_e
    """
    bits = target.bits if isinstance(target, Watermark) else np.asarray(target)
    if len(bits) != extracted.n:
        raise ShapeMismatchError(f"目標長度 {len(bits)} 與抽取長度 {extracted.n} 不符")
    if reduction not in REDUCTIONS:
        raise ValueError(f"未知的歸約方式 '{reduction}'，可用: {REDUCTIONS}")
    p = np.clip(extracted.probabilities, EPSILON, 1.0 - EPSILON)
    per_bit = -(bits * np.log(p) + (1 - bits) * np.log(1 - p))
    return float(np.sum(per_bit) if reduction == 'sum' else np.mean(per_bit))


def flatten_layers(params: Sequence[np.ndarray], layers: Sequence[int]) -> np.ndarray:
    """將指定的參數張量攤平後依序串接"""
    for layer in layers:
        if not 0 <= layer < len(params):
            raise ShapeMismatchError(f"嵌入層索引 {layer} 超出範圍（共 {len(params)} 個張量）")
    return np.concatenate([np.asarray(params[i]).reshape(-1) for i in layers])


@dataclass(frozen=True, eq=False)
class WatermarkPlan:
    """嵌入層、過濾紀錄與池化設定；只由層形狀與浮水印決定"""
    layers: Tuple[int, ...]
    layer_sizes: Tuple[int, ...]
    trace: FilterTrace
    pool: PoolSpec
    pooling: bool = True

    @property
    def layer_len(self) -> int:
        return self.trace.layer_len

    def w_tilde(self, params: Sequence[np.ndarray]) -> np.ndarray:
        """w → 過濾 → 池化"""
        flat = flatten_layers(params, self.layers)
        final = self.trace.final
        survivors = ParamSlice(flat[final], final, self.layer_len)
        pooled, _ = (avg_pool if self.pooling else truncate_pool)(survivors, self.pool.output_len)
        return pooled

    def scatter(self, routed: np.ndarray, params: Sequence[np.ndarray]) -> List[np.ndarray]:
        """將串接層上的梯度拆回各參數張量形狀"""
        grads = [np.zeros_like(p) for p in params]
        offset = 0
        for layer, size in zip(self.layers, self.layer_sizes):
            grads[layer] = routed[offset:offset + size].reshape(params[layer].shape)
            offset += size
        return grads


def build_plan(params: Sequence[np.ndarray], watermark: Optional[Union[Watermark, np.ndarray]],
               k: int, filter_rounds_count: int, layers: Sequence[int],
               pooling: bool = True) -> WatermarkPlan:
    """
    依浮水印重建過濾紀錄與池化設定

    Args:
        params: 模型參數張量
        watermark: 作為過濾器的浮水印（R = 0 時不使用，可為 None）
        k: 池化輸出長度（= 金鑰列數）
        filter_rounds_count: 過濾輪數 R；0 表示不過濾（基準方案）
        layers: 嵌入層索引
        pooling: 是否平均池化

    Returns:
        WatermarkPlan
    """
    flat = flatten_layers(params, layers)
    whole = ParamSlice.from_layer(flat)
    if filter_rounds_count == 0:
        survivors, trace = whole, FilterTrace(len(flat), ())
    else:
        survivors, trace = filter_rounds(whole, watermark, filter_rounds_count)
    _, pool = (avg_pool if pooling else truncate_pool)(survivors, k)
    sizes = tuple(int(np.asarray(params[i]).size) for i in layers)
    logger.debug(f"plan: layers={tuple(layers)}, m={len(flat)}, survivors={len(survivors)}, "
                 f"window={pool.window}, tail={pool.discarded_tail}")
    return WatermarkPlan(tuple(layers), sizes, trace, pool, pooling)


class WatermarkObjective:
    """單一浮水印的嵌入項 λ·L_e(b, δ(w̃K))；L_e 依 reduction 對位元加總或平均"""

    def __init__(self, key: SecretKey, target: Union[Watermark, np.ndarray], plan: WatermarkPlan,
                 lam: float, reduction: str = 'sum'):
        self.key = key
        self.target = target.bits if isinstance(target, Watermark) else np.asarray(target, dtype=np.uint8)
        self.plan = plan
        self.lam = lam
        self.reduction = reduction
        if reduction not in REDUCTIONS:
            raise ValueError(f"未知的歸約方式 '{reduction}'，可用: {REDUCTIONS}")
        if len(self.target) != key.cols:
            raise ShapeMismatchError(f"目標長度 {len(self.target)} 與金鑰欄數 {key.cols} 不符")

    def extract(self, model: Mlp) -> ExtractedWatermark:
        return extract(self.plan.w_tilde(model.params), self.key)

    def loss(self, model: Mlp) -> float:
        return embed_loss(self.extract(model), self.target, self.reduction)

    def loss_and_grad(self, model: Mlp) -> Tuple[float, List[np.ndarray]]:
        """
        回傳 (L_e, ∂L_e/∂θ)；梯度只落在最後一輪過濾存活的索引上
        """
        w_tilde = self.plan.w_tilde(model.params)
        z = w_tilde @ self.key.values
        probs = expit(z)
        extracted = ExtractedWatermark(np.clip(probs, EPSILON, 1.0 - EPSILON))
        loss = embed_loss(extracted, self.target, self.reduction)

        grad_z = probs - self.target
        if self.reduction == 'mean':
            grad_z = grad_z / len(self.target)
        grad_w_tilde = self.key.values @ grad_z
        routed = route_gradient(grad_w_tilde, self.plan.pool, self.plan.trace)
        return loss, self.plan.scatter(routed, model.params)

    def detection_rate(self, model: Mlp) -> float:
        try:
            from .verifier import detection_rate, threshold_bits
        except ImportError:
            from verifier import detection_rate, threshold_bits
        return detection_rate(threshold_bits(self.extract(model)), self.target)


def owner_objective(params: Sequence[np.ndarray], wm_tuple: WatermarkTuple, config: TrainConfig,
                    lam: Optional[float] = None) -> WatermarkObjective:
    """依設定建立雜湊過濾方案的嵌入項"""
    plan = build_plan(params, wm_tuple.watermark, config.key_rows, config.filter_rounds,
                      config.embed_layers(), config.pooling)
    return WatermarkObjective(wm_tuple.key, wm_tuple.watermark, plan,
                              config.lam if lam is None else lam, config.bit_reduction)


def joint_loss_and_grad(model: Mlp, batch: Dataset,
                        objectives: Sequence[WatermarkObjective]) -> Tuple[float, float, List[np.ndarray]]:
    """
    L_m 與 Σ λ·L_e 的梯度

    Returns:
        (L_m, Σ L_e（未乘 λ）, 梯度)
    """
    main_loss, cache = forward_loss(model, batch)
    grads = backward(model, cache)
    wm_loss = 0.0
    for objective in objectives:
        loss, wm_grads = objective.loss_and_grad(model)
        wm_loss += loss
        if objective.lam:
            grads = [g + objective.lam * wg for g, wg in zip(grads, wm_grads)]
    return main_loss, wm_loss, grads


def joint_grad(model: Mlp, batch: Dataset, wm_tuple: WatermarkTuple, config: TrainConfig,
               objective: Optional[WatermarkObjective] = None) -> List[np.ndarray]:
    """
    ∇θ (L_m + λ·L_e)

    Args:
        model: MLP
        batch: 批次資料（可為空）
        wm_tuple: 浮水印組
        config: 訓練設定（λ、R、嵌入層、k）
        objective: 預先建立的嵌入項，省略時依設定重建

    Returns:
        各參數張量的梯度
    """
    if objective is None:
        objective = owner_objective(model.params, wm_tuple, config)
    _, _, grads = joint_loss_and_grad(model, batch, [objective])
    return grads


def joint_loss(model: Mlp, batch: Dataset, objective: WatermarkObjective) -> float:
    """L_m + λ·L_e 的數值（梯度檢查使用）"""
    main_loss, _ = forward_loss(model, batch)
    return main_loss + objective.lam * objective.loss(model)


@dataclass(eq=False)
class TrainingRun:
    """訓練結果：模型、檢查點與每個 epoch 的曲線"""
    model: Mlp
    checkpoint: ModelCheckpoint
    curves: pd.DataFrame

    @property
    def final(self) -> Dict[str, float]:
        return self.curves.iloc[-1].to_dict() if len(self.curves) else {}


def config_fingerprint(config: TrainConfig) -> str:
    """訓練設定指紋"""
    return fingerprint_text(canonical_json(asdict(config)))


def run_training(model: Mlp, dataset: Dataset, config: TrainConfig,
                 objectives: Sequence[WatermarkObjective] = (),
                 monitor: Optional[WatermarkObjective] = None,
                 test_set: Optional[Dataset] = None,
                 epochs: Optional[int] = None,
                 learning_rate: Optional[float] = None,
                 trainable: Optional[Sequence[bool]] = None,
                 stage: int = STAGE_OWNER) -> Tuple[Mlp, pd.DataFrame]:
    """
    小批次 SGD 訓練迴圈，每個小批次都計算一次浮水印梯度

    Args:
        model: 起始模型
        dataset: 訓練資料
        config: 訓練設定
        objectives: 參與優化的嵌入項
        monitor: 曲線中 rho 欄位所追蹤的浮水印（省略時取第一個嵌入項）
        test_set: 測試資料
        epochs: 覆寫 config.epochs
        learning_rate: 固定學習率（覆寫排程）
        trainable: 各張量是否可訓練
        stage: 洗牌亂數串流的階段編號

    Returns:
        (最終模型, 曲線 DataFrame)

    Raises:
        DivergenceError: 損失出現非有限值時，附上 epoch
    """
    epochs = config.epochs if epochs is None else epochs
    if monitor is None and objectives:
        monitor = objectives[0]
    rng = derive_rng(config.seed, STREAM_SHUFFLE, stage)
    rows = []

    for epoch in range(epochs):
        lr = config.learning_rate_at(epoch) if learning_rate is None else learning_rate
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), config.batch_size):
            batch = dataset.subset(order[start:start + config.batch_size])
            main_loss, wm_loss, grads = joint_loss_and_grad(model, batch, objectives)
            if not np.isfinite(main_loss + wm_loss):
                raise DivergenceError(f"第 {epoch + 1} 個 epoch 損失出現非有限值", epoch=epoch + 1)
            try:
                model = sgd_step(model, grads, config, lr, trainable)
            except DivergenceError as e:
                e.epoch = epoch + 1
                raise

        row = _epoch_row(epoch + 1, model, dataset, test_set, objectives, monitor)
        rows.append(row)
        if (epoch + 1) % config.log_every == 0 or epoch + 1 == epochs:
            logger.info(f"epoch {epoch + 1}/{epochs}: train_acc={row['train_acc']:.4f}, "
                        f"L_m={row['L_m']:.4f}, L_e={row['L_e']:.4f}, rho={row['rho']:.4f}")

    return model, pd.DataFrame(rows, columns=CURVE_COLUMNS)


def _epoch_row(epoch: int, model: Mlp, dataset: Dataset, test_set: Optional[Dataset],
               objectives: Sequence[WatermarkObjective],
               monitor: Optional[WatermarkObjective]) -> Dict[str, Any]:
    main_loss, _ = forward_loss(model, dataset)
    if not np.isfinite(main_loss):
        raise DivergenceError(f"第 {epoch} 個 epoch 損失出現非有限值", epoch=epoch)
    return {
        'epoch': epoch,
        'train_acc': accuracy(model, dataset),
        'test_acc': accuracy(model, test_set) if test_set is not None else float('nan'),
        'L_m': main_loss,
        'L_e': float(sum(o.loss(model) for o in objectives)),
        'rho': monitor.detection_rate(model) if monitor is not None else float('nan'),
    }


def check_tuple(wm_tuple: Any, config: TrainConfig) -> None:
    """浮水印組與設定的 n、k 必須一致"""
    if wm_tuple.n != config.watermark_len:
        raise ShapeMismatchError(f"浮水印長度 {wm_tuple.n} 與設定 watermark_len={config.watermark_len} 不符")
    if wm_tuple.key.rows != config.key_rows:
        raise ShapeMismatchError(f"金鑰列數 {wm_tuple.key.rows} 與設定 key_rows={config.key_rows} 不符")


def model_layer_sizes(dataset: Dataset, config: TrainConfig) -> List[int]:
    return [dataset.dims, *config.hidden_sizes, dataset.num_classes]


def train_watermarked(dataset: Dataset, wm_tuple: WatermarkTuple, config: TrainConfig,
                      test_set: Optional[Dataset] = None,
                      metadata: Optional[Dict[str, Any]] = None) -> TrainingRun:
    """
    以雜湊浮水印過濾方案訓練模型

    Args:
        dataset: 訓練資料
        wm_tuple: 擁有者的浮水印組
        config: 訓練設定
        test_set: 測試資料（曲線中的 test_acc）
        metadata: 額外寫入檢查點的元資料

    Returns:
        TrainingRun
    """
    config.validate()
    check_tuple(wm_tuple, config)
    model = Mlp.initialize(model_layer_sizes(dataset, config), config.seed)
    objective = owner_objective(model.params, wm_tuple, config)
    logger.info(f"embedding: n={wm_tuple.n}, k={config.key_rows}, R={config.filter_rounds}, "
                f"layers={config.embed_layers()}, survivors={len(objective.plan.trace.final)}")

    model, curves = run_training(model, dataset, config, [objective], test_set=test_set)
    checkpoint = ModelCheckpoint.from_model(
        model, 'hashmark', **_embedding_metadata(config, curves), **(metadata or {}))
    return TrainingRun(model, checkpoint, curves)


def train_clean(dataset: Dataset, config: TrainConfig, test_set: Optional[Dataset] = None,
                metadata: Optional[Dict[str, Any]] = None) -> TrainingRun:
    """不嵌入浮水印的基準訓練（與 λ = 0 相同的迴圈）"""
    config.validate()
    model = Mlp.initialize(model_layer_sizes(dataset, config), config.seed)
    model, curves = run_training(model, dataset, config, [], test_set=test_set)
    checkpoint = ModelCheckpoint.from_model(
        model, 'clean', config_fingerprint=config_fingerprint(config), **(metadata or {}))
    return TrainingRun(model, checkpoint, curves)


def _embedding_metadata(config: TrainConfig, curves: pd.DataFrame) -> Dict[str, Any]:
    meta: Dict[str, Any] = {
        'config_fingerprint': config_fingerprint(config),
        'embed_layers': list(config.embed_layers()),
        'filter_rounds': config.filter_rounds,
        'key_rows': config.key_rows,
        'watermark_len': config.watermark_len,
        'pooling': config.pooling,
    }
    if len(curves):
        meta['final_rho'] = float(curves['rho'].iloc[-1])
    return meta
