#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Attacks - 攻擊模擬模組

偽造、覆寫、微調與剪枝四種攻擊，並依攻擊成功準則自動判定結果：
移除擁有者浮水印（ρ < ρ*）且維持模型效能才算成功；覆寫與偽造另外要求
攻擊者自己的浮水印通過驗證
"""

import math
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit

try:
    from .checkpoint import ModelCheckpoint
    from .embedder import (EPSILON, STAGE_FINETUNE, STAGE_OVERWRITE, WatermarkObjective, WatermarkTuple,
                           embed_loss, ExtractedWatermark, owner_objective, run_training)
    from .error_handler import ConfigError, DivergenceError, InputValidator
    from .hashmark import SecretKey, Watermark
    from .tinynet import Dataset, Mlp, TrainConfig, accuracy
    from .utils import STREAM_ADVERSARY, STREAM_HEAD, STREAM_PRUNE, derive_rng, to_fraction
    from .vanilla import VanillaTuple, vanilla_objective, vanilla_select, vanilla_verify
    from .verifier import (DetectionReport, RateLike, detection_rate,
                           threshold_bits, verify)
except ImportError:
    from checkpoint import ModelCheckpoint
    from embedder import (EPSILON, STAGE_FINETUNE, STAGE_OVERWRITE, WatermarkObjective, WatermarkTuple,
                          embed_loss, ExtractedWatermark, owner_objective, run_training)
    from error_handler import ConfigError, DivergenceError, InputValidator
    from hashmark import SecretKey, Watermark
    from tinynet import Dataset, Mlp, TrainConfig, accuracy
    from utils import STREAM_ADVERSARY, STREAM_HEAD, STREAM_PRUNE, derive_rng, to_fraction
    from vanilla import VanillaTuple, vanilla_objective, vanilla_select, vanilla_verify
    from verifier import (DetectionReport, RateLike, detection_rate,
                          threshold_bits, verify)


logger = logging.getLogger(__name__)

ATTACK_KINDS = ('forge', 'overwrite', 'finetune', 'prune')
FINETUNE_SCOPES = ('all', 'watermark_layer')
ACCURACY_TOLERANCE = 0.05

OwnerTuple = Union[WatermarkTuple, VanillaTuple]


class SweepResult(NamedTuple):
    """掃描結果：表格、各格報告與各格攻擊後的檢查點"""
    table: pd.DataFrame
    reports: List["AttackReport"]
    checkpoints: List[Optional[ModelCheckpoint]]


@dataclass
class AttackReport:
    """單次攻擊的結果"""
    attack_kind: str
    original_rho: float                     # 攻擊後擁有者浮水印的 ρ
    rho_star: float
    accuracy_before: float
    accuracy_after: float
    success: bool
    adversary_rho: Optional[float] = None
    original_rho_before: Optional[float] = None
    adversary_verdict: Optional[bool] = None
    diverged: bool = False
    attack_params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'attack_kind': self.attack_kind,
            'original_rho': self.original_rho,
            'original_rho_before': self.original_rho_before,
            'adversary_rho': self.adversary_rho,
            'adversary_verdict': self.adversary_verdict,
            'rho_star': self.rho_star,
            'accuracy_before': self.accuracy_before,
            'accuracy_after': self.accuracy_after,
            'success': self.success,
            'diverged': self.diverged,
            'attack_params': self.attack_params,
        }


def evaluate_success(kind: str, original_rho: float, rho_star: float, accuracy_before: float,
                     accuracy_after: float, adversary_verdict: Optional[bool] = None,
                     tolerance: float = ACCURACY_TOLERANCE) -> bool:
    """
    攻擊成功準則

    - forge：攻擊者的浮水印組通過驗證
    - overwrite：擁有者 ρ < ρ*、效能維持且攻擊者浮水印通過驗證；兩者並存不算成功
    - finetune / prune：擁有者 ρ < ρ* 且效能維持

    Args:
        kind: 攻擊種類
        original_rho: 攻擊後擁有者的 ρ
        rho_star: 安全邊界
        accuracy_before: 攻擊前準確率
        accuracy_after: 攻擊後準確率
        adversary_verdict: 攻擊者浮水印的驗證結果
        tolerance: 允許的準確率下降

    Returns:
        是否成功
    """
    if kind not in ATTACK_KINDS:
        raise ValueError(f"未知的攻擊種類 '{kind}'，可用: {ATTACK_KINDS}")
    if kind == 'forge':
        return bool(adversary_verdict)

    removed = original_rho < rho_star
    maintained = accuracy_after >= accuracy_before - tolerance
    if kind == 'overwrite':
        return removed and maintained and bool(adversary_verdict)
    return removed and maintained


def is_vanilla(checkpoint: ModelCheckpoint, owner_tuple: Optional[OwnerTuple] = None) -> bool:
    return isinstance(owner_tuple, VanillaTuple) or checkpoint.scheme == 'vanilla'


def owner_report(checkpoint: ModelCheckpoint, owner_tuple: OwnerTuple, config: TrainConfig,
                 rho_star: Optional[RateLike] = None) -> DetectionReport:
    """依方案選擇驗證流程"""
    if isinstance(owner_tuple, VanillaTuple):
        return vanilla_verify(checkpoint, owner_tuple, config, rho_star)
    return verify(checkpoint, owner_tuple, config, rho_star)


def adversary_tuple(config: TrainConfig, seed: int, trial: int = 0, aux: bytes = b"",
                    hash_consistent: bool = True) -> WatermarkTuple:
    """
    攻擊者的浮水印組

    hash_consistent 為 False 時浮水印為獨立的隨機位元（消融實驗用）
    """
    rng = derive_rng(seed, STREAM_ADVERSARY, trial)
    if hash_consistent:
        return WatermarkTuple.create(config.key_rows, config.watermark_len, rng, aux)
    key = SecretKey.sample(config.key_rows, config.watermark_len, rng)
    return WatermarkTuple(key, Watermark(rng.integers(0, 2, size=config.watermark_len)), aux)


def forge_random(checkpoint: ModelCheckpoint, config: TrainConfig, trials: int, seed: int,
                 aux: bytes = b"", hash_consistent: bool = True,
                 rho_star: Optional[RateLike] = None) -> List[float]:
    """
    隨機偽造：每次試驗產生新的 (K', H(K')) 並對凍結的模型驗證

    Returns:
        每次試驗的 ρ；模型不會被修改
    """
    return [r.rho for r in _forge_reports(checkpoint, config, trials, seed, aux, hash_consistent, rho_star)]


def _forge_reports(checkpoint: ModelCheckpoint, config: TrainConfig, trials: int, seed: int,
                   aux: bytes, hash_consistent: bool,
                   rho_star: Optional[RateLike]) -> List[DetectionReport]:
    if trials < 1:
        raise ValueError(f"trials 必須 >= 1，目前為 {trials}")
    reports = []
    for trial in range(trials):
        forged = adversary_tuple(config, seed, trial, aux, hash_consistent)
        if is_vanilla(checkpoint):
            report = vanilla_verify(checkpoint, VanillaTuple(forged.key, forged.watermark), config, rho_star)
        else:
            report = verify(checkpoint, forged, config, rho_star)
        logger.debug(f"forge trial {trial}: rho={report.rho:.4f}, verdict={report.verdict}")
        reports.append(report)
    return reports


def forge_attack(checkpoint: ModelCheckpoint, owner_tuple: OwnerTuple, config: TrainConfig,
                 eval_set: Dataset, trials: int, seed: int, aux: bytes = b"",
                 hash_consistent: bool = True,
                 rho_star: Optional[RateLike] = None) -> AttackReport:
    """執行隨機偽造並整理為 AttackReport"""
    reports = _forge_reports(checkpoint, config, trials, seed, aux, hash_consistent, rho_star)
    owner = owner_report(checkpoint, owner_tuple, config, rho_star)
    acc = accuracy(checkpoint.to_model(), eval_set)
    rhos = [r.rho for r in reports]
    best = max(reports, key=lambda r: r.rho)
    return AttackReport(
        attack_kind='forge',
        original_rho=owner.rho,
        original_rho_before=owner.rho,
        rho_star=float(owner.rho_star),
        accuracy_before=acc,
        accuracy_after=acc,
        adversary_rho=best.rho,
        adversary_verdict=any(r.verdict for r in reports),
        success=evaluate_success('forge', owner.rho, float(owner.rho_star), acc, acc,
                                 any(r.verdict for r in reports)),
        attack_params={'trials': trials, 'seed': seed, 'hash_consistent': hash_consistent,
                       'rhos': rhos, 'mean_rho': float(np.mean(rhos))},
    )


def forge_learn_key(checkpoint: ModelCheckpoint, b_a: Union[Watermark, np.ndarray], config: TrainConfig,
                    steps: int = 2000, learning_rate: float = 100.0,
                    seed: int = 0) -> Tuple[SecretKey, float]:
    """
    凍結模型參數，只以梯度下降學習金鑰 K_a，使 δ(w̃K_a) 逼近任意指定的 b_a

    w̃ 取自公開可重建的子集（vanilla_select），對基準方案必然成功；
    對雜湊方案而言學到的 K_a 幾乎不可能滿足 H(K_a) = b_a

    Args:
        checkpoint: 目標檢查點
        b_a: 攻擊者指定的浮水印
        config: 提供嵌入層與 k
        steps: 梯度步數
        learning_rate: 步長
        seed: 金鑰初始化種子

    Returns:
        (學到的金鑰, 對 b_a 的 ρ)

    Raises:
        DivergenceError: 金鑰出現非有限值
    """
    target = b_a.bits if isinstance(b_a, Watermark) else np.asarray(b_a, dtype=np.uint8)
    n = len(target)
    w_tilde = vanilla_select(checkpoint, config.embed_layer, config.key_rows)
    key = derive_rng(seed, STREAM_ADVERSARY).standard_normal((config.key_rows, n))

    for step in range(steps):
        probs = expit(w_tilde @ key)
        key = key - learning_rate * np.outer(w_tilde, (probs - target) / n)
        if not np.all(np.isfinite(key)):
            raise DivergenceError(f"金鑰在第 {step + 1} 步出現非有限值", step=step + 1)

    learned = SecretKey(key)
    probs = np.clip(expit(w_tilde @ learned.values), EPSILON, 1.0 - EPSILON)
    rho = detection_rate(threshold_bits(probs), target)
    logger.info(f"forge_learn_key: steps={steps}, loss={embed_loss(ExtractedWatermark(probs), target):.6f}, "
                f"rho={rho:.4f}")
    return learned, rho


def learned_key_attack(checkpoint: ModelCheckpoint, owner_tuple: OwnerTuple, config: TrainConfig,
                       eval_set: Dataset, steps: int, learning_rate: float, seed: int,
                       rho_star: Optional[RateLike] = None) -> AttackReport:
    """
    以學習金鑰的方式偽造，並依目標方案的驗證流程判定

    基準方案只比較 ρ；雜湊方案另外檢查 H(K_a || C) = b_a
    """
    b_a = adversary_tuple(config, seed).watermark
    key, rho = forge_learn_key(checkpoint, b_a, config, steps, learning_rate, seed)
    if is_vanilla(checkpoint, owner_tuple):
        forged = vanilla_verify(checkpoint, VanillaTuple(key, b_a), config, rho_star)
    else:
        forged = verify(checkpoint, WatermarkTuple(key, b_a), config, rho_star)
    owner = owner_report(checkpoint, owner_tuple, config, rho_star)
    acc = accuracy(checkpoint.to_model(), eval_set)
    return AttackReport(
        attack_kind='forge',
        original_rho=owner.rho,
        original_rho_before=owner.rho,
        rho_star=float(owner.rho_star),
        accuracy_before=acc,
        accuracy_after=acc,
        adversary_rho=rho,
        adversary_verdict=forged.verdict,
        success=evaluate_success('forge', owner.rho, float(owner.rho_star), acc, acc, forged.verdict),
        attack_params={'mode': 'learn-key', 'steps': steps, 'learning_rate': learning_rate,
                       'seed': seed, 'hash_consistent': forged.hash_consistent},
    )


def _attack_config(config: TrainConfig, seed: int, learning_rate: float,
                   lam: Optional[float] = None) -> TrainConfig:
    return replace(config, seed=seed, learning_rate=learning_rate, lr_milestones=(),
                   lam=config.lam if lam is None else lam)


def _adversary_objective(model: Mlp, adversary: OwnerTuple, config: TrainConfig, lam: float,
                         vanilla: bool) -> WatermarkObjective:
    if vanilla:
        return vanilla_objective(model.params, adversary.watermark, adversary.key, config, lam)
    if not adversary.is_hash_consistent():
        logger.warning("攻擊者的浮水印組不滿足雜湊一致性（消融設定）")
    return owner_objective(model.params, adversary, config, lam)


def overwrite(checkpoint: ModelCheckpoint, dataset: Dataset, adversary: OwnerTuple,
              lam_a: float, lr_a: float, epochs: int, seed: int,
              owner_tuple: OwnerTuple, config: TrainConfig,
              test_set: Optional[Dataset] = None,
              adversary_rounds: Optional[int] = None,
              rho_star: Optional[RateLike] = None,
              tolerance: float = ACCURACY_TOLERANCE) -> Tuple[Optional[ModelCheckpoint], AttackReport]:
    """
    覆寫攻擊：從竊得的檢查點以 L_m + λ_a·L_e(b_a) 繼續訓練

    攻擊者以自己的浮水印重建自己的過濾紀錄（輪數預設與擁有者相同）

    Args:
        checkpoint: 竊得的檢查點
        dataset: 攻擊者可用的訓練資料
        adversary: 攻擊者的浮水印組
        lam_a: 攻擊者的 λ
        lr_a: 攻擊者的學習率
        epochs: 訓練 epoch 數
        seed: 洗牌種子
        owner_tuple: 擁有者的浮水印組（量測用）
        config: 擁有者的嵌入設定
        test_set: 評估準確率的資料，省略時使用 dataset
        adversary_rounds: 攻擊者的過濾輪數
        rho_star: 安全邊界
        tolerance: 準確率容許下降

    Returns:
        (新檢查點, AttackReport)；發散時檢查點為 None 且報告標記 diverged
    """
    eval_set = test_set if test_set is not None else dataset
    vanilla = is_vanilla(checkpoint, owner_tuple)
    adv_config = replace(config, filter_rounds=adversary_rounds or config.filter_rounds)
    train_config = _attack_config(adv_config, seed, lr_a, lam_a)

    before = owner_report(checkpoint, owner_tuple, config, rho_star)
    model = checkpoint.to_model()
    acc_before = accuracy(model, eval_set)
    objective = _adversary_objective(model, adversary, adv_config, lam_a, vanilla)
    params = {'lam_a': lam_a, 'lr_a': lr_a, 'epochs': epochs, 'seed': seed,
              'adversary_rounds': adv_config.filter_rounds, 'scheme': 'vanilla' if vanilla else 'hashmark'}

    try:
        model, _ = run_training(model, dataset, train_config, [objective], epochs=epochs,
                                learning_rate=lr_a, stage=STAGE_OVERWRITE)
    except DivergenceError as e:
        logger.warning(f"overwrite λ_a={lam_a}, η_a={lr_a} 發散於 epoch {e.epoch}")
        report = AttackReport('overwrite', float('nan'), float(before.rho_star), acc_before, 0.0,
                              success=False, original_rho_before=before.rho, diverged=True,
                              attack_params=params)
        return None, report

    attacked = checkpoint.with_layers(model.params, attack='overwrite')
    after = owner_report(attacked, owner_tuple, config, rho_star)
    if vanilla:
        adv = vanilla_verify(attacked, VanillaTuple(adversary.key, adversary.watermark), config, rho_star)
    else:
        adv = verify(attacked, adversary, adv_config, rho_star)
    acc_after = accuracy(model, eval_set)

    report = AttackReport(
        attack_kind='overwrite',
        original_rho=after.rho,
        original_rho_before=before.rho,
        rho_star=float(after.rho_star),
        accuracy_before=acc_before,
        accuracy_after=acc_after,
        adversary_rho=adv.rho,
        adversary_verdict=adv.verdict,
        success=evaluate_success('overwrite', after.rho, float(after.rho_star), acc_before, acc_after,
                                 adv.verdict, tolerance),
        attack_params=params,
    )
    logger.info(f"overwrite λ_a={lam_a}, η_a={lr_a}: owner rho={after.rho:.4f}, "
                f"adversary rho={adv.rho:.4f}, acc={acc_after:.4f}, success={report.success}")
    return attacked, report


def reinitialize_head(model: Mlp, seed: int) -> Mlp:
    """以 Glorot 均勻分佈重新初始化分類頭，偏差歸零"""
    w_index, b_index = model.head_indices
    fan_in, fan_out = model.params[w_index].shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    params = [p.copy() for p in model.params]
    params[w_index] = derive_rng(seed, STREAM_HEAD).uniform(-limit, limit, size=(fan_in, fan_out))
    params[b_index] = np.zeros(fan_out)
    return Mlp(list(model.layer_sizes), params)


def finetune(checkpoint: ModelCheckpoint, dataset: Dataset, scope: str, learning_rate: float,
             epochs: int, seed: int, owner_tuple: OwnerTuple, config: TrainConfig,
             test_set: Optional[Dataset] = None,
             rho_star: Optional[RateLike] = None,
             tolerance: float = ACCURACY_TOLERANCE) -> Tuple[ModelCheckpoint, AttackReport]:
    """
    微調攻擊：替換分類頭後只以 L_m 訓練

    Args:
        checkpoint: 竊得的檢查點
        dataset: 新任務（或原任務）的訓練資料
        scope: 'all' 更新全部參數；'watermark_layer' 只更新嵌入層與新分類頭
        learning_rate: 微調學習率
        epochs: epoch 數，0 表示不做任何事
        seed: 分類頭初始化與洗牌種子
        owner_tuple: 擁有者的浮水印組
        config: 擁有者的嵌入設定
        test_set: 評估準確率的資料
        rho_star: 安全邊界
        tolerance: 準確率容許下降

    Returns:
        (新檢查點, AttackReport)
    """
    if scope not in FINETUNE_SCOPES:
        raise ValueError(f"未知的微調範圍 '{scope}'，可用: {FINETUNE_SCOPES}")
    eval_set = test_set if test_set is not None else dataset
    before = owner_report(checkpoint, owner_tuple, config, rho_star)
    model = checkpoint.to_model()
    acc_before = accuracy(model, eval_set)
    params = {'scope': scope, 'learning_rate': learning_rate, 'epochs': epochs, 'seed': seed}

    if epochs == 0:
        return checkpoint.copy(), AttackReport(
            'finetune', before.rho, float(before.rho_star), acc_before, acc_before,
            success=False, original_rho_before=before.rho, attack_params=params)

    model = reinitialize_head(model, seed)
    trainable = None
    if scope == 'watermark_layer':
        allowed = set(config.embed_layers()) | set(model.head_indices)
        trainable = [i in allowed for i in range(model.num_tensors)]

    model, _ = run_training(model, dataset, _attack_config(config, seed, learning_rate), [],
                            epochs=epochs, learning_rate=learning_rate, trainable=trainable,
                            stage=STAGE_FINETUNE)
    attacked = checkpoint.with_layers(model.params, attack='finetune')
    after = owner_report(attacked, owner_tuple, config, rho_star)
    acc_after = accuracy(model, eval_set)

    report = AttackReport(
        attack_kind='finetune',
        original_rho=after.rho,
        original_rho_before=before.rho,
        rho_star=float(after.rho_star),
        accuracy_before=acc_before,
        accuracy_after=acc_after,
        success=evaluate_success('finetune', after.rho, float(after.rho_star), acc_before, acc_after,
                                 tolerance=tolerance),
        attack_params=params,
    )
    logger.info(f"finetune scope={scope}: rho={after.rho:.4f}, acc={acc_after:.4f}")
    return attacked, report


def prune_layer(values: np.ndarray, ratio: RateLike, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    隨機選取 ⌊ratio·m⌋ 個位置設為 0（形狀不變）

    Returns:
        (剪枝後的陣列, 被歸零的攤平索引)
    """
    ratio_value = to_fraction(ratio)
    is_valid, message = InputValidator.validate_ratio(float(ratio_value))
    if not is_valid:
        raise ValueError(message)
    values = np.asarray(values, dtype=np.float64)
    count = math.floor(ratio_value * values.size)
    zeroed = np.sort(derive_rng(seed, STREAM_PRUNE).choice(values.size, size=count, replace=False))
    flat = values.reshape(-1).copy()
    flat[zeroed] = 0.0
    return flat.reshape(values.shape), zeroed


def prune(checkpoint: ModelCheckpoint, ratio: RateLike, layer: int, seed: int,
          owner_tuple: OwnerTuple, config: TrainConfig, eval_set: Dataset,
          rho_star: Optional[RateLike] = None,
          tolerance: float = ACCURACY_TOLERANCE) -> Tuple[ModelCheckpoint, AttackReport]:
    """
    剪枝攻擊：將指定層的隨機比例參數重設為 0

    Args:
        checkpoint: 竊得的檢查點
        ratio: 剪枝比例 [0, 1]
        layer: 參數張量索引
        seed: 亂數種子
        owner_tuple: 擁有者的浮水印組
        config: 擁有者的嵌入設定
        eval_set: 評估準確率的資料
        rho_star: 安全邊界
        tolerance: 準確率容許下降

    Returns:
        (新檢查點, AttackReport)
    """
    if not 0 <= layer < len(checkpoint.layers):
        raise ConfigError(f"剪枝層索引 {layer} 超出範圍（共 {len(checkpoint.layers)} 個張量）")
    before = owner_report(checkpoint, owner_tuple, config, rho_star)
    acc_before = accuracy(checkpoint.to_model(), eval_set)

    layers = [p.copy() for p in checkpoint.layers]
    layers[layer], zeroed = prune_layer(layers[layer], ratio, seed)
    attacked = checkpoint.with_layers(layers, attack='prune')
    after = owner_report(attacked, owner_tuple, config, rho_star)
    acc_after = accuracy(attacked.to_model(), eval_set)

    report = AttackReport(
        attack_kind='prune',
        original_rho=after.rho,
        original_rho_before=before.rho,
        rho_star=float(after.rho_star),
        accuracy_before=acc_before,
        accuracy_after=acc_after,
        success=evaluate_success('prune', after.rho, float(after.rho_star), acc_before, acc_after,
                                 tolerance=tolerance),
        attack_params={'ratio': float(to_fraction(ratio)), 'layer': layer, 'seed': seed,
                       'zeroed': int(len(zeroed))},
    )
    logger.info(f"prune ratio={float(to_fraction(ratio)):.2f}: rho={after.rho:.4f}, acc={acc_after:.4f}")
    return attacked, report


def prune_sweep(checkpoint: ModelCheckpoint, ratios: Sequence[float], layer: int, seed: int,
                owner_tuple: OwnerTuple, config: TrainConfig, eval_set: Dataset,
                rho_star: Optional[RateLike] = None,
                tolerance: float = ACCURACY_TOLERANCE) -> SweepResult:
    """
    剪枝比例掃描

    Returns:
        SweepResult，表格為 ratio, rho, accuracy 三欄
    """
    cells = [prune(checkpoint, ratio, layer, seed, owner_tuple, config, eval_set, rho_star, tolerance)
             for ratio in ratios]
    reports = [report for _, report in cells]
    table = pd.DataFrame({
        'ratio': [float(r) for r in ratios],
        'rho': [r.original_rho for r in reports],
        'accuracy': [r.accuracy_after for r in reports],
    })
    return SweepResult(table, reports, [ckpt for ckpt, _ in cells])


def overwrite_sweep(checkpoint: ModelCheckpoint, dataset: Dataset, adversary: OwnerTuple,
                    lams: Sequence[float], lrs: Sequence[float], epochs: int, seed: int,
                    owner_tuple: OwnerTuple, config: TrainConfig,
                    test_set: Optional[Dataset] = None,
                    adversary_rounds: Optional[int] = None,
                    rho_star: Optional[RateLike] = None,
                    tolerance: float = ACCURACY_TOLERANCE) -> SweepResult:
    """
    (λ_a, η_a) 網格覆寫掃描，每格從同一個檢查點出發

    Returns:
        SweepResult，表格每格一列；發散的格子檢查點為 None
    """
    rows, reports, checkpoints = [], [], []
    for lr in lrs:
        for lam in lams:
            attacked, report = overwrite(checkpoint, dataset, adversary, lam, lr, epochs, seed,
                                         owner_tuple, config, test_set, adversary_rounds, rho_star, tolerance)
            reports.append(report)
            checkpoints.append(attacked)
            rows.append({
                'lam_a': lam,
                'lr_a': lr,
                'original_rho': report.original_rho,
                'adversary_rho': report.adversary_rho,
                'accuracy_before': report.accuracy_before,
                'accuracy_after': report.accuracy_after,
                'success': report.success,
            })
    return SweepResult(pd.DataFrame(rows), reports, checkpoints)
