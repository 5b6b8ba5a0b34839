#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Model Watermark Analyzer - 雜湊浮水印神經網路所有權工具

這個套件提供了完整的白盒模型浮水印流程，包括：
- 由秘密金鑰雜湊產生浮水印
- 以浮水印過濾參數並平均池化
- 嵌入訓練與所有權驗證
- 偽造、覆寫、微調、剪枝攻擊模擬
- 無雜湊基準方案與參數分佈分析

主要模組：
- hashmark: 金鑰與雜湊浮水印
- filterpool: 過濾與池化
- tinynet: 最小多層感知器
- embedder: 嵌入訓練
- verifier: 驗證與安全邊界
- attacks: 攻擊模擬
- vanilla: 基準方案
- cli: 命令列介面
"""

__version__ = "1.0.0"
__author__ = "Model Watermark Analysis Team"
__email__ = ""
__description__ = "雜湊浮水印神經網路所有權工具"

# 匯入主要類別
from .hashmark import SecretKey, Watermark, generate_watermark, avalanche_score
from .filterpool import ParamSlice, FilterTrace, filter_rounds, avg_pool, overlap_ratio
from .tinynet import Dataset, Mlp, TrainConfig, make_blobs
from .checkpoint import ModelCheckpoint
from .embedder import WatermarkTuple, extract, embed_loss, joint_grad, train_watermarked
from .verifier import DetectionReport, forgery_bound, security_threshold, verify
from .vanilla import VanillaTuple, vanilla_select, vanilla_train, vanilla_verify
from .attacks import AttackReport, forge_random, forge_learn_key, overwrite, finetune, prune
from .config import ExperimentConfig, load_config

# 定義公開的API
__all__ = [
    "SecretKey",
    "Watermark",
    "generate_watermark",
    "avalanche_score",
    "ParamSlice",
    "FilterTrace",
    "filter_rounds",
    "avg_pool",
    "overlap_ratio",
    "Dataset",
    "Mlp",
    "TrainConfig",
    "make_blobs",
    "ModelCheckpoint",
    "WatermarkTuple",
    "extract",
    "embed_loss",
    "joint_grad",
    "train_watermarked",
    "DetectionReport",
    "forgery_bound",
    "security_threshold",
    "verify",
    "VanillaTuple",
    "vanilla_select",
    "vanilla_train",
    "vanilla_verify",
    "AttackReport",
    "forge_random",
    "forge_learn_key",
    "overwrite",
    "finetune",
    "prune",
    "ExperimentConfig",
    "load_config",
    "__version__",
]


def get_version():
    """取得版本資訊"""
    return __version__


def get_info():
    """取得套件資訊"""
    return {
        "name": "model-watermark-analyzer",
        "version": __version__,
        "author": __author__,
        "description": __description__,
        "python_requires": ">=3.8"
    }
