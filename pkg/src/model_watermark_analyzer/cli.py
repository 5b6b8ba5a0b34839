#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Model Watermark Analyzer - 命令列介面

子命令：train、verify、attack {forge|overwrite|finetune|prune}、boundary、analyze
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

try:
    from .analyzer import ParameterAnalyzer
    from .attacks import (OwnerTuple, adversary_tuple, finetune, forge_attack, learned_key_attack,
                          overwrite_sweep, prune_sweep)
    from .checkpoint import ModelCheckpoint
    from .config import ExperimentConfig, load_config
    from .embedder import WatermarkTuple, train_clean, train_watermarked
    from .error_handler import EXIT_OK, EXIT_USAGE, EXIT_VERDICT_FALSE, ConfigError, ErrorHandler
    from .hashmark import load_key, load_watermark
    from .result_manager import ResultManager
    from .tinynet import relabel
    from .utils import STREAM_KEY, STREAM_RELABEL, derive_rng, derive_seed, format_fraction, format_log2, format_rate
    from .vanilla import VanillaTuple, vanilla_train, vanilla_verify
    from .verifier import DetectionReport, forgery_bound, security_threshold, verify
except ImportError:
    from analyzer import ParameterAnalyzer
    from attacks import (OwnerTuple, adversary_tuple, finetune, forge_attack, learned_key_attack,
                         overwrite_sweep, prune_sweep)
    from checkpoint import ModelCheckpoint
    from config import ExperimentConfig, load_config
    from embedder import WatermarkTuple, train_clean, train_watermarked
    from error_handler import EXIT_OK, EXIT_USAGE, EXIT_VERDICT_FALSE, ConfigError, ErrorHandler
    from hashmark import load_key, load_watermark
    from result_manager import ResultManager
    from tinynet import relabel
    from utils import STREAM_KEY, STREAM_RELABEL, derive_rng, derive_seed, format_fraction, format_log2, format_rate
    from vanilla import VanillaTuple, vanilla_train, vanilla_verify
    from verifier import DetectionReport, forgery_bound, security_threshold, verify


logger = logging.getLogger(__name__)

CHECKPOINT_FILE = 'model.nmk'
KEY_FILE = 'key.bin'
WATERMARK_FILE = 'watermark.txt'


def build_parser() -> argparse.ArgumentParser:
    """建立命令列解析器"""
    parser = argparse.ArgumentParser(
        prog='watermark-analyzer',
        description='雜湊浮水印神經網路所有權工具',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
使用範例:
  %(prog)s train --config desk.txt --out runs/desk          # 訓練並嵌入浮水印
  %(prog)s verify --checkpoint runs/desk/model.nmk \\
      --key runs/desk/key.bin --watermark runs/desk/watermark.txt
  %(prog)s attack prune --checkpoint runs/desk/model.nmk \\
      --key runs/desk/key.bin --watermark runs/desk/watermark.txt
  %(prog)s boundary --n 256 --log2-target -128              # 安全邊界
  %(prog)s analyze runs/clean/model.nmk runs/desk/model.nmk  # 參數分佈分析
        """
    )
    parser.add_argument('--version', action='version', version='%(prog)s 1.0.0')
    parser.add_argument('--verbose', '-v', action='store_true', help='詳細輸出')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='設定檔路徑（key = value 格式）')
    common.add_argument('--seed', type=int, help='覆寫設定中的種子')
    common.add_argument('--out', help='輸出目錄（覆寫設定中的 output_dir）')

    artifacts = argparse.ArgumentParser(add_help=False)
    artifacts.add_argument('--checkpoint', required=True, help='檢查點檔案')
    artifacts.add_argument('--key', help='金鑰檔案（乾淨模型可省略）')
    artifacts.add_argument('--watermark', help='浮水印檔案')

    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', parents=[common], help='訓練模型（hashmark | vanilla | clean）')
    train.add_argument('--scheme', choices=['hashmark', 'vanilla', 'clean'], help='覆寫設定中的方案')
    train.add_argument('--epochs', type=int, help='覆寫訓練 epoch 數')

    sub.add_parser('verify', parents=[common, artifacts], help='驗證所有權（verdict 為真時結束碼為 0）')

    attack = sub.add_parser('attack', help='攻擊模擬')
    kinds = attack.add_subparsers(dest='kind', required=True)
    forge = kinds.add_parser('forge', parents=[common, artifacts], help='偽造攻擊')
    forge.add_argument('--mode', choices=['random', 'learn-key'], default='random',
                       help='random: 隨機雜湊一致浮水印組；learn-key: 凍結模型學習金鑰')
    forge.add_argument('--trials', type=int, help='隨機偽造次數')
    forge.add_argument('--steps', type=int, help='學習金鑰的梯度步數')
    overwrite = kinds.add_parser('overwrite', parents=[common, artifacts], help='覆寫攻擊')
    overwrite.add_argument('--lams', help='λ_a 網格，以逗號分隔')
    overwrite.add_argument('--lrs', help='η_a 網格，以逗號分隔')
    overwrite.add_argument('--epochs', type=int, help='攻擊 epoch 數')
    overwrite.add_argument('--adversary-rounds', type=int, help='攻擊者的過濾輪數')
    finetune_cmd = kinds.add_parser('finetune', parents=[common, artifacts], help='微調攻擊')
    finetune_cmd.add_argument('--scope', choices=['all', 'watermark_layer'], help='更新範圍')
    finetune_cmd.add_argument('--lr', type=float, help='微調學習率')
    finetune_cmd.add_argument('--epochs', type=int, help='微調 epoch 數')
    prune_cmd = kinds.add_parser('prune', parents=[common, artifacts], help='剪枝攻擊')
    prune_cmd.add_argument('--ratios', help='剪枝比例，以逗號分隔')
    prune_cmd.add_argument('--layer', type=int, help='剪枝的參數張量索引')

    boundary = sub.add_parser('boundary', parents=[common], help='安全邊界與偽造機率上界')
    boundary.add_argument('--n', type=int, help='浮水印長度（預設取設定值）')
    group = boundary.add_mutually_exclusive_group()
    group.add_argument('--log2-target', help='目標機率的 log2，例如 -128')
    group.add_argument('--rho', help='計算指定偵測率的上界，例如 0.75')

    analyze = sub.add_parser('analyze', parents=[common], help='參數直方圖與重疊率曲線')
    analyze.add_argument('checkpoints', nargs='+', help='檢查點檔案')
    analyze.add_argument('--watermark', help='擁有者浮水印（重疊率曲線需要）')
    analyze.add_argument('--counterfeits', type=int, help='偽造浮水印數量')
    analyze.add_argument('--max-rounds', type=int, help='重疊率曲線的最大輪數')
    return parser


def _float_list(text: Optional[str]) -> Optional[Tuple[float, ...]]:
    if text is None:
        return None
    try:
        return tuple(float(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise ConfigError(f"無法解析數值列表 '{text}'")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """讀取設定檔並套用命令列覆寫，回傳已驗證的設定"""
    config = load_config(args.config) if getattr(args, 'config', None) else ExperimentConfig()
    overrides = {
        'seed': getattr(args, 'seed', None),
        'output_dir': getattr(args, 'out', None),
        'scheme': getattr(args, 'scheme', None),
        'forge_trials': getattr(args, 'trials', None),
        'forge_steps': getattr(args, 'steps', None),
        'attack_lams': _float_list(getattr(args, 'lams', None)),
        'attack_lrs': _float_list(getattr(args, 'lrs', None)),
        'adversary_rounds': getattr(args, 'adversary_rounds', None),
        'finetune_scope': getattr(args, 'scope', None),
        'finetune_lr': getattr(args, 'lr', None),
        'prune_ratios': _float_list(getattr(args, 'ratios', None)),
        'prune_layer': getattr(args, 'layer', None),
        'counterfeits': getattr(args, 'counterfeits', None),
        'max_rounds': getattr(args, 'max_rounds', None),
    }
    epochs = getattr(args, 'epochs', None)
    if args.command == 'train':
        overrides['epochs'] = epochs
    elif getattr(args, 'kind', None) == 'overwrite':
        overrides['attack_epochs'] = epochs
    elif getattr(args, 'kind', None) == 'finetune':
        overrides['attack_epochs'] = epochs
    config = config.with_overrides(**overrides)
    config.validate()
    return config


def resolve_rho_star(config: ExperimentConfig):
    """設定中的安全目標對應的 ρ*"""
    result = security_threshold(config.watermark_len, config.log2_target())
    if not result.reachable:
        raise ConfigError(f"n={config.watermark_len} 無法達到安全目標 2^{float(config.log2_target())}")
    return result.rho_star


def load_owner(args: argparse.Namespace, config: ExperimentConfig,
               checkpoint: ModelCheckpoint) -> OwnerTuple:
    """讀取金鑰與浮水印；基準方案的檢查點回傳 VanillaTuple"""
    if not args.key or not args.watermark:
        raise ConfigError("需要 --key 與 --watermark")
    key = load_key(args.key, config.key_rows, config.watermark_len)
    watermark = load_watermark(args.watermark, config.watermark_len)
    if checkpoint.scheme == 'vanilla':
        return VanillaTuple(key, watermark)
    return WatermarkTuple(key, watermark, config.aux_bytes())


def print_report(report: DetectionReport) -> None:
    """輸出驗證摘要"""
    print("\n=== 驗證結果 ===")
    print(f"  偵測率 ρ：{format_rate(report.rho)} ({report.matches}/{report.n})")
    print(f"  安全邊界 ρ*：{format_fraction(report.rho_star)}")
    if report.hash_checked:
        print(f"  雜湊一致：{'是' if report.hash_consistent else '否'}")
    else:
        print("  雜湊一致：未檢查（基準方案）")
    print(f"  偽造機率上界：{format_log2(report.log2_bound)}")
    print(f"  判定：{'✅ 通過' if report.verdict else '❌ 未通過'}")


def cmd_train(args: argparse.Namespace) -> int:
    """訓練、儲存產物並自我驗證"""
    config = resolve_config(args)
    train_config = config.to_train_config()
    results = ResultManager(config.output_dir, config)
    results.save_config(getattr(args, 'config', None))
    dataset, test_set = config.train_dataset(), config.test_dataset()
    metadata = {'experiment_fingerprint': config.fingerprint()}

    print(f"=== 訓練 ({config.scheme}) ===")
    report: Optional[DetectionReport] = None
    rho_star = resolve_rho_star(config)
    if config.scheme == 'clean':
        run = train_clean(dataset, train_config, test_set, metadata)
    elif config.scheme == 'vanilla':
        owner = VanillaTuple.create(config.key_rows, config.watermark_len, derive_rng(config.seed, STREAM_KEY))
        run = vanilla_train(dataset, owner, train_config, test_set, metadata)
        report = vanilla_verify(run.checkpoint, owner, train_config, rho_star)
    else:
        owner = WatermarkTuple.create(config.key_rows, config.watermark_len,
                                      derive_rng(config.seed, STREAM_KEY), config.aux_bytes())
        run = train_watermarked(dataset, owner, train_config, test_set, metadata)
        report = verify(run.checkpoint, owner, train_config, rho_star)

    results.save_checkpoint(CHECKPOINT_FILE, run.checkpoint)
    results.save_table('curves.csv', run.curves)
    data: Dict[str, object] = {'scheme': config.scheme, **{k: float(v) for k, v in run.final.items()}}
    if report is not None:
        results.save_key(KEY_FILE, owner.key)
        results.save_watermark(WATERMARK_FILE, owner.watermark)
        data.update(report.to_dict())
        print_report(report)
    results.add_result('train', 'train_report', data)
    results.save_summary()

    final = run.final
    if final:
        print(f"\n  訓練準確率：{format_rate(final['train_acc'])}，測試準確率：{format_rate(final['test_acc'])}")
    print(f"📁 結果儲存在：{Path(config.output_dir).absolute()}")
    return EXIT_OK if report is None or report.verdict else EXIT_VERDICT_FALSE


def cmd_verify(args: argparse.Namespace) -> int:
    """純驗證；不寫入任何輸入檔案"""
    config = resolve_config(args)
    checkpoint = ModelCheckpoint.load(args.checkpoint)
    owner = load_owner(args, config, checkpoint)
    rho_star = resolve_rho_star(config)
    if isinstance(owner, VanillaTuple):
        report = vanilla_verify(checkpoint, owner, config.to_train_config(), rho_star)
    else:
        report = verify(checkpoint, owner, config.to_train_config(), rho_star)
    print_report(report)
    if args.out:
        results = ResultManager(args.out, config)
        results.add_result('verify', 'verify_report', report.to_dict())
    return EXIT_OK if report.verdict else EXIT_VERDICT_FALSE


def cmd_attack(args: argparse.Namespace) -> int:
    """執行指定的攻擊或掃描網格"""
    config = resolve_config(args)
    train_config = config.to_train_config()
    checkpoint = ModelCheckpoint.load(args.checkpoint)
    owner = load_owner(args, config, checkpoint)
    rho_star = resolve_rho_star(config)
    results = ResultManager(config.output_dir, config)
    results.save_config(getattr(args, 'config', None))
    dataset, test_set = config.train_dataset(), config.test_dataset()
    print(f"=== 攻擊：{args.kind} ===")

    if args.kind == 'forge':
        if args.mode == 'learn-key':
            report = learned_key_attack(checkpoint, owner, train_config, test_set, config.forge_steps,
                                        config.forge_lr, config.seed, rho_star)
        else:
            report = forge_attack(checkpoint, owner, train_config, test_set, config.forge_trials,
                                  config.seed, config.aux_bytes(), config.hash_consistent_adversary, rho_star)
        results.add_result('attack', 'forge_report', report.to_dict())
        print(f"  攻擊者最佳 ρ：{format_rate(report.adversary_rho)}，成功：{report.success}")

    elif args.kind == 'overwrite':
        adversary = adversary_tuple(train_config, config.seed, aux=config.aux_bytes(),
                                    hash_consistent=config.hash_consistent_adversary)
        sweep = overwrite_sweep(checkpoint, dataset, adversary, config.attack_lams, config.attack_lrs,
                                config.attack_epochs, config.seed, owner, train_config, test_set,
                                config.adversary_rounds or None, rho_star, config.accuracy_tolerance)
        results.save_table('overwrite_sweep.csv', sweep.table)
        for i, (report, attacked) in enumerate(zip(sweep.reports, sweep.checkpoints)):
            label = f"overwrite_{i:02d}"
            results.add_result('attack', label, report.to_dict())
            if attacked is not None:
                results.save_checkpoint(f"{label}.nmk", attacked)
            print(f"  λ_a={report.attack_params['lam_a']}, η_a={report.attack_params['lr_a']}: "
                  f"擁有者 ρ={format_rate(report.original_rho)}, 攻擊者 ρ={format_rate(report.adversary_rho or 0.0)}, "
                  f"成功：{report.success}")

    elif args.kind == 'finetune':
        ft_train, ft_test = dataset, test_set
        if config.finetune_relabel:
            relabel_seed = derive_seed(config.seed, STREAM_RELABEL)
            ft_train, ft_test = relabel(dataset, relabel_seed), relabel(test_set, relabel_seed)
        attacked, report = finetune(checkpoint, ft_train, config.finetune_scope, config.finetune_lr,
                                    config.attack_epochs, config.seed, owner, train_config, ft_test,
                                    rho_star, config.accuracy_tolerance)
        results.save_checkpoint('finetune.nmk', attacked)
        results.add_result('attack', 'finetune_report', report.to_dict())
        print(f"  擁有者 ρ：{format_rate(report.original_rho)}，準確率：{format_rate(report.accuracy_after)}")

    else:
        sweep = prune_sweep(checkpoint, config.prune_ratios, config.prune_layer, config.seed, owner,
                            train_config, test_set, rho_star, config.accuracy_tolerance)
        results.save_table('prune_sweep.csv', sweep.table)
        for report, attacked in zip(sweep.reports, sweep.checkpoints):
            label = f"prune_{report.attack_params['ratio']:.2f}"
            results.add_result('attack', label, report.to_dict())
            results.save_checkpoint(f"{label}.nmk", attacked)
            print(f"  比例 {report.attack_params['ratio']:.2f}：ρ={format_rate(report.original_rho)}，"
                  f"準確率 {format_rate(report.accuracy_after)}")

    results.save_summary()
    print(f"📁 結果儲存在：{Path(config.output_dir).absolute()}")
    return EXIT_OK


def cmd_boundary(args: argparse.Namespace) -> int:
    """輸出安全邊界或指定偵測率的偽造機率上界"""
    config = resolve_config(args)
    n = args.n if args.n is not None else config.watermark_len
    if args.rho is not None:
        boundary = forgery_bound(n, args.rho)
        print(f"n={n}, ρ={args.rho}（至少 {boundary.min_matches} 位相符）")
        print(f"上界：{format_fraction(boundary.bound)}")
        print(f"log2：{boundary.log2_bound:.4f}")
        print(json.dumps(boundary.to_dict(), ensure_ascii=False, indent=2))
        return EXIT_OK

    target = args.log2_target if args.log2_target is not None else config.log2_target()
    result = security_threshold(n, target)
    print(f"n={n}, 目標 2^{float(result.log2_target):g}")
    if not result.reachable:
        print("無法達成：即使全部位元相符，上界仍高於目標")
        return EXIT_VERDICT_FALSE
    print(f"ρ* = {format_fraction(result.rho_star)}")
    print(f"t = {result.boundary.min_matches} 時上界 {format_log2(result.boundary.log2_bound)}")
    if result.previous is not None:
        print(f"t = {result.previous.min_matches} 時上界 {format_log2(result.previous.log2_bound)}（超過目標）")
    print(json.dumps(result.to_dict(), ensure_ascii=False, indent=2))
    return EXIT_OK


def _labels(paths: List[str]) -> List[str]:
    labels: List[str] = []
    for path in paths:
        p = Path(path)
        label = f"{p.parent.name}/{p.stem}" if p.parent.name else p.stem
        while label in labels:
            label += "'"
        labels.append(label)
    return labels


def cmd_analyze(args: argparse.Namespace) -> int:
    """逐層直方圖、檢查點距離與重疊率曲線"""
    config = resolve_config(args)
    checkpoints = {label: ModelCheckpoint.load(path)
                   for label, path in zip(_labels(args.checkpoints), args.checkpoints)}
    owner_watermark = load_watermark(args.watermark, config.watermark_len) if args.watermark else None
    counterfeits = []
    if config.counterfeits and owner_watermark is None:
        logger.warning("未提供 --watermark，略過重疊率曲線")
    elif config.counterfeits:
        train_config = config.to_train_config()
        counterfeits = [adversary_tuple(train_config, config.seed, i, config.aux_bytes()).watermark
                        for i in range(config.counterfeits)]

    analyzer = ParameterAnalyzer(config.hist_bins)
    tables = analyzer.analyze(checkpoints, owner_watermark, counterfeits,
                              config.to_train_config().embed_layers(), config.max_rounds)
    results = ResultManager(config.output_dir, config)
    for name, table in tables.items():
        results.save_table(f"{name}.csv", table)

    data: Dict[str, Union[int, float, bool]] = {'checkpoints': len(checkpoints)}
    print("=== 參數分析 ===")
    if 'distances' in tables:
        distances = tables['distances']
        data['max_l1_distance'] = float(distances['l1_distance'].max())
        data['indistinguishable'] = bool(distances['indistinguishable'].all())
        print(f"  最大直方圖 L1 距離：{data['max_l1_distance']:.4f}（門檻 {distances['threshold'].iloc[0]}）")
    if 'overlap' in tables:
        for _, row in tables['overlap'].iterrows():
            print(f"  R={int(row['rounds'])}：平均重疊率 {row['mean_overlap']:.4f}")
    results.add_result('analyze', 'analyze_report', data)
    results.save_summary()
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'verify': cmd_verify,
    'attack': cmd_attack,
    'boundary': cmd_boundary,
    'analyze': cmd_analyze,
}


def main(argv: Optional[List[str]] = None) -> int:
    """命令列主函數，回傳結束碼"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    ErrorHandler.setup_logging(args.verbose)
    handler = ErrorHandler(args.verbose)
    operation = args.command if args.command != 'attack' else f"attack {args.kind}"
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("\n執行被用戶中斷", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        return handler.handle_exception(operation, e)


if __name__ == "__main__":
    sys.exit(main())
