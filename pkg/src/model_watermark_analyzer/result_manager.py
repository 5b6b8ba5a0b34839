#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Result Manager - 實驗輸出管理

集中處理輸出目錄中的檢查點、金鑰、浮水印、JSON 報告、CSV 表格與 Markdown 摘要
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

try:
    from .checkpoint import ModelCheckpoint
    from .config import ExperimentConfig, dump_config
    from .hashmark import SecretKey, Watermark, save_key, save_watermark
    from .utils import ensure_dir, write_json
except ImportError:
    from checkpoint import ModelCheckpoint
    from config import ExperimentConfig, dump_config
    from hashmark import SecretKey, Watermark, save_key, save_watermark
    from utils import ensure_dir, write_json


logger = logging.getLogger(__name__)

CONFIG_FILE = 'config.txt'
RESOLVED_CONFIG_FILE = 'config.resolved.txt'


@dataclass
class RunResult:
    """一筆報告"""
    command: str                      # train / verify / attack / boundary / analyze
    label: str                        # 報告名稱（也是檔名）
    data: Dict[str, Any]
    files: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def get_summary_text(self) -> str:
        """取得摘要文字"""
        verdict = self.data.get('verdict', self.data.get('success'))
        suffix = '' if verdict is None else f" ({'通過' if verdict else '未通過'})"
        return f"{self.command}: {self.label}{suffix}"


class ResultManager:
    """輸出目錄管理器"""

    def __init__(self, output_dir: Union[str, Path], config: ExperimentConfig):
        """
        初始化輸出管理器

        Args:
            output_dir: 輸出目錄（不存在時建立）
            config: 本次執行的設定，會回寫到每份報告
        """
        self.output_dir = ensure_dir(output_dir)
        self.config = config
        self.results: List[RunResult] = []
        self.saved_files: List[Path] = []

    def _record(self, path: Path) -> Path:
        self.saved_files.append(path)
        logger.debug(f"saved: {path}")
        return path

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def save_config(self, source: Optional[Union[str, Path]] = None) -> Path:
        """
        回寫設定（config.txt）

        Args:
            source: 讀入的設定檔；若它正是輸出目錄中的 config.txt，改寫入 config.resolved.txt
        """
        path = self.path(CONFIG_FILE)
        if source is not None and Path(source).resolve() == path.resolve():
            path = self.path(RESOLVED_CONFIG_FILE)
            logger.warning(f"輸入設定檔即為 {CONFIG_FILE}，不覆寫，改寫入 {RESOLVED_CONFIG_FILE}")
        path.write_text(dump_config(self.config), encoding='utf-8')
        return self._record(path)

    def save_checkpoint(self, name: str, checkpoint: ModelCheckpoint) -> Path:
        return self._record(checkpoint.save(self.path(name)))

    def save_key(self, name: str, key: SecretKey) -> Path:
        return self._record(save_key(self.path(name), key))

    def save_watermark(self, name: str, watermark: Watermark) -> Path:
        return self._record(save_watermark(self.path(name), watermark))

    def save_table(self, name: str, table: pd.DataFrame) -> Path:
        """寫出 CSV（不含索引）"""
        path = self.path(name)
        table.to_csv(path, index=False)
        return self._record(path)

    def add_result(self, command: str, label: str, data: Dict[str, Any]) -> RunResult:
        """
        加入一份報告並寫出 JSON

        報告中附上設定指紋與完整設定，重新載入即可重現本次執行
        """
        payload = dict(data)
        payload['config_fingerprint'] = self.config.fingerprint()
        payload['config'] = dump_config(self.config)
        path = self._record(write_json(self.path(f"{label}.json"), payload))
        result = RunResult(command, label, payload, [path.name])
        self.results.append(result)
        return result

    def get_results_summary(self) -> Dict[str, Any]:
        return {
            'count': len(self.results),
            'commands': sorted({r.command for r in self.results}),
            'files': [p.name for p in self.saved_files],
        }

    def generate_markdown_report(self) -> str:
        """
        生成 Markdown 格式的摘要

        Returns:
            Markdown 字串
        """
        summary = self.get_results_summary()
        report = f"""# 浮水印實驗摘要

**方案**: {self.config.scheme}
**設定指紋**: {self.config.fingerprint()}
**種子**: {self.config.seed}
**報告數量**: {summary['count']}

"""
        if not self.results:
            return report + "沒有報告。\n"

        for i, result in enumerate(self.results, 1):
            report += f"## {i}. {result.get_summary_text()}\n\n"
            for key, value in result.data.items():
                if key in ('config', 'attack_params') or isinstance(value, (dict, list)):
                    continue
                report += f"- **{key}**: {_format_cell(value)}\n"
            report += "\n"

        report += "## 輸出檔案\n\n"
        for name in summary['files']:
            report += f"- `{name}`\n"
        return report

    def save_summary(self) -> Path:
        path = self.path('summary.md')
        path.write_text(self.generate_markdown_report(), encoding='utf-8')
        logger.info(f"summary written: {path}")
        return path


def _format_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
