# app/services/report_service.py
"""
Provides a service for building and persisting reports.

Reports are plain dictionaries with a fixed envelope (command, config hash,
seed, workers, version, timestamp) around the per-check results. They are
written as JSON with sorted keys, or flattened to CSV through pandas.
"""
import csv
import hashlib
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .config_service import config
from .. import __version__
from ..exceptions import ReportError
from ..models.dto import ExperimentConfig, OutputFormat

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Converts numpy scalars/arrays, DTOs and non-finite floats into JSON-ready values."""
    if callable(getattr(value, 'to_dict', None)):
        return _plain(value.to_dict())
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_plain(data), sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def config_hash(experiment: Union[ExperimentConfig, Dict[str, Any]]) -> str:
    """SHA-256 of the canonical JSON of the experiment config."""
    data = experiment.to_dict() if isinstance(experiment, ExperimentConfig) else experiment
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()


class ReportService:
    def __init__(self, output_dir: Path):
        self.output_dir = output_dir

    def build(self, command: str, experiment: Union[ExperimentConfig, Dict[str, Any]], results: List[Any],
              workers: int, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Wraps results in the report envelope.

        `passed` is true iff every result passed; `inconclusive` is true if
        any result is flagged inconclusive.
        """
        plain_results = [_plain(r) for r in results]
        data = experiment.to_dict() if isinstance(experiment, ExperimentConfig) else dict(experiment)
        report = {
            'command': command,
            'config': _plain(data),
            'config_hash': config_hash(data),
            'seed': data.get('seed'),
            'workers': workers,
            'version': __version__,
            'generated_at': datetime.now(timezone.utc).isoformat(timespec='seconds'),
            'passed': all(r.get('passed', True) for r in plain_results if isinstance(r, dict)),
            'inconclusive': any(r.get('inconclusive', False) for r in plain_results if isinstance(r, dict)),
            'results': plain_results,
        }
        if extra:
            report.update(_plain(extra))
        return report

    def to_json(self, report: Dict[str, Any]) -> str:
        return json.dumps(_plain(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def to_frame(self, report: Dict[str, Any]) -> pd.DataFrame:
        """One row per result; nested values are kept as JSON text."""
        frame = pd.json_normalize(report.get('results', []), sep='.', max_level=1)
        for column in frame.columns:
            frame[column] = frame[column].map(
                lambda v: json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v)
        for key in ('command', 'config_hash', 'seed', 'version'):
            frame.insert(0, key, report.get(key))
        return frame[sorted(frame.columns)]

    def to_csv(self, report: Dict[str, Any]) -> str:
        return self.to_frame(report).to_csv(index=False, quoting=csv.QUOTE_MINIMAL, lineterminator='\r\n')

    def render(self, report: Dict[str, Any], fmt: OutputFormat = 'json') -> str:
        if fmt == 'csv':
            return self.to_csv(report)
        return self.to_json(report)

    def write(self, report: Dict[str, Any], name: str, fmt: OutputFormat = 'json',
              out_dir: Optional[Path] = None) -> Path:
        """
        Writes a report to `<out_dir>/<name>.<fmt>`.

        Raises:
            ReportError: If the file cannot be written.
        """
        return self.write_text(self.render(report, fmt), f"{name}.{fmt}", out_dir)

    def write_text(self, text: str, filename: str, out_dir: Optional[Path] = None) -> Path:
        target_dir = Path(out_dir) if out_dir is not None else self.output_dir
        path = target_dir / filename
        try:
            target_dir.mkdir(parents=True, exist_ok=True)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
        except OSError as e:
            logger.error(f"Failed to write report to {path}.", exc_info=True)
            raise ReportError(f"Could not write {path}.") from e
        logger.info(f"Wrote {path}")
        return path


# Singleton instance
report_service = ReportService(config.output_dir)
