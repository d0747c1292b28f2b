"""Artifact writers: CSV tables, JSON documents, SVG plots."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from stmeta.core.errors import ConfigError
from stmeta.models.result import ScenarioResult
from stmeta.services import plotting

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG = "effective_config.json"


def format_cell(value: Any) -> str:
    """`%.17g` for floats, plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """RFC-4180 CSV with a header row and CRLF line endings."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json(path: Union[str, Path], document: Any) -> Path:
    path = Path(path)
    text = json.dumps(document, indent=2, sort_keys=True, default=_plain, allow_nan=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_effective_config(out_dir: Union[str, Path], config: Dict[str, Any]) -> Path:
    """Echo the configuration after overrides; it loads back with `--config`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return write_json(out / EFFECTIVE_CONFIG, config)


def write_result(
    result: ScenarioResult, out_dir: Union[str, Path], formats: Sequence[str]
) -> List[Path]:
    """
    Write every artifact of `result` whose format was requested.

    Args:
        result: Scenario output
        out_dir: Target directory, created when missing
        formats: Any of "csv", "json", "svg"

    Returns:
        Paths written, in a stable order

    Raises:
        ConfigError: The directory cannot be created or written
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {out}: {e}")

    written: List[Path] = []
    try:
        if "csv" in formats:
            for name in sorted(result.tables):
                table = result.tables[name]
                written.append(write_csv(out / f"{name}.csv", table.header, table.rows))
        if "json" in formats:
            for name in sorted(result.documents):
                written.append(write_json(out / f"{name}.json", result.documents[name]))
        if "svg" in formats:
            for name in sorted(result.plots):
                path = out / f"{name}.svg"
                path.write_text(plotting.render_svg(result.plots[name]), encoding="utf-8")
                written.append(path)
    except OSError as e:
        raise ConfigError(f"Cannot write artifacts to {out}: {e}")

    logger.info(f"Wrote {len(written)} artifact(s) to {out}")
    return written
