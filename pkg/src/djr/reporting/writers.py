from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any, TextIO

from djr.utils.json_utils import sanitize_for_json

logger = logging.getLogger(__name__)


def dump_json(document: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(sanitize_for_json(document), indent=2, sort_keys=True) + "\n"


def write_json_report(document: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(document), encoding="utf-8")
    logger.info("JSON report written to %s", path)
    return path


def write_csv_rows(
    rows: Iterable[Mapping[str, Any]], target: Path | TextIO
) -> Path | TextIO:
    """Write ``rows`` with the column order of the first row."""
    rows = list(rows)
    if isinstance(target, Path):
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", newline="", encoding="utf-8") as handle:
            _write_rows(rows, handle)
        logger.info("Wrote %d CSV rows to %s", len(rows), target)
    else:
        _write_rows(rows, target)
    return target


def _write_rows(rows: list[Mapping[str, Any]], handle: TextIO) -> None:
    if not rows:
        return
    writer = csv.DictWriter(handle, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
