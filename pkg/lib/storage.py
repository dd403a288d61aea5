"""
Storage Module - Toolkit Module
Filesystem persistence for linearizations, solver outputs and experiment
reports (atomic JSON/CSV writes, `<base>-NNN` result ids).
"""

import asyncio
import csv
import io
import json
import logging
import os
import re
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """json.dumps default hook: numpy scalars/arrays and complex numbers."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item() if not np.iscomplexobj(value) else _jsonable(complex(value))
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def encode_json(payload: Any) -> bytes:
    # float repr is round-trip exact
    return json.dumps(payload, indent=2, default=_jsonable).encode("utf-8")


def format_csv_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def encode_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_csv_value(value) for value in row])
    return buffer.getvalue().encode("utf-8")


def _atomic_write(path: Path, payload: bytes, allow_overwrite: bool) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if allow_overwrite:
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as tmp_file:
                tmp_file.write(payload)
                tmp_file.flush()
                os.fsync(tmp_file.fileno())
            os.replace(tmp_name, path)
        finally:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
        return

    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
    with os.fdopen(fd, "wb") as handle:
        handle.write(payload)
        handle.flush()
        os.fsync(handle.fileno())


class ResultStorage:
    """Storage manager for toolkit outputs"""

    def __init__(self, results_root: str) -> None:
        self.results_root = Path(results_root)
        self._id_lock = asyncio.Lock()

    @staticmethod
    def _sanitize_base_name(raw: str) -> str:
        sanitized = re.sub(r"[^a-zA-Z0-9_-]", "", raw)
        sanitized = re.sub(r"-\d{3}$", "", sanitized)
        return sanitized or "result"

    def _next_result_id(self, base: str) -> str:
        numbers: List[int] = []
        if self.results_root.exists():
            pattern = re.compile(rf"^{re.escape(base)}-(\d{{3}})$")
            for entry in self.results_root.iterdir():
                if entry.suffix != ".json":
                    continue
                match = pattern.match(entry.stem)
                if match:
                    numbers.append(int(match.group(1)))
        next_number = max(numbers) + 1 if numbers else 1
        return f"{base}-{next_number:03d}"

    async def ensure_results_dir(self) -> None:
        loop = asyncio.get_running_loop()
        await loop.run_in_executor(None, lambda: self.results_root.mkdir(parents=True, exist_ok=True))

    async def generate_result_id(self, base: str) -> str:
        """
        Generate unique result ID with sequential numbering

        Args:
            base: Prefix, usually the command or experiment name

        Returns:
            Unique `<base>-NNN` identifier
        """
        await self.ensure_results_dir()
        loop = asyncio.get_running_loop()
        sanitized = self._sanitize_base_name(base)
        async with self._id_lock:
            return await loop.run_in_executor(None, self._next_result_id, sanitized)

    async def write_json(self, path: Path, payload: Any, allow_overwrite: bool = True) -> Path:
        encoded = encode_json(payload)
        loop = asyncio.get_running_loop()
        await loop.run_in_executor(None, _atomic_write, Path(path), encoded, allow_overwrite)
        return Path(path)

    async def write_csv(
        self,
        path: Path,
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
        allow_overwrite: bool = True,
    ) -> Path:
        encoded = encode_csv(header, rows)
        loop = asyncio.get_running_loop()
        await loop.run_in_executor(None, _atomic_write, Path(path), encoded, allow_overwrite)
        return Path(path)

    async def write_text(self, path: Path, text: str, allow_overwrite: bool = True) -> Path:
        loop = asyncio.get_running_loop()
        await loop.run_in_executor(None, _atomic_write, Path(path), text.encode("utf-8"), allow_overwrite)
        return Path(path)

    async def save_result(
        self,
        base: str,
        payload: Dict[str, Any],
        header: Optional[Sequence[str]] = None,
        rows: Optional[Iterable[Sequence[Any]]] = None,
    ) -> Dict[str, str]:
        """
        Save a result document (and optional CSV table) under a fresh id.

        Returns:
            Mapping with resultId, json path and, when rows were given, csv path
        """
        result_id = await self.generate_result_id(base)
        document = {
            "resultId": result_id,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            **payload,
        }
        json_path = self.results_root / f"{result_id}.json"
        await self.write_json(json_path, document, allow_overwrite=False)
        saved = {"resultId": result_id, "json": str(json_path)}
        if header is not None and rows is not None:
            csv_path = self.results_root / f"{result_id}.csv"
            await self.write_csv(csv_path, header, rows, allow_overwrite=False)
            saved["csv"] = str(csv_path)
        logger.info("Saved result %s", result_id)
        return saved
