"""Append-only JSONL cache of raw provider answers."""

import logging
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import orjson
import xxhash

logger = logging.getLogger(__name__)


def cache_key(model_id: str, prompt: str, top_k: int, params: Mapping[str, Any]) -> str:
    """Stable key for a (model, prompt, K, provider settings) query."""
    payload = orjson.dumps(
        {"model_id": model_id, "prompt": prompt, "top_k": top_k, "params": params},
        option=orjson.OPT_SORT_KEYS,
    )
    return xxhash.xxh3_128_hexdigest(payload)


class ProbeCache:
    """Keyed store of provider answers persisted one JSON object per line.

    Reads go to an in-memory index; appends are serialized and flushed so a
    crash loses at most the line being written.
    """

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else None
        self._records: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._needs_newline = False
        self.hits = 0
        self.misses = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, "rb") as f:
            content = f.read()
        self._needs_newline = bool(content) and not content.endswith(b"\n")
        lines = content.splitlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = orjson.loads(line)
                self._records[record["key"]] = record
            except (orjson.JSONDecodeError, KeyError, TypeError):
                logger.warning("Ignoring unreadable cache line %d in %s", number, self.path)
        logger.info("Loaded %d cached probes from %s", len(self._records), self.path)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: str) -> bool:
        return key in self._records

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        record = self._records.get(key)
        if record is None:
            self.misses += 1
        else:
            self.hits += 1
        return record

    def put(self, key: str, model_id: str, prompt_hash: str, logprobs: Mapping[str, float]) -> Dict[str, Any]:
        record = {
            "key": key,
            "model_id": model_id,
            "prompt_hash": prompt_hash,
            "logprobs": dict(logprobs),
            "returned_top_k": len(logprobs),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            self._records[key] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "ab") as f:
                    if self._needs_newline:
                        f.write(b"\n")
                        self._needs_newline = False
                    f.write(orjson.dumps(record) + b"\n")
                    f.flush()
        return record
