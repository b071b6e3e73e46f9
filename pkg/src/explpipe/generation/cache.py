"""Content-addressed on-disk cache for completions.

Files are keyed by a hash of (client namespace, prompt hash, decode
parameters, seed tag) and written atomically, so repeated pipeline runs with
a warm cache are byte-identical and make zero network calls. Safe for
concurrent readers and writers.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

from explpipe.generation.client import Completion, CompletionClient, CompletionRequest


class CompletionCache:
    def __init__(self, cache_dir: str | Path):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[Completion]:
        path = self._path(key)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as f:
            return Completion.from_record(json.load(f)["completion"])

    def put(self, key: str, request: CompletionRequest, completion: Completion) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        record = {
            "key": key,
            "seed_tag": request.seed_tag,
            "temperature": request.temperature,
            "completion": completion.to_record(),
        }
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(record, f, ensure_ascii=False)
        os.replace(tmp, path)

    def __len__(self) -> int:
        return sum(1 for _ in self.cache_dir.glob("*/*.json"))


class CachingClient:
    """Serves repeated (prompt, params, seed_tag) requests from disk."""

    def __init__(self, inner: CompletionClient, cache: CompletionCache):
        self.inner = inner
        self.cache = cache
        self.hits = 0
        self.misses = 0

    @property
    def cache_namespace(self) -> str:
        return self.inner.cache_namespace

    def complete(self, request: CompletionRequest) -> Completion:
        key = request.cache_key(self.inner.cache_namespace)
        cached = self.cache.get(key)
        if cached is not None:
            self.hits += 1
            return cached
        completion = self.inner.complete(request)
        self.cache.put(key, request, completion)
        self.misses += 1
        return completion
