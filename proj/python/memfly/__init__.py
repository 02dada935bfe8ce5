"""Python bindings for the memfly memory engine."""

import json as _json
from os import PathLike
from typing import Any, Dict, Iterable, List, Optional, Union

from . import _core
from ._core import MemflyError, bleu1, js_divergence, leiden_partition, modularity, rrf_fuse, spearman, token_f1

__all__ = [
    "Memory",
    "MemflyError",
    "default_config",
    "run_benchmark",
    "leiden_partition",
    "modularity",
    "rrf_fuse",
    "token_f1",
    "bleu1",
    "js_divergence",
    "spearman",
]


def default_config() -> Dict[str, Any]:
    return _json.loads(_core.default_config())


class Memory:
    """One memory instance. `config` uses the same keys as the CLI config file."""

    def __init__(self, config: Optional[Dict[str, Any]] = None, snapshot: Union[str, PathLike, None] = None):
        self._m = _core.Memory(_json.dumps(config or {}), None if snapshot is None else str(snapshot))

    @classmethod
    def load(cls, path: Union[str, PathLike], config: Optional[Dict[str, Any]] = None) -> "Memory":
        return cls(config, snapshot=path)

    def ingest(self, text: str, speaker: str = "", turn_id: str = "", date: str = "") -> Dict[str, Any]:
        return _json.loads(self._m.ingest(text, speaker, turn_id, date))

    def query(self, question: str, iterative: bool = True, trace: bool = False) -> Dict[str, Any]:
        return _json.loads(self._m.query(question, iterative, trace))

    def stats(self) -> Dict[str, Any]:
        return _json.loads(self._m.stats())

    def evolve(self) -> int:
        return self._m.evolve()

    def save(self, path: Union[str, PathLike]) -> None:
        self._m.save(str(path))

    def notes(self) -> List[Dict[str, Any]]:
        return _json.loads(self._m.notes())

    def check_invariants(self) -> List[str]:
        return self._m.check_invariants()

    def serve(self) -> int:
        """Serves the HTTP API on a free local port and returns it."""
        return self._m.serve()

    def stop(self) -> None:
        self._m.stop()


def run_benchmark(
    dataset_dir: Union[str, PathLike], ablations: Iterable[str] = (), config: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    return _json.loads(_core.run_benchmark(str(dataset_dir), list(ablations), _json.dumps(config or {})))
