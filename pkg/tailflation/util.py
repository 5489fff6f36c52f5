from __future__ import annotations

import os
import shutil
import tempfile
from contextlib import contextmanager
from hashlib import sha256
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence, Union

import orjson
import pandas as pd

__all__ = ['atomic_directory', 'write_csv', 'write_json', 'canonical_json', 'digest']

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_APPEND_NEWLINE


@contextmanager
def atomic_directory(target: Union[str, os.PathLike]) -> Iterator[Path]:
    """
    Build a directory under a temporary name next to the target, and move it into place only if the block exits
    cleanly. On failure nothing is left behind. An existing target is replaced.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f'.{target.name}.', dir=target.parent))
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if target.exists():
        shutil.rmtree(target)
    os.replace(staging, target)


def write_csv(path: Union[str, os.PathLike], rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> None:
    """
    Write rows as a CSV table with a fixed column order. An empty row list produces a header only file.
    """
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, lineterminator='\n')


def canonical_json(value: Any) -> bytes:
    return orjson.dumps(value, option=JSON_OPTIONS)


def write_json(path: Union[str, os.PathLike], value: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(canonical_json(value))


def digest(value: Any) -> str:
    """
    The SHA-256 of the sorted-keys JSON encoding of a value
    """
    return sha256(orjson.dumps(value, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)).hexdigest()
