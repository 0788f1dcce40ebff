"""Line-delimited record IO: atomic writes, run headers, stable JSON.

Every file the CLI writes starts with a header record carrying the
config hash and seed, so a prediction or corpus file is traceable to
the run that produced it.  Readers skip the header transparently.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .errors import DataError

HEADER_KEY = "_header"


def dumps(record: Mapping[str, Any]) -> str:
    # sorted keys + fixed separators keep reruns byte-identical
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def make_header(kind: str, *, config_hash: str = "unset", seed: int = 0, **extra: Any) -> dict:
    info: dict[str, Any] = {"kind": kind, "config_hash": config_hash, "seed": seed}
    info.update(extra)
    return {HEADER_KEY: info}


def config_hash(values: Mapping[str, Any]) -> str:
    blob = "\n".join(f"{k}={values[k]}" for k in sorted(values))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


@contextmanager
def atomic_write(path: str | Path) -> Iterator[Any]:
    """Open a temp file next to ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    fh = os.fdopen(fd, "w", encoding="utf-8", newline="\n")
    try:
        yield fh
        fh.close()
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        fh.close()
        os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, records: Iterable[Mapping[str, Any]],
                header: Mapping[str, Any] | None = None) -> None:
    with atomic_write(path) as fh:
        if header is not None:
            fh.write(dumps(header) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path: str | Path) -> tuple[dict | None, list[dict]]:
    """Read a record file; returns (header-or-None, records)."""
    header: dict | None = None
    records: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: not valid JSON ({exc})") from exc
            if lineno == 1 and isinstance(rec, dict) and HEADER_KEY in rec:
                header = rec[HEADER_KEY]
                continue
            if not isinstance(rec, dict):
                raise DataError(f"{path}: line {lineno}: expected an object record")
            records.append(rec)
    return header, records
