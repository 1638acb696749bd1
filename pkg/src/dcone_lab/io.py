"""Atomic file output and the run manifest."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    """CSV with floats in round-trip ``repr`` form, so reruns are byte-identical."""
    buf = io.StringIO()
    cols = columns or (list(rows[0]) if rows else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_cell(row[c]) for c in cols])
    return buf.getvalue()


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    return atomic_write_text(path, csv_text(rows, columns))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _clean(o):
    # NaN/inf are not JSON; keep them as strings so files stay parseable
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def json_text(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_json_default, allow_nan=True))), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json_text(obj))


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(config_dict: dict) -> str:
    return hashlib.sha256(json_text(config_dict).encode()).hexdigest()


def now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    seed: int
    started: str = field(default_factory=now_iso)
    finished: str | None = None
    status: str = "running"
    entries: list = field(default_factory=list)  # [{"h": ..., "status": ...}]
    files: dict = field(default_factory=dict)  # name -> {"sha256", "bytes"}

    @property
    def config_digest(self) -> str:
        return config_digest(self.config)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "config_digest": self.config_digest,
            "version": self.version,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "status": self.status,
            "entries": self.entries,
            "files": self.files,
        }

    def record_files(self, out_dir, names) -> None:
        out_dir = Path(out_dir)
        for name in sorted(set(names)):
            p = out_dir / name
            self.files[name] = {"sha256": sha256(p), "bytes": p.stat().st_size}

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / MANIFEST, self.to_dict())

    @classmethod
    def load(cls, out_dir) -> "RunManifest | None":
        p = Path(out_dir) / MANIFEST
        if not p.exists():
            return None
        d = json.loads(p.read_text())
        return cls(
            command=d["command"],
            config=d["config"],
            version=d["version"],
            seed=d["seed"],
            started=d["started"],
            finished=d.get("finished"),
            status=d.get("status", "unknown"),
            entries=d.get("entries", []),
            files=d.get("files", {}),
        )
