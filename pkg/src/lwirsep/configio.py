"""Structured-text (``key = value``) config parsing and run manifests."""

from __future__ import annotations

import hashlib
import time
from pathlib import Path

from .errors import ConfigError

__all__ = ["parse_kv", "read_config", "file_sha256", "write_run_manifest"]


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_kv(text)


def take(values: dict, key: str, convert, default=None, required=False):
    """Pop ``key`` from ``values`` applying ``convert``; typed errors."""
    if key not in values:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    raw = values.pop(key)
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc


def reject_unknown(values: dict, context: str) -> None:
    if values:
        key = sorted(values)[0]
        raise ConfigError(f"unknown {context} config key: {key!r}")


def parse_bool(raw: str) -> bool:
    low = str(raw).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(out_dir, command: str, *, seed, config_hash: str = "",
                       dataset_hashes: dict | None = None, started: float | None = None,
                       extra: dict | None = None) -> Path:
    """One auditable manifest per output directory."""
    from . import __version__

    lines = [
        f"command = {command}",
        f"code_version = {__version__}",
        f"seed = {seed}",
        f"config_hash = {config_hash}",
        f"started_unix = {started if started is not None else time.time()}",
        f"finished_unix = {time.time()}",
    ]
    for name, digest in (dataset_hashes or {}).items():
        lines.append(f"dataset_hash.{name} = {digest}")
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    path = Path(out_dir) / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path
