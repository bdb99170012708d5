"""Shared harness utilities: the master-seed fan-out scheme, strict JSON
config validation, run manifests with artifact checksums, and deterministic
parallel mapping."""

from __future__ import annotations

import hashlib
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

CONFIG_FORMAT_VERSION = 1

# ---------------------------------------------------------------------------
# Seed fan-out
#
# Every command draws all randomness from one master seed. Substreams are
# SeedSequence entropy paths [master, stream_tag, *indices]; the tags below
# are the only ones in use, so any two consumers are statistically
# independent and replays are order-independent.
# ---------------------------------------------------------------------------

STREAM_INIT = 0
STREAM_SELECT = 1
STREAM_PERTURB = 2
STREAM_TRAJ = 3
STREAM_GEN = 4
STREAM_BENCH = 5
STREAM_BEST_OF = 6
STREAM_EVAL = 7
STREAM_STAGE = 8
STREAM_SPLIT = 9


def seed_sequence(master: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master)] + [int(p) for p in path])


def stream_rng(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master, *path))


def stream_seeds(master: int, *path: int, count: int) -> np.ndarray:
    return seed_sequence(master, *path).generate_state(count, dtype=np.uint64)


def stable_id_hash(text: str) -> int:
    """Deterministic 32-bit hash for keying streams by instance id."""
    return zlib.crc32(text.encode("utf-8"))


class ConfigError(Exception):
    """Raised for malformed or schema-violating configuration input."""


def load_json_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level value must be a JSON object")
    return doc


_TYPE_CHECKS = {
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "bool": lambda v: isinstance(v, bool),
    "list": lambda v: isinstance(v, list),
    "dict": lambda v: isinstance(v, dict),
}


def check_object(
    obj,
    where: str,
    required: dict[str, str],
    optional: dict[str, str] | None = None,
) -> None:
    """Validate a config object's keys and value types.

    Unknown keys are errors: configs are versioned and typos must not pass
    silently.
    """
    optional = optional or {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = set(required) | set(optional)
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing required keys {sorted(missing)}")
    for key, value in obj.items():
        spec = required.get(key, optional.get(key))
        if spec == "any":
            continue
        if not _TYPE_CHECKS[spec](value):
            raise ConfigError(f"{where}.{key}: expected {spec}, got {value!r}")


def require_format_version(doc: dict, where: str) -> None:
    version = doc.get("format_version")
    if version != CONFIG_FORMAT_VERSION:
        raise ConfigError(
            f"{where}: format_version must be {CONFIG_FORMAT_VERSION}, got {version!r}"
        )


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(
    out_dir,
    command: str,
    config_path,
    seed: int,
    artifacts: list,
) -> Path:
    """Record the command, resolved seed, and a checksum per primary artifact
    so a rerun can be verified byte for byte."""
    out_dir = Path(out_dir)
    doc = {
        "command": command,
        "config": str(config_path) if config_path is not None else None,
        "seed": int(seed),
        "out_dir": str(out_dir),
        "artifacts": {
            str(Path(p).relative_to(out_dir)): sha256_file(p) for p in sorted(map(str, artifacts))
        },
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return manifest_path


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map preserving input order regardless of completion order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
