"""Run manifests: enough metadata to reproduce an output directory."""

import hashlib
import json
import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from chsh_rates.log_config import get_logger
from chsh_rates.utils.io import write_json

logger = get_logger("manifest")

MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = ("numpy", "scipy", "pydantic", "click", "Jinja2", "python-dotenv")


def canonical_json(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def package_versions() -> dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def build_manifest(command: str, config: dict, seed: int, outputs: list[str]) -> dict:
    return {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "outputs": sorted(outputs),
        "versions": package_versions(),
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(out_dir: Path, command: str, config: dict, seed: int, outputs: list[str]) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    write_json(path, build_manifest(command, config, seed, outputs))
    logger.info(f"Wrote run manifest {path}")
    return path
