"""Run manifest: what a run consumed and produced, with content hashes."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


@dataclass
class RunManifest:
    """Hashes of config, meshes and artifacts. Holds no timestamps."""

    package_version: str
    config_hash: str
    meshes: dict[str, str] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    reference: str | None = None

    def add_artifact(self, output_dir: Path, path: Path) -> None:
        """Record a written file by its path relative to the output directory."""
        self.artifacts[path.relative_to(output_dir).as_posix()] = file_hash(path)

    def to_dict(self) -> dict[str, object]:
        return {
            "manifest_version": MANIFEST_VERSION,
            "package_version": self.package_version,
            "config_hash": self.config_hash,
            "reference": self.reference,
            "meshes": dict(sorted(self.meshes.items())),
            "artifacts": dict(sorted(self.artifacts.items())),
        }


def file_hash(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(output_dir: Path, manifest: RunManifest) -> Path:
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return path


def read_manifest(output_dir: Path) -> RunManifest:
    """Parse manifest.json from an output directory.

    Raises ParseError for missing files, invalid JSON or an unknown version.
    """
    path = output_dir / MANIFEST_NAME
    if not path.exists():
        raise ParseError(f"Manifest not found: {path}")

    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid manifest JSON: {e}") from e

    if data.get("manifest_version") != MANIFEST_VERSION:
        raise ParseError(f"Unsupported manifest version: {data.get('manifest_version')}")

    try:
        return RunManifest(
            package_version=data["package_version"],
            config_hash=data["config_hash"],
            meshes=dict(data.get("meshes", {})),
            artifacts=dict(data.get("artifacts", {})),
            reference=data.get("reference"),
        )
    except KeyError as e:
        raise ParseError(f"Manifest is missing {e}") from e
