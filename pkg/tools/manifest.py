"""Run manifests: every resolved parameter of a command plus the files it wrote."""

import json
import os
from dataclasses import asdict, dataclass, field

from config import get_logger

logger = get_logger(__name__)

MANIFEST_VERSION = 1


@dataclass
class RunManifest:
    """Serialized next to every output; replaying it reproduces the outputs."""

    command: str
    params: dict
    artifacts: dict[str, str] = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    registry_version: int | None = None
    version: int = MANIFEST_VERSION

    def to_json(self) -> str:
        # no timestamps: identical runs must serialize to identical bytes
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def save(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.artifacts["manifest"] = path
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        logger.debug(f"[MANIFEST] Saved {self.command} manifest to {path}")
        return path

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not a valid manifest ({e.msg} at line {e.lineno})") from None
        if not isinstance(data, dict) or "command" not in data or "params" not in data:
            raise ValueError(f"{path}: manifest needs 'command' and 'params'")
        if data.get("version", MANIFEST_VERSION) != MANIFEST_VERSION:
            raise ValueError(f"{path}: manifest version {data['version']} is not {MANIFEST_VERSION}")
        return cls(
            command=data["command"],
            params=data["params"],
            artifacts=data.get("artifacts", {}),
            results=data.get("results", {}),
            registry_version=data.get("registry_version"),
            version=data.get("version", MANIFEST_VERSION),
        )


def format_artifacts(manifest: RunManifest) -> str:
    """One ``name: path`` line per artifact, sorted by name."""
    return "\n".join(f"{name}: {path}" for name, path in sorted(manifest.artifacts.items()))
