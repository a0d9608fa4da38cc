"""Run manifests: enough provenance to reproduce or compare runs.

The fingerprint covers everything except the timestamp, so two runs over the
same inputs share a fingerprint while each manifest still records when it ran.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field

from . import __version__
from .config import AppConfig
from .kg import KgSnapshot


@dataclass(frozen=True)
class RunManifest:
    config: dict
    config_fingerprint: str
    kg_digest: str
    backends: dict
    command: str
    timestamp: str
    version: str = __version__
    extras: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        stable = {
            "config": self.config,
            "kg_digest": self.kg_digest,
            "backends": self.backends,
            "command": self.command,
            "version": self.version,
            "extras": self.extras,
        }
        canon = json.dumps(stable, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def to_jsonable(self) -> dict:
        return {
            "config": self.config,
            "config_fingerprint": self.config_fingerprint,
            "kg_digest": self.kg_digest,
            "backends": self.backends,
            "command": self.command,
            "timestamp": self.timestamp,
            "version": self.version,
            "extras": self.extras,
            "manifest_fingerprint": self.fingerprint(),
        }


def build_manifest(app_config: AppConfig, kg: KgSnapshot, command: str, **extras) -> RunManifest:
    return RunManifest(
        config=app_config.pipeline.snapshot(),
        config_fingerprint=app_config.pipeline.fingerprint(),
        kg_digest=kg.source_digest,
        backends=app_config.backend_description(),
        command=command,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        extras=dict(extras),
    )
