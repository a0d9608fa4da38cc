"""Pipeline configuration, dataset presets, and the flat config-file format.

Precedence, lowest to highest: built-in defaults, preset block, config file
keys, I2CR_* environment variables, explicit overrides (CLI flags).
"""

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .backends.base import CLUE_KINDS
from .errors import ConfigError

DEFAULT_INSTRUCTION = (
    "Select the entity the mention refers to. Use the mention, its surrounding "
    "text, and any visual clue lines, and answer with exactly one candidate "
    'name from the list. If no candidate fits, answer "nil". Reply with the '
    "name only."
)

# alpha tuned per dataset on its validation split; beta shared
PRESETS: dict[str, dict] = {
    "wikimel": {"alpha": 0.5, "beta": 31.0},
    "wikidiverse": {"alpha": 0.8, "beta": 31.0},
    "richmel": {"alpha": 0.75, "beta": 31.0},
}


@dataclass(frozen=True)
class PipelineConfig:
    """Every threshold, limit, and toggle the linking engine consumes."""

    k: int = 10
    alpha: float = 0.5
    beta: float = 31.0
    icr_retry_limit: int = 3
    temperature: float = 0.9
    clue_order: tuple[str, ...] = CLUE_KINDS
    enabled_clue_kinds: tuple[str, ...] = CLUE_KINDS
    enable_icr: bool = True
    enable_iav: bool = True
    enable_vif: bool = True
    all_clues_first_round: bool = False
    instruction_template: str = DEFAULT_INSTRUCTION
    max_description_chars: int = 512

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.icr_retry_limit < 1:
            raise ConfigError("icr_retry_limit must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError("temperature must be within [0, 2]")
        for kind in self.clue_order:
            if kind not in CLUE_KINDS:
                raise ConfigError(f"unknown clue kind {kind!r}")
        if len(set(self.clue_order)) != len(self.clue_order):
            raise ConfigError("clue_order must not repeat kinds")
        if sorted(self.clue_order) != sorted(self.enabled_clue_kinds):
            raise ConfigError("clue_order must be a permutation of enabled_clue_kinds")
        for value, name in ((self.alpha, "alpha"), (self.beta, "beta")):
            if value != value or value in (float("inf"), float("-inf")):
                raise ConfigError(f"{name} must be finite")

    @property
    def max_rounds(self) -> int:
        return 1 + len(self.enabled_clue_kinds)

    def without_modules(self, letters: str) -> "PipelineConfig":
        """Ablation toggles: b disables icr, c disables iav, d disables vif."""
        mapping = {"b": "enable_icr", "c": "enable_iav", "d": "enable_vif"}
        changes = {}
        for letter in letters:
            if letter not in mapping:
                raise ConfigError(f"unknown module letter {letter!r}; expected b, c, or d")
            changes[mapping[letter]] = False
        return replace(self, **changes)

    def without_clue_kinds(self, kinds) -> "PipelineConfig":
        drop = set(kinds)
        unknown = drop - set(CLUE_KINDS)
        if unknown:
            raise ConfigError(f"unknown clue kinds: {sorted(unknown)}")
        keep = tuple(k for k in self.clue_order if k not in drop)
        return replace(self, clue_order=keep, enabled_clue_kinds=keep)

    def with_clue_order(self, order) -> "PipelineConfig":
        order = tuple(order)
        return replace(self, clue_order=order, enabled_clue_kinds=order)

    def fingerprint(self) -> str:
        payload = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, value in payload.items():
            if isinstance(value, tuple):
                payload[key] = list(value)
        canon = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def snapshot(self) -> dict:
        payload = {f.name: getattr(self, f.name) for f in fields(self)}
        return {k: list(v) if isinstance(v, tuple) else v for k, v in payload.items()}


def apply_ablation(config: PipelineConfig, token: str) -> PipelineConfig:
    """One ablation delta: 'full', module letters ('bc'), or clue kinds ('ocr,cap')."""
    token = token.strip()
    if not token or token == "full":
        return config
    if "," in token or token in CLUE_KINDS:
        return config.without_clue_kinds(t.strip() for t in token.split(","))
    if set(token) <= set("bcd"):
        return config.without_modules(token)
    raise ConfigError(f"cannot interpret ablation token {token!r}")


def ablation_label(token: str) -> str:
    token = token.strip()
    return "full" if not token or token == "full" else f"w/o {token}"


@dataclass
class AppConfig:
    """Pipeline settings plus how to reach the model backends."""

    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    preset: str | None = None
    backend_url: str | None = None
    mock_transcript: str | None = None
    mock_lenient: bool = False
    request_timeout: float = 30.0
    max_attempts: int = 3

    def backend_description(self) -> dict:
        if self.mock_transcript:
            return {"mock_transcript": self.mock_transcript, "strict": not self.mock_lenient}
        return {"backend_url": self.backend_url}


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

_PIPELINE_KEYS = {f.name for f in fields(PipelineConfig)}
_APP_KEYS = {"preset", "backend_url", "mock_transcript", "mock_lenient", "request_timeout", "max_attempts"}


def _coerce(key: str, raw: str):
    if key in ("k", "icr_retry_limit", "max_description_chars", "max_attempts"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if key in ("alpha", "beta", "temperature", "request_timeout"):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if key.startswith("enable_") or key in ("all_clues_first_round", "mock_lenient"):
        try:
            return _BOOL_VALUES[raw.strip().casefold()]
        except KeyError:
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}") from None
    if key in ("clue_order", "enabled_clue_kinds"):
        return tuple(t.strip() for t in raw.split(",") if t.strip())
    if key == "instruction_template":
        return raw.replace("\\n", "\n")
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; later keys win."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _PIPELINE_KEYS and key not in _APP_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def _env_values(env: Mapping[str, str]) -> dict:
    values = {}
    for key in sorted(_PIPELINE_KEYS | _APP_KEYS):
        raw = env.get(f"I2CR_{key.upper()}")
        if raw is not None:
            values[key] = _coerce(key, raw)
    return values


def load_app_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: dict | None = None,
) -> AppConfig:
    """Merge defaults, preset, file, environment, and explicit overrides."""
    layers: list[dict] = []
    if path is not None:
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"config file not found: {file_path}")
        layers.append(parse_config_text(file_path.read_text(encoding="utf-8"), source=str(file_path)))
    layers.append(_env_values(env if env is not None else os.environ))
    layers.append({k: v for k, v in (overrides or {}).items() if v is not None})

    merged: dict = {}
    for layer in layers:
        merged.update(layer)

    preset = merged.pop("preset", None)
    pipeline_values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        pipeline_values.update(PRESETS[preset])
    app_values: dict = {}
    for key, value in merged.items():
        if key in _PIPELINE_KEYS:
            pipeline_values[key] = value
        else:
            app_values[key] = value

    return AppConfig(pipeline=PipelineConfig(**pipeline_values), preset=preset, **app_values)
