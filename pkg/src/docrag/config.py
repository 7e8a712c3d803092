"""Versioned TOML configuration.

Values resolve as defaults < config file < command-line flags. Secrets are
never read from the file: each service names the environment variable that
holds its key (``key_env``).
"""

from __future__ import annotations

import os
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .chunking import ChunkingConfig
from .clean import DEFAULT_BULLETS, CleanConfig
from .enrich import CaptionRule
from .errors import ConfigError
from .partition import DEFAULT_DROP, ElementKind, PartitionRules

CONFIG_VERSION = 1

_STR_LIST = "list[str]"
_OPT_INT = "int?"

# accepted keys per section and their expected type
SCHEMA: dict[str, dict[str, Any]] = {
    "partition": {
        "heading_style_patterns": _STR_LIST, "size_ratio_threshold": float,
        "max_title_words": int, "max_title_chars_cjk": int, "drop_kinds": _STR_LIST,
    },
    "clean": {"bullet_chars": str, "collapse_fullwidth_space": bool},
    "captions": {"table_patterns": _STR_LIST, "figure_patterns": _STR_LIST, "search_window": int},
    "chunking": {
        "multipage_sections": bool, "combine_text_under_n_chars": int,
        "new_after_n_chars": _OPT_INT, "max_characters": int,
    },
    "vision": {
        "enabled": bool, "mock": bool, "endpoint": str, "model": str, "key_env": str,
        "timeout": float, "retries": int, "backoff": float, "max_in_flight": int,
    },
    "embedding": {
        "mock": bool, "mock_seed": int, "endpoint": str, "model": str, "key_env": str, "dimension": int,
        "batch_size": int, "timeout": float, "retries": int, "backoff": float, "max_in_flight": int,
    },
    "index": {"path": str, "namespace": str, "backend": str, "remote_host": str, "key_env": str},
    "retrieval": {"top_k": int, "context_budget": int, "dedupe": bool},
    "pipeline": {"workers": int, "out_dir": str},
}

# environment variables that override endpoint/model settings from the file
ENV_OVERRIDES = {
    ("vision", "endpoint"): "DOCRAG_VISION_ENDPOINT",
    ("vision", "model"): "DOCRAG_VISION_MODEL",
    ("embedding", "endpoint"): "DOCRAG_EMBEDDING_ENDPOINT",
    ("embedding", "model"): "DOCRAG_EMBEDDING_MODEL",
    ("index", "remote_host"): "DOCRAG_INDEX_HOST",
}


@dataclass(frozen=True)
class ServiceSettings:
    endpoint: str = ""
    model: str = ""
    key_env: str = ""
    timeout: float = 60.0
    retries: int = 2
    backoff: float = 0.5
    max_in_flight: int = 4

    def api_key(self) -> str | None:
        return os.environ.get(self.key_env) if self.key_env else None


@dataclass(frozen=True)
class VisionSettings(ServiceSettings):
    enabled: bool = True
    mock: bool = False
    model: str = "gpt-4-vision-preview"
    key_env: str = "DOCRAG_VISION_KEY"


@dataclass(frozen=True)
class EmbeddingSettings(ServiceSettings):
    mock: bool = False
    mock_seed: int = 0
    model: str = "text-embedding-ada-002"
    key_env: str = "DOCRAG_EMBEDDING_KEY"
    dimension: int = 1536
    batch_size: int = 64


@dataclass(frozen=True)
class IndexSettings:
    path: str = "index.vidx"
    namespace: str = ""
    backend: str = "local"
    remote_host: str = ""
    key_env: str = "DOCRAG_INDEX_KEY"


@dataclass(frozen=True)
class RetrievalSettings:
    top_k: int = 5
    context_budget: int = 8000
    dedupe: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    partition: PartitionRules = field(default_factory=PartitionRules)
    drop_kinds: frozenset[ElementKind] = DEFAULT_DROP
    clean: CleanConfig = field(default_factory=CleanConfig)
    captions: CaptionRule = field(default_factory=CaptionRule)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    vision: VisionSettings = field(default_factory=VisionSettings)
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    index: IndexSettings = field(default_factory=IndexSettings)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    workers: int = 0
    out_dir: str = "out"


def _check_type(section: str, key: str, value: Any, expected: Any) -> Any:
    where = f"{section}.{key}"
    if expected == _STR_LIST:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where} must be a list of strings")
        return tuple(value)
    if expected == _OPT_INT:
        expected = int
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, bool):
        raise ConfigError(f"{where} must be an integer")
    if not isinstance(value, expected):
        raise ConfigError(f"{where} must be of type {expected.__name__}, got {type(value).__name__}")
    return value


def merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Two-level merge: override sections replace keys in base sections."""
    out = {k: dict(v) if isinstance(v, Mapping) else v for k, v in base.items()}
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = dict(value) if isinstance(value, Mapping) else value
    return out


def build_config(raw: Mapping[str, Any], env: Mapping[str, str] | None = None) -> PipelineConfig:
    """Validate a raw mapping (parsed TOML merged with flag overrides)."""
    env = os.environ if env is None else env
    version = raw.get("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"config_version {version!r} is not supported (expected {CONFIG_VERSION})")
    unknown = set(raw) - set(SCHEMA) - {"config_version"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    sections: dict[str, dict[str, Any]] = {}
    for name, keys in SCHEMA.items():
        given = raw.get(name, {})
        if not isinstance(given, Mapping):
            raise ConfigError(f"[{name}] must be a table")
        bad = set(given) - set(keys)
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
        sections[name] = {k: _check_type(name, k, v, keys[k]) for k, v in given.items()}
    for (name, key), var in ENV_OVERRIDES.items():
        if env.get(var):
            sections[name][key] = env[var]

    try:
        part = dict(sections["partition"])
        drop = part.pop("drop_kinds", None)
        drop_kinds = DEFAULT_DROP if drop is None else frozenset(ElementKind(k) for k in drop)
        clean = dict(sections["clean"])
        if "bullet_chars" in clean:
            clean["bullet_chars"] = frozenset(clean["bullet_chars"])
        cfg = PipelineConfig(
            partition=PartitionRules(**part),
            drop_kinds=drop_kinds,
            clean=CleanConfig(**clean),
            captions=CaptionRule(**sections["captions"]),
            chunking=ChunkingConfig(**sections["chunking"]),
            vision=VisionSettings(**sections["vision"]),
            embedding=EmbeddingSettings(**sections["embedding"]),
            index=IndexSettings(**sections["index"]),
            retrieval=RetrievalSettings(**sections["retrieval"]),
            workers=sections["pipeline"].get("workers", 0),
            out_dir=sections["pipeline"].get("out_dir", "out"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    for name, svc in (("vision", cfg.vision), ("embedding", cfg.embedding)):
        if svc.timeout <= 0 or svc.retries < 0 or svc.backoff < 0 or svc.max_in_flight < 1:
            raise ConfigError(f"[{name}] needs timeout > 0, retries >= 0, backoff >= 0, max_in_flight >= 1")
    if cfg.embedding.dimension < 1 or cfg.embedding.batch_size < 1:
        raise ConfigError("[embedding] dimension and batch_size must be >= 1")
    if cfg.index.backend not in ("local", "remote"):
        raise ConfigError(f"index.backend must be 'local' or 'remote', got {cfg.index.backend!r}")
    if cfg.retrieval.top_k < 1 or cfg.retrieval.context_budget < 0:
        raise ConfigError("retrieval.top_k must be >= 1 and context_budget >= 0")
    if cfg.workers < 0:
        raise ConfigError("pipeline.workers must be >= 0 (0 means one per CPU)")
    for pattern in cfg.captions.table_patterns + cfg.captions.figure_patterns:
        try:
            re.compile(pattern)
        except re.error as exc:
            raise ConfigError(f"caption pattern {pattern!r} is not a valid regex: {exc}") from exc


def read_config_file(path: str | os.PathLike[str]) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc


def load_config(path: str | os.PathLike[str] | None = None, overrides: Mapping[str, Any] | None = None,
                env: Mapping[str, str] | None = None) -> PipelineConfig:
    raw = read_config_file(path) if path else {}
    if overrides:
        raw = merge(raw, overrides)
    return build_config(raw, env)


def default_config_text() -> str:
    """A commented TOML file equal to the built-in defaults."""
    bullets = "".join(sorted(DEFAULT_BULLETS))
    return f"""config_version = {CONFIG_VERSION}

[partition]
heading_style_patterns = ["heading", "title", "标题"]
size_ratio_threshold = 1.2
max_title_words = 20
max_title_chars_cjk = 40
drop_kinds = ["Header", "Footer"]

[clean]
bullet_chars = "{bullets}"
collapse_fullwidth_space = true

[captions]
table_patterns = ['Table\\s*\\d+', '表\\s*\\d+', 'Tab\\.\\s*\\d+']
figure_patterns = ['Fig\\.', 'Figure\\s*\\d+', '图\\s*\\d+']
search_window = 2

[chunking]
multipage_sections = true
combine_text_under_n_chars = 0
# new_after_n_chars defaults to max_characters
max_characters = 4096

[vision]
enabled = true
mock = false
endpoint = ""
model = "gpt-4-vision-preview"
key_env = "DOCRAG_VISION_KEY"
timeout = 60.0
retries = 2
backoff = 0.5
max_in_flight = 4

[embedding]
mock = false
mock_seed = 0
endpoint = ""
model = "text-embedding-ada-002"
key_env = "DOCRAG_EMBEDDING_KEY"
dimension = 1536
batch_size = 64
timeout = 60.0
retries = 2
backoff = 0.5
max_in_flight = 4

[index]
path = "index.vidx"
namespace = ""
backend = "local"
remote_host = ""
key_env = "DOCRAG_INDEX_KEY"

[retrieval]
top_k = 5
context_budget = 8000
dedupe = false

[pipeline]
# 0 means one worker per CPU
workers = 0
out_dir = "out"
"""
