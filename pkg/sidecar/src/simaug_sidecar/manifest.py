"""Model manifest: which checkpoints to serve and with what defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class ManifestError(ValueError):
    """Raised when a manifest file or dict cannot be validated."""


SEED_POLICIES = ("per_request", "ignore")


@dataclass(frozen=True)
class GenerationDefaults:
    """Sampling settings applied to every /generate call.

    The wire protocol only carries max_new_tokens and seed, so everything
    else about decoding is pinned here and echoed through /health.
    """

    max_new_tokens: int = 16
    temperature: float = 0.9
    top_p: float = 0.95
    seed_policy: str = "per_request"

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ManifestError("max_new_tokens must be at least 1")
        if not self.temperature > 0.0:
            raise ManifestError("temperature must be positive")
        if not 0.0 < self.top_p <= 1.0:
            raise ManifestError("top_p must be in (0, 1]")
        if self.seed_policy not in SEED_POLICIES:
            raise ManifestError(
                f"seed_policy must be one of {SEED_POLICIES}, got {self.seed_policy!r}"
            )

    def to_dict(self) -> dict:
        return {
            "max_new_tokens": self.max_new_tokens,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "seed_policy": self.seed_policy,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GenerationDefaults":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ManifestError(f"unknown generation_defaults keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass(frozen=True)
class ModelManifest:
    generation_model_id: str
    embedding_model_id: str
    embedding_dim: int
    classifier_model_id: str | None = None
    generation_defaults: GenerationDefaults = field(default_factory=GenerationDefaults)

    def __post_init__(self) -> None:
        if not self.generation_model_id:
            raise ManifestError("generation_model_id must be non-empty")
        if not self.embedding_model_id:
            raise ManifestError("embedding_model_id must be non-empty")
        if self.embedding_dim < 1:
            raise ManifestError("embedding_dim must be a positive integer")
        if self.classifier_model_id is not None and not self.classifier_model_id:
            raise ManifestError("classifier_model_id must be non-empty when given")

    def model_ids(self) -> list[str]:
        """Exactly the ids a fully loaded service reports via /health."""
        ids = [self.generation_model_id, self.embedding_model_id]
        if self.classifier_model_id is not None:
            ids.append(self.classifier_model_id)
        return ids

    def to_dict(self) -> dict:
        return {
            "generation_model_id": self.generation_model_id,
            "embedding_model_id": self.embedding_model_id,
            "embedding_dim": self.embedding_dim,
            "classifier_model_id": self.classifier_model_id,
            "generation_defaults": self.generation_defaults.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelManifest":
        if not isinstance(raw, dict):
            raise ManifestError("manifest must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        values = dict(raw)
        if "generation_defaults" in values:
            defaults = values["generation_defaults"]
            if not isinstance(defaults, dict):
                raise ManifestError("generation_defaults must be an object")
            values["generation_defaults"] = GenerationDefaults.from_dict(defaults)
        try:
            return cls(**values)
        except TypeError as exc:
            raise ManifestError(f"invalid manifest: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ModelManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)
