"""Text-generation and embedding providers behind one interface.

Three kinds: `stub` (seeded and dependency-free, for tests and dry runs),
`replay` (pre-recorded responses keyed by record id), and `remote` (a JSON
HTTP service exposing /generate, /embed, and /health).  Run-level outages
raise `BackendUnavailableError`; per-record failures raise subclasses of
`GenerationFailedError` so the caller can audit and continue.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .similarity import EmbeddingVector
from .textproc import tokenize

BACKEND_KINDS = ("stub", "replay", "remote")
ENDPOINT_ENV_VAR = "SIMAUG_ENDPOINT"

STUB_EMBEDDING_DIM = 64

# Mixed into stub generations so outputs are not pure permutations of the
# prompt; keeps Jaccard and BLEU scores off the 0/1 extremes.
STUB_EXTRA_VOCAB = ("nova", "delta", "prime", "vertex", "orbit")


class BackendError(Exception):
    """Base for everything raised by a backend."""


class BackendUnavailableError(BackendError):
    """The backend cannot serve this run at all (bad endpoint, bad fixture)."""


class GenerationFailedError(BackendError):
    """One record's request failed; the run may continue without it."""


class FixtureMissError(GenerationFailedError):
    """The replay fixture has no entry for the requested record id."""


class TransportError(GenerationFailedError):
    """The remote call kept failing after all retries."""


class ProtocolError(GenerationFailedError):
    """The remote service answered with a malformed or inconsistent body."""


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "stub"
    endpoint: str | None = None
    fixture_path: str | None = None
    max_new_tokens: int = 16
    seed: int = 0
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}; expected one of {BACKEND_KINDS}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")
        if self.kind == "replay" and not self.fixture_path:
            raise ValueError("replay backend requires a fixture_path")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be positive, got {self.max_new_tokens}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.retries < 0:
            raise ValueError(f"retries must be non-negative, got {self.retries}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "fixture_path": self.fixture_path,
            "max_new_tokens": self.max_new_tokens,
            "seed": self.seed,
            "timeout": self.timeout,
            "retries": self.retries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BackendConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown backend options: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class GenerationResult:
    generated_text: str
    backend_kind: str
    latency: float


@dataclass(frozen=True)
class BackendStatus:
    ready: bool
    reason: str | None = None


def _hashed_embedding(text: str) -> EmbeddingVector:
    """L2-normalized bag-of-hashed-tokens vector; deterministic across runs."""
    counts = [0.0] * STUB_EMBEDDING_DIM
    for token in tokenize(text):
        digest = hashlib.md5(token.encode("utf-8")).digest()
        counts[int.from_bytes(digest[:8], "big") % STUB_EMBEDDING_DIM] += 1.0
    norm = sum(c * c for c in counts) ** 0.5
    if norm > 0.0:
        counts = [c / norm for c in counts]
    return EmbeddingVector.of(counts)


class Backend:
    """Common surface; subclasses fill in generation, embedding, and health."""

    kind = "abstract"

    def __init__(self, config: BackendConfig):
        self.config = config

    def generate_text(self, record_id: str, prompt: str) -> GenerationResult:
        raise NotImplementedError

    def embed_text(self, texts: list[str]) -> list[EmbeddingVector]:
        raise NotImplementedError

    def embed_pair(
        self, record_id: str, original_text: str, generated_text: str
    ) -> tuple[EmbeddingVector, EmbeddingVector]:
        """Embed the original and generated text of one record together.

        The record id lets replay-style backends look up stored vectors;
        the default just batches both texts through `embed_text`.
        """
        pair = self.embed_text([original_text, generated_text])
        return pair[0], pair[1]

    def health_check(self) -> BackendStatus:
        raise NotImplementedError


class StubBackend(Backend):
    """Seeded generator over the prompt's own vocabulary plus a fixed extra."""

    kind = "stub"

    def generate_text(self, record_id: str, prompt: str) -> GenerationResult:
        start = time.perf_counter()
        # Seeding with a string keys the stream to (seed, prompt) in a way
        # that is stable across platforms and processes.
        rng = random.Random(f"{self.config.seed}\x1f{prompt}")
        vocab = list(dict.fromkeys(tokenize(prompt))) + list(STUB_EXTRA_VOCAB)
        length = min(rng.randint(3, 8), self.config.max_new_tokens)
        text = " ".join(rng.choice(vocab) for _ in range(length))
        return GenerationResult(text, self.kind, time.perf_counter() - start)

    def embed_text(self, texts: list[str]) -> list[EmbeddingVector]:
        return [_hashed_embedding(text) for text in texts]

    def health_check(self) -> BackendStatus:
        return BackendStatus(ready=True)


class ReplayBackend(Backend):
    """Serves generations (and optionally embeddings) from a JSONL fixture.

    Each fixture line holds `id`, `generated`, and optional `orig_embedding`
    and `gen_embedding` arrays.  Ids missing from the fixture fail that
    record only; a missing or unparseable fixture fails the whole run.
    """

    kind = "replay"

    def __init__(self, config: BackendConfig):
        super().__init__(config)
        self._entries: dict[str, dict] | None = None

    def _load(self) -> dict[str, dict]:
        if self._entries is not None:
            return self._entries
        path = Path(self.config.fixture_path)
        if not path.exists():
            raise BackendUnavailableError(f"fixture not found: {path}")
        entries: dict[str, dict] = {}
        with path.open("r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise BackendUnavailableError(
                        f"fixture {path}, line {line_number}: invalid JSON: {exc}"
                    ) from exc
                if not isinstance(obj, dict) or "id" not in obj or "generated" not in obj:
                    raise BackendUnavailableError(
                        f"fixture {path}, line {line_number}: need 'id' and 'generated'"
                    )
                entries[str(obj["id"])] = obj
        self._entries = entries
        return entries

    def generate_text(self, record_id: str, prompt: str) -> GenerationResult:
        start = time.perf_counter()
        entry = self._load().get(record_id)
        if entry is None:
            raise FixtureMissError(f"no fixture entry for record id {record_id!r}")
        return GenerationResult(str(entry["generated"]), self.kind, time.perf_counter() - start)

    def embed_text(self, texts: list[str]) -> list[EmbeddingVector]:
        return [_hashed_embedding(text) for text in texts]

    def embed_pair(
        self, record_id: str, original_text: str, generated_text: str
    ) -> tuple[EmbeddingVector, EmbeddingVector]:
        entry = self._load().get(record_id, {})
        orig = entry.get("orig_embedding")
        gen = entry.get("gen_embedding")
        return (
            EmbeddingVector.of(orig) if orig is not None else _hashed_embedding(original_text),
            EmbeddingVector.of(gen) if gen is not None else _hashed_embedding(generated_text),
        )

    def health_check(self) -> BackendStatus:
        try:
            self._load()
        except BackendUnavailableError as exc:
            return BackendStatus(ready=False, reason=str(exc))
        return BackendStatus(ready=True)


class RemoteBackend(Backend):
    """JSON-over-HTTP client with retries on transport failures only.

    An HTTP error status or a malformed body is reported as-is; retrying
    would just repeat the same answer.
    """

    kind = "remote"

    def _url(self, route: str) -> str:
        return self.config.endpoint.rstrip("/") + route

    def _post(self, route: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.config.retries + 1):
            try:
                response = requests.post(
                    self._url(route), json=payload, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 400:
                raise ProtocolError(
                    f"{route} returned HTTP {response.status_code}: {response.text[:200]}"
                )
            try:
                body = response.json()
            except ValueError as exc:
                raise ProtocolError(f"{route} returned non-JSON body") from exc
            if not isinstance(body, dict):
                raise ProtocolError(f"{route} returned {type(body).__name__}, expected object")
            return body
        raise TransportError(f"{route} failed after {self.config.retries + 1} attempts: {last_error}")

    def generate_text(self, record_id: str, prompt: str) -> GenerationResult:
        start = time.perf_counter()
        body = self._post(
            "/generate",
            {
                "id": record_id,
                "text": prompt,
                "max_new_tokens": self.config.max_new_tokens,
                "seed": self.config.seed,
            },
        )
        generated = body.get("generated")
        if not isinstance(generated, str):
            raise ProtocolError("/generate response missing string field 'generated'")
        return GenerationResult(generated, self.kind, time.perf_counter() - start)

    def embed_text(self, texts: list[str]) -> list[EmbeddingVector]:
        body = self._post("/embed", {"texts": list(texts)})
        embeddings = body.get("embeddings")
        dim = body.get("dim")
        if not isinstance(embeddings, list) or not isinstance(dim, int):
            raise ProtocolError("/embed response missing 'embeddings' list or integer 'dim'")
        if len(embeddings) != len(texts):
            raise ProtocolError(
                f"/embed returned {len(embeddings)} vectors for {len(texts)} texts"
            )
        vectors = []
        for row in embeddings:
            if not isinstance(row, list) or len(row) != dim:
                raise ProtocolError(f"/embed vector length does not match dim={dim}")
            vectors.append(EmbeddingVector.of(row))
        return vectors

    def health_check(self) -> BackendStatus:
        try:
            response = requests.get(self._url("/health"), timeout=self.config.timeout)
        except requests.RequestException as exc:
            return BackendStatus(ready=False, reason=f"health check failed: {exc}")
        if response.status_code != 200:
            return BackendStatus(ready=False, reason=f"health returned HTTP {response.status_code}")
        try:
            body = response.json()
        except ValueError:
            return BackendStatus(ready=False, reason="health returned non-JSON body")
        if not isinstance(body, dict) or body.get("status") != "ok":
            return BackendStatus(ready=False, reason=f"health status not ok: {body!r}")
        return BackendStatus(ready=True)


def create_backend(config: BackendConfig) -> Backend:
    backend_classes = {"stub": StubBackend, "replay": ReplayBackend, "remote": RemoteBackend}
    return backend_classes[config.kind](config)
