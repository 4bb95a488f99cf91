"""Model loading and inference sessions behind the HTTP routes."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import torch
from transformers import (
    AutoModel,
    AutoModelForCausalLM,
    AutoModelForSequenceClassification,
    AutoTokenizer,
)

from simaug_sidecar.manifest import ModelManifest


class SidecarError(RuntimeError):
    """A model could not be loaded or an inference call failed."""


def _load_tokenizer(model_id: str):
    try:
        return AutoTokenizer.from_pretrained(model_id)
    except Exception as exc:
        raise SidecarError(f"cannot load tokenizer for {model_id!r}: {exc}") from exc


class GeneratorSession:
    """One causal LM plus its tokenizer, serialized behind a lock.

    Requests are sampled; the request seed reseeds torch before each call
    (seed_policy per_request), so identical requests produce identical
    continuations on a fixed checkpoint.
    """

    def __init__(self, model_id: str):
        self.model_id = model_id
        self.tokenizer = _load_tokenizer(model_id)
        try:
            self.model = AutoModelForCausalLM.from_pretrained(model_id)
        except Exception as exc:
            raise SidecarError(f"cannot load generation model {model_id!r}: {exc}") from exc
        self.model.eval()
        self._lock = threading.Lock()

    def _pad_id(self) -> int:
        for candidate in (self.tokenizer.pad_token_id, self.tokenizer.eos_token_id):
            if candidate is not None:
                return candidate
        return 0

    def generate(
        self,
        text: str,
        max_new_tokens: int,
        seed: int,
        temperature: float,
        top_p: float,
        honor_seed: bool = True,
    ) -> str:
        with self._lock, torch.no_grad():
            if honor_seed:
                torch.manual_seed(seed)
            ids = self.tokenizer(text, return_tensors="pt").input_ids
            if ids.numel() == 0:
                ids = torch.tensor([[self._pad_id()]])
            limit = getattr(self.model.config, "n_positions", None)
            if limit is not None:
                # keep the tail of long prompts so prompt + continuation fits
                keep = max(1, limit - max_new_tokens)
                ids = ids[:, -keep:]
            try:
                output = self.model.generate(
                    ids,
                    attention_mask=torch.ones_like(ids),
                    do_sample=True,
                    max_new_tokens=max_new_tokens,
                    min_new_tokens=min(2, max_new_tokens),
                    temperature=temperature,
                    top_p=top_p,
                    pad_token_id=self._pad_id(),
                )
            except Exception as exc:
                raise SidecarError(f"generation failed: {exc}") from exc
            continuation = output[0][ids.shape[1] :]
            return self.tokenizer.decode(continuation, skip_special_tokens=True).strip()


class EmbedderSession:
    """Sentence embeddings: mean-pooled encoder states, one vector per text."""

    def __init__(self, model_id: str):
        self.model_id = model_id
        self.tokenizer = _load_tokenizer(model_id)
        try:
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise SidecarError(f"cannot load embedding model {model_id!r}: {exc}") from exc
        self.model.eval()
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts:
            return []
        with self._lock, torch.no_grad():
            batch = self.tokenizer(
                [text if text else self.tokenizer.unk_token or "" for text in texts],
                return_tensors="pt",
                padding=True,
                truncation=True,
            )
            try:
                states = self.model(**batch).last_hidden_state
            except Exception as exc:
                raise SidecarError(f"embedding failed: {exc}") from exc
            mask = batch["attention_mask"].unsqueeze(-1).to(states.dtype)
            summed = (states * mask).sum(dim=1)
            counts = mask.sum(dim=1).clamp(min=1.0)
            pooled = summed / counts
            return [[float(v) for v in row] for row in pooled]


class ClassifierSession:
    """Sequence classifier; label names come from the checkpoint config."""

    def __init__(self, model_id: str):
        self.model_id = model_id
        self.tokenizer = _load_tokenizer(model_id)
        try:
            self.model = AutoModelForSequenceClassification.from_pretrained(model_id)
        except Exception as exc:
            raise SidecarError(f"cannot load classifier model {model_id!r}: {exc}") from exc
        self.model.eval()
        self._lock = threading.Lock()
        id2label = self.model.config.id2label
        self.labels = [id2label[i] for i in sorted(id2label)]

    def classify(
        self, texts: list[str], labels: list[str] | None
    ) -> tuple[list[str], list[list[float]], list[str]]:
        order = list(labels) if labels else list(self.labels)
        unknown = [label for label in order if label not in self.labels]
        if unknown:
            raise ValueError(f"unknown labels: {unknown}")
        if not texts:
            return [], [], order
        columns = [self.labels.index(label) for label in order]
        with self._lock, torch.no_grad():
            batch = self.tokenizer(texts, return_tensors="pt", padding=True, truncation=True)
            try:
                logits = self.model(**batch).logits
            except Exception as exc:
                raise SidecarError(f"classification failed: {exc}") from exc
            probabilities = torch.softmax(logits[:, columns], dim=-1)
        scores = [[float(v) for v in row] for row in probabilities]
        predicted = [order[max(range(len(order)), key=row.__getitem__)] for row in scores]
        return predicted, scores, order


@dataclass
class SidecarRuntime:
    manifest: ModelManifest
    generator: GeneratorSession
    embedder: EmbedderSession
    classifier: ClassifierSession | None

    def model_ids(self) -> list[str]:
        return self.manifest.model_ids()


def load_runtime(manifest: ModelManifest) -> SidecarRuntime:
    """Load every model the manifest names, or fail before serving starts."""
    generator = GeneratorSession(manifest.generation_model_id)
    embedder = EmbedderSession(manifest.embedding_model_id)
    if embedder.dim != manifest.embedding_dim:
        raise SidecarError(
            f"embedding model produces dim {embedder.dim}, "
            f"manifest declares {manifest.embedding_dim}"
        )
    classifier = None
    if manifest.classifier_model_id is not None:
        classifier = ClassifierSession(manifest.classifier_model_id)
    return SidecarRuntime(
        manifest=manifest, generator=generator, embedder=embedder, classifier=classifier
    )
