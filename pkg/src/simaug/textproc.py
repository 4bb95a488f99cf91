"""Text cleanup, whitespace tokenization, and prompt/continuation joining.

The cleanup rules target Arabic social-media text ahead of embedding and
classification: diacritics and tatweel go, digits, percent signs and
punctuation go, emoji stay.  Every rule is individually switchable so the
contribution of each can be measured.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, fields

TATWEEL = "ـ"

# ASCII and Arabic percent signs; removed together with digits because they
# only ever trail a number in this corpus family.
PERCENT_SIGNS = frozenset({"%", "٪"})

# Symbol blocks treated as emoji.  Pictographs, transport, supplemental
# symbols, dingbats, misc symbols, and the variation selectors that ride
# along with them.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2B00, 0x2BFF),
    (0xFE0E, 0xFE0F),
    (0x1F1E6, 0x1F1FF),
)


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


@dataclass(frozen=True)
class PreprocessConfig:
    """Switches for each cleanup rule.  Defaults reproduce the full pipeline."""

    strip_diacritics: bool = True
    strip_tatweel: bool = True
    remove_digits_and_percent: bool = True
    remove_punctuation: bool = True
    keep_emoji: bool = True
    collapse_whitespace: bool = True

    def to_dict(self) -> dict[str, bool]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "PreprocessConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown preprocess options: {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in data.items()})


def preprocess(text: str, config: PreprocessConfig | None = None) -> str:
    """Apply the enabled cleanup rules to `text`.

    Characters are deleted, not replaced with spaces, and the final
    whitespace collapse squeezes whatever gaps remain.  The function is
    idempotent for any fixed config.
    """
    cfg = config if config is not None else PreprocessConfig()
    kept = []
    for ch in unicodedata.normalize("NFC", text):
        if cfg.strip_tatweel and ch == TATWEEL:
            continue
        if not cfg.keep_emoji and _is_emoji(ch):
            continue
        category = unicodedata.category(ch)
        if cfg.strip_diacritics and category == "Mn":
            continue
        if cfg.remove_digits_and_percent and (category == "Nd" or ch in PERCENT_SIGNS):
            continue
        if cfg.remove_punctuation and category.startswith("P"):
            continue
        kept.append(ch)
    cleaned = "".join(kept)
    if cfg.collapse_whitespace:
        cleaned = " ".join(cleaned.split())
    return cleaned


def tokenize(text: str) -> list[str]:
    """Split on Unicode whitespace after NFC normalization.

    No lowercasing and no punctuation handling here; callers that want
    cleaned tokens preprocess first.
    """
    return unicodedata.normalize("NFC", text).split()


def combine_text(original: str, generated: str) -> str:
    """Join original and generated text with a single space.

    An empty side passes the other through unchanged so the result never
    gains leading or trailing whitespace.
    """
    if not original:
        return generated
    if not generated:
        return original
    return original + " " + generated
