"""Character-level text helpers shared across the package.

All length and equality decisions in this package operate on Unicode
scalar values after NFC normalization, so that composed and decomposed
forms of the same character never count differently.
"""

from __future__ import annotations

import unicodedata


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def length_of(text: str) -> int:
    """Sentence length: number of Unicode scalar values after NFC.

    Punctuation and whitespace count; no grapheme clustering.
    """
    return len(nfc(text))
