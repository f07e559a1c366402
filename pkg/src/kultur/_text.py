"""Shared text normalization used by matching, dedup and leakage scans."""

from __future__ import annotations

import re
import unicodedata

_WS_RUN = re.compile(r"\s+")


def normalize(s: str) -> str:
    """NFC-normalize, casefold, collapse whitespace runs, trim ends.

    Punctuation is deliberately left intact; many entity titles depend on it.
    """
    s = unicodedata.normalize("NFC", s)
    s = s.casefold()
    s = _WS_RUN.sub(" ", s)
    return s.strip()
