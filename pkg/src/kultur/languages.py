"""Language codes covered by the curation pipeline.

Prompt templates take the English language name, not the code, so the map
below backs the {language_name} substitution. Configurations may target any
subset and may extend the map for codes not listed here.
"""

from __future__ import annotations

LANGUAGE_NAMES: dict[str, str] = {
    "en": "English",
    "fr": "French",
    "de": "German",
    "nl": "Dutch",
    "es": "Spanish",
    "it": "Italian",
    "ga": "Irish",
    "pl": "Polish",
    "ru": "Russian",
    "pt": "Portuguese",
    "cs": "Czech",
    "ja": "Japanese",
    "zh": "Chinese",
    "tr": "Turkish",
    "uk": "Ukrainian",
    "ro": "Romanian",
    "fa": "Persian",
    "id": "Indonesian",
    "ar": "Arabic",
    "vi": "Vietnamese",
    "ko": "Korean",
    "he": "Hebrew",
    "ms": "Malay",
    "el": "Greek",
    "bg": "Bulgarian",
    "bn": "Bengali",
    "ur": "Urdu",
    "hi": "Hindi",
    "sw": "Swahili",
    "ta": "Tamil",
    "th": "Thai",
    "te": "Telugu",
    "jv": "Javanese",
    "su": "Sundanese",
    "ig": "Igbo",
    "si": "Sinhala",
    "mn": "Mongolian",
    "am": "Amharic",
    "no": "Norwegian",
}


def language_name(code: str, overrides: dict[str, str] | None = None) -> str:
    """English name for a language code; falls back to the code itself for
    anything unknown so prompts still render."""
    if overrides and code in overrides:
        return overrides[code]
    return LANGUAGE_NAMES.get(code, code)
