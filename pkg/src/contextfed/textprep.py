"""Deterministic cleaning pipeline for keyboard-typed text.

Raw typing bursts go through a fixed sequence of rules: structural junk
(emails, hashtags, links, mentions) is removed, emoji become their CLDR
short-name words, digit-bearing tokens and punctuation are dropped,
letter runs are squashed, abbreviations are expanded, and an optional
dictionary-based autocorrect pass runs last. The result is always a list
of lowercase ASCII-alphabetic tokens, and the pipeline is idempotent when
autocorrect is off.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

_EMAIL_RE = re.compile(r"[\w.+-]+@[\w-]+\.[\w.-]+")
_LINK_RE = re.compile(r"\b\w+://\S+|\bwww\.\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
_DIGIT_RE = re.compile(r"\d")
_NON_ALPHA_RE = re.compile(r"[^a-z]+")

# U+FE0F selects emoji presentation and carries no meaning of its own.
_VARIATION_SELECTOR = "️"

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class PrepConfig:
    """Tables and switches for `clean_text`.

    abbreviation_table keys must be lowercase single tokens; emoji_table
    maps a codepoint sequence (without variation selectors) to the
    lowercase alphabetic words of its CLDR short name.
    """

    abbreviation_table: dict[str, tuple[str, ...]] = field(default_factory=dict)
    emoji_table: dict[str, tuple[str, ...]] = field(default_factory=dict)
    autocorrect_enabled: bool = False
    dictionary: frozenset[str] = frozenset()
    max_letter_run: int = 2


def load_table(path) -> dict[str, tuple[str, ...]]:
    """Read a `key<TAB>replacement words` table file (UTF-8, one per line)."""
    table: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected key<TAB>replacement")
            key, replacement = line.split("\t", 1)
            table[key] = tuple(replacement.split())
    return table


def _bundled_table(name: str) -> dict[str, tuple[str, ...]]:
    ref = resources.files("contextfed.data").joinpath(name)
    with resources.as_file(ref) as path:
        return load_table(path)


def default_config(autocorrect_enabled: bool = False,
                   dictionary: frozenset[str] = frozenset()) -> PrepConfig:
    """Config backed by the bundled abbreviation and emoji starter tables."""
    return PrepConfig(
        abbreviation_table=_bundled_table("abbreviations.tsv"),
        emoji_table=_bundled_table("emoji_cldr.tsv"),
        autocorrect_enabled=autocorrect_enabled,
        dictionary=dictionary,
    )


def replace_emoji(text: str, table: dict[str, tuple[str, ...]]) -> str:
    """Swap known emoji codepoint sequences for their short-name words.

    Longest sequence wins at each position; variation selectors are ignored.
    Unknown symbols pass through (the alphabetic filter drops them later).
    """
    if not table:
        return text.replace(_VARIATION_SELECTOR, "")
    text = text.replace(_VARIATION_SELECTOR, "")
    keys_by_length = sorted(table, key=len, reverse=True)
    max_len = len(keys_by_length[0])
    out: list[str] = []
    i = 0
    while i < len(text):
        match = None
        for length in range(min(max_len, len(text) - i), 0, -1):
            candidate = text[i : i + length]
            if candidate in table:
                match = candidate
                break
        if match is not None:
            out.append(" " + " ".join(table[match]) + " ")
            i += len(match)
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def expand_abbreviations(tokens: list[str], table: dict[str, tuple[str, ...]]) -> list[str]:
    """Replace table keys with their expansions, single pass, left to right."""
    out: list[str] = []
    for token in tokens:
        expansion = table.get(token)
        if expansion is not None:
            out.extend(expansion)
        else:
            out.append(token)
    return out


def reduce_letter_runs(token: str, max_run: int = 2) -> str:
    """Squash any run of more than max_run identical letters down to max_run."""
    pattern = re.compile(r"(.)\1{%d,}" % max_run)
    return pattern.sub(lambda m: m.group(1) * max_run, token)


def _edits1(word: str) -> set[str]:
    """All strings within one Damerau-Levenshtein edit of `word`."""
    splits = [(word[:i], word[i:]) for i in range(len(word) + 1)]
    deletes = {left + right[1:] for left, right in splits if right}
    transposes = {
        left + right[1] + right[0] + right[2:]
        for left, right in splits
        if len(right) > 1
    }
    replaces = {
        left + c + right[1:] for left, right in splits if right for c in _ALPHABET
    }
    inserts = {left + c + right for left, right in splits for c in _ALPHABET}
    return deletes | transposes | replaces | inserts


def autocorrect(tokens: list[str], dictionary: frozenset[str] | set[str]) -> list[str]:
    """Replace out-of-dictionary tokens by the lexicographically smallest
    dictionary word one Damerau-Levenshtein edit away; keep the token if
    none exists."""
    out: list[str] = []
    for token in tokens:
        if token in dictionary:
            out.append(token)
            continue
        candidates = _edits1(token) & set(dictionary)
        out.append(min(candidates) if candidates else token)
    return out


def clean_text(raw: str, cfg: PrepConfig) -> list[str]:
    """Run the full cleaning pipeline on one raw string.

    Order constraints the steps must respect: emoji are replaced before the
    alphabetic filter so their short-name words survive; lowercasing happens
    before run reduction so mixed-case runs collapse; run reduction happens
    before abbreviation lookup so both passes of a repeated cleaning agree
    (idempotence with autocorrect off).
    """
    text = _EMAIL_RE.sub(" ", raw)
    text = _LINK_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    text = replace_emoji(text, cfg.emoji_table)
    text = text.lower()

    tokens: list[str] = []
    for piece in text.split():
        if _DIGIT_RE.search(piece):
            continue
        stripped = _NON_ALPHA_RE.sub("", piece)
        if stripped:
            tokens.append(stripped)

    tokens = [reduce_letter_runs(t, cfg.max_letter_run) for t in tokens]
    tokens = expand_abbreviations(tokens, cfg.abbreviation_table)
    if cfg.autocorrect_enabled:
        tokens = autocorrect(tokens, cfg.dictionary)
    return tokens
