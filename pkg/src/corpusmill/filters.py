"""Document- and paragraph-level heuristic filters plus a profile-based language identifier.

All threshold comparisons are strict: a document or paragraph is dropped
only when a statistic *exceeds* its bound, so values sitting exactly on
a bound are kept.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .records import ACCEPT, DataError, Document, Verdict, reject


class ProfileError(DataError):
    pass


class ClassifyError(DataError):
    pass


@dataclass(frozen=True)
class FilterPolicy:
    min_chars: int = 200
    banned_phrases: tuple[str, ...] = ("lorem ipsum", "javascript")
    banned_chars: frozenset[str] = frozenset({"{", "}"})
    max_upper_frac: float = 0.40
    max_symbol_word_ratio: float = 0.10
    max_nonalpha_word_frac: float = 0.20
    symbol_set: tuple[str, ...] = ("#", "…", "...")

    def validate(self) -> list[str]:
        violations = []
        if self.min_chars < 1:
            violations.append("filter.min_chars")
        for name in ("max_upper_frac", "max_symbol_word_ratio", "max_nonalpha_word_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                violations.append(f"filter.{name}")
        return violations


@dataclass(frozen=True)
class ParagraphStats:
    upper_frac: float
    symbol_word_ratio: float
    nonalpha_word_frac: float
    n_words: int


def doc_filter(doc: Document, policy: FilterPolicy) -> Verdict:
    """Document-level gate; rejection reasons in fixed order: min_length, banned_phrase, banned_char."""
    if len(doc.text) < policy.min_chars:
        return reject("min_length")
    lowered = doc.text.lower()
    for phrase in policy.banned_phrases:
        if phrase.lower() in lowered:
            return reject("banned_phrase")
    for ch in doc.text:
        if ch in policy.banned_chars:
            return reject("banned_char")
    return ACCEPT


def _count_symbols(text: str, symbols: tuple[str, ...]) -> int:
    # longest-match scan so "..." counts once rather than as three "." hits
    ordered = sorted(symbols, key=len, reverse=True)
    count = 0
    i = 0
    n = len(text)
    while i < n:
        for sym in ordered:
            if text.startswith(sym, i):
                count += 1
                i += len(sym)
                break
        else:
            i += 1
    return count


def paragraph_stats(paragraph: str, policy: FilterPolicy) -> ParagraphStats:
    """Per-paragraph ratios; the upper fraction is over alphabetic characters only."""
    letters = [ch for ch in paragraph if ch.isalpha()]
    upper = sum(1 for ch in letters if ch.isupper())
    upper_frac = upper / len(letters) if letters else 0.0

    words = paragraph.split()
    n_words = len(words)
    if n_words == 0:
        return ParagraphStats(upper_frac, 0.0, 0.0, 0)

    symbol_word_ratio = _count_symbols(paragraph, policy.symbol_set) / n_words
    nonalpha = sum(1 for w in words if not any(ch.isalpha() for ch in w))
    return ParagraphStats(upper_frac, symbol_word_ratio, nonalpha / n_words, n_words)


def clean_paragraphs(
    doc: Document, policy: FilterPolicy
) -> tuple[Document, list[tuple[int, str]]]:
    """Drop paragraphs whose stats strictly exceed the policy bounds.

    Paragraphs are newline-delimited; empty segments (from consecutive
    newlines) are dropped silently and do not appear in the removed list.
    Returns the cleaned document and [(paragraph_index, reason), ...].
    """
    paragraphs = doc.text.split("\n")
    kept: list[str] = []
    removed: list[tuple[int, str]] = []
    for index, paragraph in enumerate(paragraphs):
        if not paragraph.strip():
            continue
        stats = paragraph_stats(paragraph, policy)
        if stats.upper_frac > policy.max_upper_frac:
            removed.append((index, "upper_frac"))
        elif stats.symbol_word_ratio > policy.max_symbol_word_ratio:
            removed.append((index, "symbol_word_ratio"))
        elif stats.nonalpha_word_frac > policy.max_nonalpha_word_frac:
            removed.append((index, "nonalpha_word_frac"))
        else:
            kept.append(paragraph)
    return doc.with_fields(text="\n".join(kept)), removed


@dataclass(frozen=True)
class LanguageProfile:
    """Character n-gram ranking for one language (most frequent first)."""

    lang: str
    ranked_ngrams: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.ranked_ngrams[0]) if self.ranked_ngrams else 0


def _text_ngrams(text: str, n: int) -> Counter:
    """Per-word character n-grams; words are space-padded for n >= 2.

    Padding keeps n-grams from crossing word boundaries, which makes the
    ranking invariant under duplicating the input text.
    """
    counts: Counter = Counter()
    for word in text.split():
        padded = word if n == 1 else f" {word} "
        for i in range(len(padded) - n + 1):
            counts[padded[i : i + n]] += 1
    return counts


def _ranked(counts: Counter, size: int) -> tuple[str, ...]:
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(gram for gram, _ in ordered[:size])


def build_profiles(
    corpus: list[tuple[str, str]], n: int, profile_size: int
) -> list[LanguageProfile]:
    """Build one ranked n-gram profile per language from (lang, text) samples."""
    if not 1 <= n <= 5:
        raise ProfileError(f"n-gram order {n} outside [1,5]")
    per_lang: dict[str, Counter] = {}
    for lang, text in corpus:
        per_lang.setdefault(lang, Counter()).update(_text_ngrams(text, n))
    profiles = []
    for lang in sorted(per_lang):
        counts = per_lang[lang]
        if not counts:
            raise ProfileError(f"no n-grams for language {lang!r}")
        profiles.append(LanguageProfile(lang, _ranked(counts, profile_size)))
    return profiles


def classify_language(
    text: str, profiles: list[LanguageProfile]
) -> tuple[str, int]:
    """Rank-order (out-of-place) classification against language profiles.

    Distance is the sum over the text's ranked n-grams of the rank
    difference against a profile, with a miss penalized by the maximum
    profile length. Ties break toward the smaller language code.
    """
    if not profiles:
        raise ClassifyError("no profiles given")
    if not text.strip():
        raise ClassifyError("empty text")
    n = profiles[0].n
    max_len = max(len(p.ranked_ngrams) for p in profiles)
    text_ranking = _ranked(_text_ngrams(text, n), max_len)

    best: tuple[int, str] | None = None
    for profile in profiles:
        ranks = {gram: rank for rank, gram in enumerate(profile.ranked_ngrams)}
        distance = 0
        for rank, gram in enumerate(text_ranking):
            distance += abs(ranks[gram] - rank) if gram in ranks else max_len
        key = (distance, profile.lang)
        if best is None or key < best:
            best = key
    return best[1], best[0]


def write_profile(profile: LanguageProfile) -> str:
    """One n-gram per line in rank order (on-disk profile format)."""
    return "\n".join(profile.ranked_ngrams) + "\n"


def parse_profile(lang: str, text: str) -> LanguageProfile:
    grams = tuple(line for line in text.splitlines() if line)
    if not grams:
        raise ProfileError(f"profile for {lang!r} is empty")
    return LanguageProfile(lang, grams)
