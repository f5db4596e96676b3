"""Quality-score acquisition and threshold gating.

Neural scorers are never embedded here: educational scores arrive from
an external scorer endpoint (or precomputed score files), and this
module applies the tiering and threshold rules to them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import requests

from .records import ACCEPT, DataError, Document, ParallelPair, Verdict, reject

logger = logging.getLogger(__name__)


class RangeError(DataError):
    pass


class GateError(DataError):
    pass


class ScorerUnavailable(DataError):
    pass


class ScorerProtocolError(DataError):
    pass


@dataclass(frozen=True)
class TierCutpoints:
    c1: float
    c2: float

    def validate(self) -> list[str]:
        if not (0.0 <= self.c1 < self.c2 <= 5.0):
            return ["tiering.cutpoints"]
        return []


@dataclass(frozen=True)
class ParallelThresholds:
    lex_default: float = 0.5
    lex_overrides: tuple[tuple[str, float], ...] = (("pt", 0.6),)
    qe_min: float = 0.7

    def validate(self) -> list[str]:
        violations = []
        values = [self.lex_default, self.qe_min] + [v for _, v in self.lex_overrides]
        if any(not 0.0 <= v <= 1.0 for v in values):
            violations.append("parallel_thresholds.range")
        return violations

    def lex_threshold(self, lang: str) -> float:
        for code, value in self.lex_overrides:
            if code == lang:
                return value
        return self.lex_default


def assign_tier(score: float, cut: TierCutpoints) -> int:
    """Map an educational score to training phase tier 1, 2 or 3 (3 = best)."""
    if not 0.0 <= score <= 5.0:
        raise RangeError(f"score {score} out of range [0,5]")
    if score < cut.c1:
        return 1
    if score < cut.c2:
        return 2
    return 3


def cutpoints_from_histogram(scores: list[float], fractions: tuple[float, float] = (1 / 3, 2 / 3)) -> TierCutpoints:
    """Empirical quantile cutpoints (nearest rank: sorted[floor(f * n)])."""
    f1, f2 = fractions
    if not scores:
        raise RangeError("empty score list")
    if not 0.0 < f1 < f2 < 1.0:
        raise RangeError(f"fractions {fractions} must satisfy 0 < f1 < f2 < 1")
    if len(set(scores)) < 3:
        raise RangeError("need at least 3 distinct scores to cut 3 tiers")
    ordered = sorted(scores)
    n = len(ordered)
    c1 = ordered[min(math.floor(f1 * n), n - 1)]
    c2 = ordered[min(math.floor(f2 * n), n - 1)]
    if c2 <= c1:
        higher = [s for s in ordered if s > c1]
        if not higher:
            raise RangeError("quantiles collide at the maximum score; cannot form 3 tiers")
        c2 = higher[0]
    return TierCutpoints(c1, c2)


def english_edu_gate(doc: Document) -> Verdict:
    """Keep English web documents only when the educational score is strictly above 2."""
    if doc.edu_score is None:
        raise GateError(f"document {doc.id!r} has no edu_score")
    return ACCEPT if doc.edu_score > 2.0 else reject("edu_score")


def gate_parallel(pair: ParallelPair, thresholds: ParallelThresholds) -> Verdict:
    """Inclusive threshold gate on (lexical cleanliness, QE) scores.

    The lexical threshold is looked up by the non-English side of the
    pair (all pairs are to/from English); if neither side is English the
    target language is used.
    """
    if pair.lex_score is None:
        raise GateError(f"pair {pair.id!r} has no lex_score")
    if pair.qe_score is None:
        raise GateError(f"pair {pair.id!r} has no qe_score")
    non_english = pair.src_lang if pair.tgt_lang == "en" else pair.tgt_lang
    if pair.lex_score < thresholds.lex_threshold(non_english):
        return reject("lex")
    if pair.qe_score < thresholds.qe_min:
        return reject("qe")
    return ACCEPT


def threshold_gate(value: float, min_value: float) -> bool:
    """Generic inclusive gate: keep iff value >= min_value."""
    return value >= min_value


@dataclass(frozen=True)
class ScorerConfig:
    url: str
    timeout: float = 30.0
    max_retries: int = 3
    batch_size: int = 64


class ScorerClient:
    """Client for the external quality-scorer endpoint.

    Request: POST {"texts": [...]}; response: {"scores": [...]} of equal
    length with values in [0, 5]. Batches are matched to responses by
    position, never by arrival order.
    """

    def __init__(self, config: ScorerConfig, session=None, sleep=None):
        import time

        self.config = config
        self.session = session if session is not None else requests.Session()
        self._sleep = sleep if sleep is not None else time.sleep

    def score_batch(self, texts: list[str]) -> list[float]:
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(min(2.0 ** (attempt - 1), 30.0))
            try:
                response = self.session.post(
                    self.config.url, json={"texts": texts}, timeout=self.config.timeout
                )
            except Exception as exc:  # transport failure; retry
                last_error = exc
                logger.warning("scorer request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code != 200:
                last_error = ScorerUnavailable(f"scorer returned status {response.status_code}")
                continue
            payload = response.json()
            scores = payload.get("scores")
            if not isinstance(scores, list) or len(scores) != len(texts):
                raise ScorerProtocolError(
                    f"scorer returned {0 if not isinstance(scores, list) else len(scores)} "
                    f"scores for {len(texts)} texts"
                )
            result = []
            for value in scores:
                if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 5.0:
                    raise ScorerProtocolError(f"score {value!r} outside [0,5]")
                result.append(float(value))
            return result
        raise ScorerUnavailable(f"scorer unreachable after {self.config.max_retries + 1} attempts: {last_error}")


def score_documents(docs: list[Document], client: ScorerClient) -> list[Document]:
    """Fill edu_score for a batch of documents, preserving order."""
    out: list[Document] = []
    size = client.config.batch_size
    for start in range(0, len(docs), size):
        chunk = docs[start : start + size]
        scores = client.score_batch([d.text for d in chunk])
        out.extend(d.with_fields(edu_score=s) for d, s in zip(chunk, scores))
    return out


def parse_score_file(text: str) -> dict[str, float]:
    """Precomputed-score ingestion: tab-separated `id<TAB>score` lines."""
    scores: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ScorerProtocolError(f"score file line {lineno}: expected id<TAB>score")
        try:
            scores[parts[0]] = float(parts[1])
        except ValueError:
            raise ScorerProtocolError(f"score file line {lineno}: bad score {parts[1]!r}")
    return scores
