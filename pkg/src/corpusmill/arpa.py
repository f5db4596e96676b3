"""Backoff n-gram language model in the ARPA interchange format.

Scoring uses the standard backoff recursion: if the full n-gram has an
explicit probability use it, otherwise add the context's backoff weight
and recurse on the shortened context. All probabilities are log10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .records import ACCEPT, DataError, Document, Verdict, reject

UNK = "<unk>"
BOS = "<s>"

Ngram = tuple[str, ...]


class ArpaError(DataError):
    pass


class PplError(DataError):
    pass


@dataclass
class ArpaModel:
    max_order: int
    probs: dict[Ngram, float] = field(default_factory=dict)
    backoffs: dict[Ngram, float] = field(default_factory=dict)
    vocab: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.vocab:
            self.vocab = frozenset(g[0] for g in self.probs if len(g) == 1)


@dataclass(frozen=True)
class PplGate:
    lang: str
    max_ppl: float

    def validate(self) -> list[str]:
        return [] if self.max_ppl > 1 else [f"ppl.{self.lang}.max_ppl"]


def parse_arpa(text: str) -> ArpaModel:
    """Parse an ARPA file; entry counts must match the \\data\\ header."""
    lines = text.splitlines()
    declared: dict[int, int] = {}
    probs: dict[Ngram, float] = {}
    backoffs: dict[Ngram, float] = {}
    seen: dict[int, int] = {}

    section = None  # None -> before \data\, 0 -> header, k -> k-grams body
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "\\data\\":
            section = 0
            continue
        if line == "\\end\\":
            section = None
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                order = int(line[1:].split("-", 1)[0])
            except ValueError:
                raise ArpaError(f"line {lineno}: bad section header {line!r}")
            section = order
            seen.setdefault(order, 0)
            continue
        if section == 0:
            if not line.startswith("ngram "):
                raise ArpaError(f"line {lineno}: expected 'ngram k=N', got {line!r}")
            try:
                order_s, count_s = line[len("ngram "):].split("=")
                declared[int(order_s)] = int(count_s)
            except ValueError:
                raise ArpaError(f"line {lineno}: malformed count line {line!r}")
            continue
        if section is None:
            raise ArpaError(f"line {lineno}: content outside any section")

        fields = raw.strip("\n").split("\t")
        if len(fields) not in (2, 3):
            raise ArpaError(f"line {lineno}: expected 2 or 3 tab-separated fields")
        try:
            logprob = float(fields[0])
        except ValueError:
            raise ArpaError(f"line {lineno}: bad log probability {fields[0]!r}")
        gram = tuple(fields[1].split(" "))
        if len(gram) != section:
            raise ArpaError(f"line {lineno}: {len(gram)}-gram in \\{section}-grams: section")
        probs[gram] = logprob
        if len(fields) == 3:
            try:
                backoffs[gram] = float(fields[2])
            except ValueError:
                raise ArpaError(f"line {lineno}: bad backoff weight {fields[2]!r}")
        seen[section] = seen.get(section, 0) + 1

    if not declared:
        raise ArpaError("no \\data\\ header found")
    for order, expected in declared.items():
        found = seen.get(order, 0)
        if found != expected:
            raise ArpaError(f"order {order}: header declares {expected} n-grams, body has {found}")
    for order in seen:
        if order not in declared:
            raise ArpaError(f"order {order}: section present but not declared in header")

    max_order = max(declared)
    for gram in probs:
        if len(gram) > 1 and gram[:-1] not in probs:
            raise ArpaError(f"{'/'.join(gram)}: prefix of order {len(gram)-1} missing")
    return ArpaModel(max_order=max_order, probs=probs, backoffs=backoffs)


def write_arpa(model: ArpaModel) -> str:
    """Deterministic ARPA serialization (round-trips bit-exact through parse_arpa)."""
    by_order: dict[int, list[Ngram]] = {}
    for gram in model.probs:
        by_order.setdefault(len(gram), []).append(gram)
    out = ["\\data\\"]
    for order in range(1, model.max_order + 1):
        out.append(f"ngram {order}={len(by_order.get(order, []))}")
    for order in range(1, model.max_order + 1):
        out.append("")
        out.append(f"\\{order}-grams:")
        for gram in sorted(by_order.get(order, [])):
            line = f"{model.probs[gram]!r}\t{' '.join(gram)}"
            if gram in model.backoffs:
                line += f"\t{model.backoffs[gram]!r}"
            out.append(line)
    out.append("")
    out.append("\\end\\")
    return "\n".join(out) + "\n"


def _map_token(model: ArpaModel, token: str) -> str:
    if token in model.vocab:
        return token
    if UNK in model.vocab:
        return UNK
    raise PplError(f"token {token!r} not in vocabulary and model has no {UNK}")


def log_prob(model: ArpaModel, context: Ngram, word: str) -> float:
    """log10 P(word | context) with backoff; context is windowed to max_order-1."""
    word = _map_token(model, word)
    if model.max_order > 1:
        ctx = tuple(_map_token(model, t) for t in context[-(model.max_order - 1):])
    else:
        ctx = ()
    return _backoff_prob(model, ctx, word)


def _backoff_prob(model: ArpaModel, ctx: Ngram, word: str) -> float:
    gram = ctx + (word,)
    if gram in model.probs:
        return model.probs[gram]
    if not ctx:
        raise ArpaError(f"vocabulary token {word!r} has no unigram entry")
    return model.backoffs.get(ctx, 0.0) + _backoff_prob(model, ctx[1:], word)


def perplexity(model: ArpaModel, tokens: list[str]) -> float:
    """10 ** (mean negative log10 probability per scored token).

    A sentence-start marker conditions the first tokens when the model
    knows one, but is never scored itself.
    """
    if not tokens:
        raise PplError("cannot compute perplexity of an empty token sequence")
    history: list[str] = [BOS] if BOS in model.vocab else []
    total = 0.0
    for token in tokens:
        total += log_prob(model, tuple(history), token)
        history.append(token)
    return 10.0 ** (-total / len(tokens))


def tokenize(text: str) -> list[str]:
    """LM tokenization: lowercase then whitespace split."""
    return text.lower().split()


def ppl_gate(doc: Document, model: ArpaModel, gate: PplGate) -> tuple[Document, Verdict]:
    """Annotate the document with its perplexity and reject when it exceeds the cap."""
    tokens = tokenize(doc.text)
    if not tokens:
        return doc, reject("empty_after_tokenize")
    ppl = perplexity(model, tokens)
    annotated = doc.with_fields(ppl=ppl)
    if ppl > gate.max_ppl:
        return annotated, reject("high_ppl")
    return annotated, ACCEPT


def percentile_threshold(ppls: list[float], percentile: float = 70.0) -> float:
    """Nearest-rank percentile of a perplexity sample, for picking max_ppl caps."""
    if not ppls:
        raise PplError("empty perplexity sample")
    if not 0 < percentile <= 100:
        raise PplError(f"percentile {percentile} outside (0, 100]")
    ordered = sorted(ppls)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[rank - 1]
