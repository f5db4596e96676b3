"""Canonical record types and their line-oriented serialization.

Every pipeline stage consumes and produces these records as one JSON
object per line (UTF-8, no embedded newlines). Unknown keys survive a
parse/write round trip via the ``extras`` map so released-dataset
metadata is never dropped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace


class DataError(Exception):
    """Base for errors caused by bad input data (CLI exit code 1)."""


class ParseError(DataError):
    def __init__(self, msg: str, byte_offset: int | None = None):
        super().__init__(msg)
        self.byte_offset = byte_offset


class SchemaError(DataError):
    def __init__(self, msg: str, field_name: str | None = None):
        super().__init__(msg)
        self.field_name = field_name


class MergeError(DataError):
    pass


_LANG_RE = re.compile(r"^[a-z]{2,3}$")

# Fixed key order for deterministic serialization.
_DOC_KEYS = ("id", "source", "lang", "url", "text", "edu_score", "ppl", "tier", "token_count")
_PAIR_KEYS = ("id", "src_lang", "tgt_lang", "src_text", "tgt_text", "lex_score", "qe_score", "doc_id")


@dataclass(frozen=True)
class Verdict:
    """Accept/Reject outcome of a filter stage; reject carries a reason."""

    accept: bool
    reason: str | None = None

    @property
    def rejected(self) -> bool:
        return not self.accept


ACCEPT = Verdict(True)


def reject(reason: str) -> Verdict:
    return Verdict(False, reason)


@dataclass(frozen=True)
class Document:
    """One web-corpus record flowing through every filter stage."""

    id: str
    lang: str
    text: str
    source: str = ""
    url: str | None = None
    edu_score: float | None = None
    ppl: float | None = None
    tier: int | None = None
    token_count: int | None = None
    extras: tuple[tuple[str, object], ...] = ()

    def validate(self) -> None:
        if not self.id:
            raise SchemaError("id must be non-empty", "id")
        if not _LANG_RE.match(self.lang):
            raise SchemaError(f"lang {self.lang!r} is not a lowercase ISO-639 code", "lang")
        if self.edu_score is not None and not 0.0 <= self.edu_score <= 5.0:
            raise SchemaError(f"edu_score {self.edu_score} out of range [0,5]", "edu_score")
        if self.ppl is not None and self.ppl <= 0:
            raise SchemaError(f"ppl {self.ppl} must be positive", "ppl")
        if self.tier is not None and self.tier not in (1, 2, 3):
            raise SchemaError(f"tier {self.tier} not in {{1,2,3}}", "tier")
        if self.token_count is not None and self.token_count < 0:
            raise SchemaError(f"token_count {self.token_count} must be >= 0", "token_count")

    def with_fields(self, **kwargs) -> "Document":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ParallelPair:
    """A source/target sentence pair with quality scores."""

    id: str
    src_lang: str
    tgt_lang: str
    src_text: str
    tgt_text: str
    lex_score: float | None = None
    qe_score: float | None = None
    doc_id: str | None = None
    extras: tuple[tuple[str, object], ...] = ()

    def validate(self) -> None:
        if not self.id:
            raise SchemaError("id must be non-empty", "id")
        for name in ("src_lang", "tgt_lang"):
            if not _LANG_RE.match(getattr(self, name)):
                raise SchemaError(f"{name} is not a lowercase ISO-639 code", name)
        for name in ("src_text", "tgt_text"):
            if not getattr(self, name).strip():
                raise SchemaError(f"{name} empty after whitespace trim", name)
        for name in ("lex_score", "qe_score"):
            score = getattr(self, name)
            if score is not None and not 0.0 <= score <= 1.0:
                raise SchemaError(f"{name} {score} out of range [0,1]", name)

    def with_fields(self, **kwargs) -> "ParallelPair":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class Manifest:
    """Per-stage accounting: input = output + sum of rejection counts."""

    stage: str
    counts: dict[str, int] = field(default_factory=dict)
    input_records: int = 0
    output_records: int = 0

    def validate(self) -> None:
        total = self.output_records + sum(self.counts.values())
        if self.input_records != total:
            raise SchemaError(
                f"manifest for stage {self.stage!r} does not balance: "
                f"{self.input_records} != {self.output_records} + {sum(self.counts.values())}"
            )


class ManifestBuilder:
    """Mutable tally used while streaming a stage; freeze() yields the Manifest."""

    def __init__(self, stage: str):
        self.stage = stage
        self.counts: dict[str, int] = {}
        self.input_records = 0
        self.output_records = 0

    def saw(self, n: int = 1) -> None:
        self.input_records += n

    def kept(self, n: int = 1) -> None:
        self.output_records += n

    def rejected(self, reason: str, n: int = 1) -> None:
        self.counts[reason] = self.counts.get(reason, 0) + n

    def freeze(self) -> Manifest:
        m = Manifest(self.stage, dict(self.counts), self.input_records, self.output_records)
        m.validate()
        return m


def merge_manifests(a: Manifest, b: Manifest) -> Manifest:
    if a.stage != b.stage:
        raise MergeError(f"cannot merge manifests for stages {a.stage!r} and {b.stage!r}")
    counts = dict(a.counts)
    for key, n in b.counts.items():
        counts[key] = counts.get(key, 0) + n
    merged = Manifest(
        a.stage,
        counts,
        a.input_records + b.input_records,
        a.output_records + b.output_records,
    )
    merged.validate()
    return merged


def _decode_line(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        byte_offset = len(line[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed record: {exc.msg} at byte {byte_offset}", byte_offset) from exc
    if not isinstance(obj, dict):
        raise ParseError("record line is not an object")
    return obj


def _take(obj: dict, key: str, types: tuple[type, ...], required: bool = False):
    if key not in obj:
        if required:
            raise SchemaError(f"missing required field {key!r}", key)
        return None
    value = obj.pop(key)
    # json has no int/float distinction we care about for score fields
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool):
        raise SchemaError(f"field {key!r} has wrong type {type(value).__name__}", key)
    return value


def parse_record(line: str) -> Document:
    """Parse one serialized line into a Document, preserving unknown keys."""
    obj = _decode_line(line)
    doc = Document(
        id=_take(obj, "id", (str,), required=True),
        lang=_take(obj, "lang", (str,), required=True),
        text=_take(obj, "text", (str,), required=True),
        source=_take(obj, "source", (str,)) or "",
        url=_take(obj, "url", (str,)),
        edu_score=_take(obj, "edu_score", (float,)),
        ppl=_take(obj, "ppl", (float,)),
        tier=_take(obj, "tier", (int,)),
        token_count=_take(obj, "token_count", (int,)),
        extras=tuple(sorted(obj.items())),
    )
    doc.validate()
    return doc


def write_record(doc: Document) -> str:
    """Serialize a Document to a single deterministic line (no trailing newline)."""
    doc.validate()
    out: dict[str, object] = {}
    for key in _DOC_KEYS:
        value = getattr(doc, key)
        if key == "source" and value == "":
            continue
        if value is not None:
            out[key] = value
    for key, value in doc.extras:
        out[key] = value
    return json.dumps(out, ensure_ascii=False, separators=(",", ":"))


def parse_pair(line: str) -> ParallelPair:
    obj = _decode_line(line)
    pair = ParallelPair(
        id=_take(obj, "id", (str,), required=True),
        src_lang=_take(obj, "src_lang", (str,), required=True),
        tgt_lang=_take(obj, "tgt_lang", (str,), required=True),
        src_text=_take(obj, "src_text", (str,), required=True),
        tgt_text=_take(obj, "tgt_text", (str,), required=True),
        lex_score=_take(obj, "lex_score", (float,)),
        qe_score=_take(obj, "qe_score", (float,)),
        doc_id=_take(obj, "doc_id", (str,)),
        extras=tuple(sorted(obj.items())),
    )
    pair.validate()
    return pair


def write_pair(pair: ParallelPair) -> str:
    pair.validate()
    out: dict[str, object] = {}
    for key in _PAIR_KEYS:
        value = getattr(pair, key)
        if value is not None:
            out[key] = value
    for key, value in pair.extras:
        out[key] = value
    return json.dumps(out, ensure_ascii=False, separators=(",", ":"))


def write_manifest(manifest: Manifest) -> str:
    manifest.validate()
    return json.dumps(
        {
            "stage": manifest.stage,
            "counts": dict(sorted(manifest.counts.items())),
            "input_records": manifest.input_records,
            "output_records": manifest.output_records,
        },
        ensure_ascii=False,
        indent=2,
        sort_keys=False,
    )


def parse_manifest(text: str) -> Manifest:
    obj = json.loads(text)
    m = Manifest(obj["stage"], dict(obj["counts"]), obj["input_records"], obj["output_records"])
    m.validate()
    return m
