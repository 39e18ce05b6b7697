"""Review-comment corpus: records, JSONL persistence, sentence splitting,
benchmark derivation and synonym augmentation."""

from __future__ import annotations

import dataclasses
import json
import logging
import random
import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InsufficientLexiconError, LexiconError, SerializationError

logger = logging.getLogger(__name__)

NON_TD = "non_td"


class TdType(str, Enum):
    DOCUMENTATION = "documentation"
    CODE = "code"
    DESIGN = "design"
    DEFECT = "defect"
    REQUIREMENT = "requirement"
    TEST = "test"
    ARCHITECTURE = "architecture"
    BUILD = "build"
    USABILITY = "usability"
    VERSIONING = "versioning"

    def __str__(self) -> str:
        return self.value


TD_TYPES: tuple[str, ...] = tuple(t.value for t in TdType)
ALL_LABELS: tuple[str, ...] = (NON_TD,) + TD_TYPES


def parse_label(value: str | TdType | None) -> str:
    """Normalize a label to its serialized form: ``"non_td"`` or a type name."""
    if value is None:
        return NON_TD
    if isinstance(value, TdType):
        return value.value
    v = str(value).strip().lower().replace("-", "_").replace(" ", "_")
    if v in ("non_td", "nontd", "none", "not_td"):
        return NON_TD
    if v.endswith("_debt"):
        v = v[: -len("_debt")]
    if v not in TD_TYPES:
        raise ValueError(f"unknown label {value!r}")
    return v


def is_td(label: str) -> bool:
    return label != NON_TD


def parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class RawComment:
    platform: str
    package: str
    issue_number: int
    comment_id: str
    created_at: str
    body: str
    url: str

    def __post_init__(self):
        if int(self.issue_number) < 1:
            raise ValueError(f"issue_number must be positive, got {self.issue_number}")
        parse_timestamp(self.created_at)

    @property
    def year(self) -> int:
        return parse_timestamp(self.created_at).year

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RawComment":
        return cls(
            platform=str(d["platform"]),
            package=str(d["package"]),
            issue_number=int(d["issue_number"]),
            comment_id=str(d["comment_id"]),
            created_at=str(d["created_at"]),
            body=str(d["body"]),
            url=str(d["url"]),
        )


@dataclass(frozen=True)
class LabeledSentence:
    text: str
    label: str
    comment_id: str = ""
    package: str = ""
    platform: str = ""
    created_at: str = ""
    augmented: bool = False

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("sentence text is empty")
        object.__setattr__(self, "label", parse_label(self.label))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "LabeledSentence":
        return cls(
            text=str(d["text"]),
            label=parse_label(d["label"]),
            comment_id=str(d.get("comment_id", "")),
            package=str(d.get("package", "")),
            platform=str(d.get("platform", "")),
            created_at=str(d.get("created_at", "")),
            augmented=bool(d.get("augmented", False)),
        )


# ---------------------------------------------------------------------------
# JSONL persistence


def _dump_line(record: dict) -> str:
    try:
        return json.dumps(record, ensure_ascii=False) + "\n"
    except (TypeError, ValueError) as exc:
        raise SerializationError(str(exc)) from exc


def persist_corpus(comments: Iterable[RawComment], path: str | Path, append: bool = False) -> int:
    """Write comments as JSONL, one object per line. Returns the count written.

    Each line is written with a single ``write`` call so appends from one
    writer never interleave partial records.
    """
    n = 0
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(_dump_line(c.to_dict()))
            n += 1
    return n


def _read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise SerializationError(f"{path}:{lineno}: {exc}") from exc


def load_corpus(path: str | Path) -> list[RawComment]:
    out = []
    seen = set()
    for d in _read_jsonl(path):
        c = RawComment.from_dict(d)
        if c.comment_id in seen:
            raise SerializationError(f"duplicate comment_id {c.comment_id!r} in {path}")
        seen.add(c.comment_id)
        out.append(c)
    return out


def save_dataset(sentences: Iterable[LabeledSentence], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(_dump_line(s.to_dict()))
            n += 1
    return n


def load_dataset(path: str | Path) -> list[LabeledSentence]:
    return [LabeledSentence.from_dict(d) for d in _read_jsonl(path)]


# ---------------------------------------------------------------------------
# sentence splitting

ABBREVIATIONS = (
    "e.g.", "i.e.", "et al.", "etc.", "vs.", "cf.", "approx.", "fig.", "figs.",
    "eq.", "no.", "mr.", "mrs.", "ms.", "dr.", "prof.", "sec.", "ref.", "resp.",
    "incl.", "viz.", "a.k.a.", "w.r.t.", "p.s.",
)

_FENCED = re.compile(r"^[ \t]*(```|~~~).*?^[ \t]*\1[^\n]*$\n?", re.MULTILINE | re.DOTALL)
_UNCLOSED_FENCE = re.compile(r"^[ \t]*(```|~~~).*\Z", re.MULTILINE | re.DOTALL)
_INLINE = re.compile(r"(`+)(?:(?!\1).)+?\1", re.DOTALL)
_PARAGRAPH = re.compile(r"\n[ \t]*\n")
_TERMINATOR = re.compile(r"[.!?]+[\"')\]]*")
_NEXT_START = re.compile(r"\s+[\"'(\[]?[A-Z]")


def strip_code(body: str) -> str:
    """Remove fenced code blocks and inline code spans from markdown."""
    text = _FENCED.sub("\n\n", body)
    text = _UNCLOSED_FENCE.sub("", text)
    return _INLINE.sub(" ", text)


def _is_abbreviation(text: str, end: int) -> bool:
    head = text[:end].lower()
    for abbr in ABBREVIATIONS:
        if head.endswith(abbr):
            start = end - len(abbr)
            if start == 0 or not text[start - 1].isalnum():
                return True
    return False


def _split_paragraph(text: str) -> list[str]:
    out = []
    start = 0
    for m in _TERMINATOR.finditer(text):
        end = m.end()
        rest = text[end:]
        if rest.strip() and not _NEXT_START.match(rest):
            continue
        if text[m.start()] == "." and _is_abbreviation(text, m.start() + 1):
            continue
        out.append(text[start:end])
        start = end
    out.append(text[start:])
    return out


def split_sentences(body: str) -> list[str]:
    """Split a markdown comment body into trimmed, non-empty sentences.

    Code is stripped first. A sentence ends at ``.``, ``!`` or ``?`` followed
    by whitespace and a capital letter, or by the end of a paragraph; a period
    that closes a known abbreviation is never a boundary.
    """
    if not body:
        return []
    sentences = []
    for para in _PARAGRAPH.split(strip_code(body)):
        for s in _split_paragraph(para):
            s = " ".join(s.split())
            if s:
                sentences.append(s)
    return sentences


# ---------------------------------------------------------------------------
# benchmark derivation


@dataclass(frozen=True)
class LabeledPhrase:
    comment_id: str
    phrase: str
    td_type: str

    def __post_init__(self):
        label = parse_label(self.td_type)
        if label == NON_TD:
            raise ValueError("labeled phrases must carry a TD type")
        object.__setattr__(self, "td_type", label)


def load_phrases(path: str | Path) -> list[LabeledPhrase]:
    """Read labeled phrases from JSONL or CSV (columns comment_id, phrase, type)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        import csv

        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = list(_read_jsonl(path))
    return [
        LabeledPhrase(str(r["comment_id"]), str(r["phrase"]), r.get("type") or r.get("td_type"))
        for r in rows
    ]


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


@dataclass
class DerivedBenchmark:
    sentences: list[LabeledSentence] = field(default_factory=list)
    unresolved: list[str] = field(default_factory=list)
    unmatched_phrases: list[LabeledPhrase] = field(default_factory=list)
    conflicts: list[str] = field(default_factory=list)

    def counts(self) -> Counter:
        return Counter(s.label for s in self.sentences)


def derive_benchmark(
    labeled_phrases: Sequence[LabeledPhrase | tuple], comments: Iterable[RawComment]
) -> DerivedBenchmark:
    """Label every sentence of each referenced comment.

    A sentence containing a labeled phrase of its comment (case- and
    whitespace-insensitive) gets that phrase's type; the rest are non-TD.
    Unresolvable comment ids are collected, not raised.
    """
    by_id = {c.comment_id: c for c in comments}
    phrases: dict[str, list[LabeledPhrase]] = {}
    for p in labeled_phrases:
        if not isinstance(p, LabeledPhrase):
            p = LabeledPhrase(*p)
        phrases.setdefault(p.comment_id, []).append(p)

    result = DerivedBenchmark()
    seen: set[tuple[str, str, str]] = set()
    for cid, plist in phrases.items():
        comment = by_id.get(cid)
        if comment is None:
            result.unresolved.append(cid)
            continue
        matched_phrases = set()
        for sent in split_sentences(comment.body):
            ns = _norm(sent)
            labels = []
            for i, p in enumerate(plist):
                if _norm(p.phrase) and _norm(p.phrase) in ns:
                    matched_phrases.add(i)
                    if p.td_type not in labels:
                        labels.append(p.td_type)
            if len(labels) > 1:
                logger.warning("sentence in %s matched several types: %s", cid, labels)
                result.conflicts.append(cid)
            for label in labels or [NON_TD]:
                key = (sent, label, cid)
                if key in seen:
                    continue
                seen.add(key)
                result.sentences.append(
                    LabeledSentence(
                        text=sent,
                        label=label,
                        comment_id=cid,
                        package=comment.package,
                        platform=comment.platform,
                        created_at=comment.created_at,
                    )
                )
        result.unmatched_phrases.extend(p for i, p in enumerate(plist) if i not in matched_phrases)
    if result.unresolved:
        logger.warning("%d comment ids could not be resolved", len(result.unresolved))
    return result


# ---------------------------------------------------------------------------
# augmentation

POS_TAGS = ("adjective", "verb")


class SynonymLexicon:
    """Synonyms keyed by (word, part of speech); only adjectives and verbs."""

    def __init__(self, entries: Mapping[tuple[str, str], Sequence[str]] | None = None):
        self._entries: dict[tuple[str, str], tuple[str, ...]] = {}
        for (word, pos), syns in (entries or {}).items():
            self.add(word, pos, syns)

    def add(self, word: str, pos: str, synonyms: Sequence[str]) -> None:
        if pos not in POS_TAGS:
            raise LexiconError(f"unsupported part of speech {pos!r} for {word!r}")
        if word != word.lower() or any(s != s.lower() for s in synonyms):
            raise LexiconError(f"lexicon entries must be lowercase: {word!r}")
        if word in synonyms:
            raise LexiconError(f"synonym list of {word!r} contains the word itself")
        if synonyms:
            self._entries[(word, pos)] = tuple(synonyms)

    def synonyms(self, word: str) -> tuple[str, ...]:
        """All synonyms for ``word`` across adjective and verb senses, in order."""
        out: list[str] = []
        for pos in POS_TAGS:
            for s in self._entries.get((word, pos), ()):
                if s not in out:
                    out.append(s)
        return tuple(out)

    def __contains__(self, word: str) -> bool:
        return any((word, pos) in self._entries for pos in POS_TAGS)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    @classmethod
    def load(cls, path: str | Path) -> "SynonymLexicon":
        lex = cls()
        for d in _read_jsonl(path):
            lex.add(str(d["word"]), str(d["pos"]), [str(s) for s in d["synonyms"]])
        return lex

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for (word, pos), syns in self._entries.items():
                fh.write(_dump_line({"word": word, "pos": pos, "synonyms": list(syns)}))


_WORD = re.compile(r"\w+(?:'\w+)*")


def _match_case(template: str, word: str) -> str:
    if template.isupper() and len(template) > 1:
        return word.upper()
    if template[:1].isupper():
        return word[:1].upper() + word[1:]
    return word


def _replaceable(text: str, lexicon: SynonymLexicon) -> list[re.Match]:
    return [m for m in _WORD.finditer(text) if m.group().lower() in lexicon]


def _substitute(text: str, lexicon: SynonymLexicon, rng: random.Random) -> str:
    spots = _replaceable(text, lexicon)
    chosen = sorted(rng.sample(range(len(spots)), rng.randint(1, len(spots))))
    pieces, last = [], 0
    for i in chosen:
        m = spots[i]
        syn = rng.choice(lexicon.synonyms(m.group().lower()))
        pieces.append(text[last : m.start()])
        pieces.append(_match_case(m.group(), syn))
        last = m.end()
    pieces.append(text[last:])
    return "".join(pieces)


def augment(
    sentences: Sequence[LabeledSentence],
    lexicon: SynonymLexicon,
    targets: Mapping[str | TdType, int],
    seed: int = 0,
    max_attempts: int = 20,
) -> list[LabeledSentence]:
    """Top up under-represented TD types with synonym-substituted copies.

    Originals are returned unchanged and in order, followed by the generated
    sentences. Per-type counts in the output equal ``targets`` exactly.
    """
    counts = Counter(s.label for s in sentences)
    wanted = {parse_label(k): int(v) for k, v in targets.items()}
    for label, n in wanted.items():
        if n < counts.get(label, 0):
            raise ValueError(f"target for {label!r} ({n}) is below its current count ({counts[label]})")

    rng = random.Random(seed)
    out = list(sentences)
    for label in ALL_LABELS:
        if label not in wanted:
            continue
        need = wanted[label] - counts.get(label, 0)
        if need == 0:
            continue
        sources = [s for s in sentences if s.label == label and not s.augmented and _replaceable(s.text, lexicon)]
        if not sources:
            raise InsufficientLexiconError(label)
        produced = {s.text for s in sentences if s.label == label}
        for _ in range(need):
            for _attempt in range(max_attempts):
                src = rng.choice(sources)
                text = _substitute(src.text, lexicon, rng)
                if text not in produced:
                    break
            produced.add(text)
            out.append(dataclasses.replace(src, text=text, augmented=True))
    return out


def default_targets(sentences: Sequence[LabeledSentence]) -> dict[str, int]:
    """Median TD class count times two, capped at the largest class; never shrinks a class."""
    counts = Counter(s.label for s in sentences if is_td(s.label))
    if not counts:
        return {}
    goal = min(int(statistics.median(counts.values()) * 2), max(counts.values()))
    return {label: max(n, goal) for label, n in counts.items()}
