"""Dictionary-based document tone: positive/negative word ratios.

Counts exact uppercase token matches against a positive and a negative word
list and scales by total word count, yielding the DICTPOS and DICTNEG pair.
Deliberately naive: no stemming, no negation handling, single tokens only.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import MdnaDocument, tokenize_words
from .errors import EmptyDocument, MalformedLexicon, OverlappingLists

_WORD_RE = re.compile(r"[A-Za-z]+\Z")


@dataclass(frozen=True)
class Lexicon:
    positive: frozenset[str]
    negative: frozenset[str]

    def __post_init__(self) -> None:
        for name, words in (("positive", self.positive), ("negative", self.negative)):
            bad = [w for w in words if not _WORD_RE.match(w) or w != w.upper()]
            if bad:
                raise MalformedLexicon(f"{name} list has non-alphabetic or non-uppercase entries: {sorted(bad)[:5]}")
        overlap = self.positive & self.negative
        if overlap:
            raise OverlappingLists(f"words in both lists: {sorted(overlap)[:5]}")

    def content_hash(self) -> str:
        """Stable digest of the word lists; used to version derived models."""
        payload = "\n".join(sorted(self.positive)) + "\0" + "\n".join(sorted(self.negative))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class DictTone:
    dict_pos: float
    dict_neg: float
    n_pos: int
    n_neg: int
    n_words: int


def load_word_list(path: str | Path) -> frozenset[str]:
    """One word per line, ``#`` comments allowed; words are uppercased."""
    words = set()
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        if not _WORD_RE.match(entry):
            raise MalformedLexicon(f"{path}:{lineno}: non-alphabetic entry {entry!r}")
        words.add(entry.upper())
    return frozenset(words)


def load_lexicon(positive_path: str | Path, negative_path: str | Path) -> Lexicon:
    return Lexicon(load_word_list(positive_path), load_word_list(negative_path))


def sample_lexicon() -> Lexicon:
    """The small word lists bundled for tests and demos."""
    from importlib import resources

    data = resources.files("distresskit.data")
    with resources.as_file(data.joinpath("sample_positive.txt")) as pos:
        with resources.as_file(data.joinpath("sample_negative.txt")) as neg:
            return load_lexicon(pos, neg)


def count_hits(tokens: list[str], lex: Lexicon) -> tuple[int, int]:
    n_pos = sum(1 for t in tokens if t in lex.positive)
    n_neg = sum(1 for t in tokens if t in lex.negative)
    return n_pos, n_neg


def compute_dict_tone(doc: MdnaDocument, lex: Lexicon) -> DictTone:
    """Positive/negative word counts over the document, scaled by total words."""
    tokens = tokenize_words(doc.text)
    if not tokens:
        raise EmptyDocument(f"document {doc.doc_id} has no word tokens")
    n_pos, n_neg = count_hits(tokens, lex)
    n_words = len(tokens)
    return DictTone(
        dict_pos=n_pos / n_words,
        dict_neg=n_neg / n_words,
        n_pos=n_pos,
        n_neg=n_neg,
        n_words=n_words,
    )
