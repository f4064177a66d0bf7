"""Annual-report ingestion: locate the MD&A section, clean it, segment it.

A filing body arrives as raw text that may carry HTML markup, tables, and
page-number lines.  ``extract_mdna`` finds the MD&A item heading, cuts the
section at the next item heading, strips the junk, and returns a cleaned
``MdnaDocument`` with its sentence segmentation.

Cleaning contract (all heuristics declared here and pinned by tests):

* HTML: ``<table>``/``<script>``/``<style>`` elements are dropped with their
  content, block-level tags become newlines, remaining tags are stripped,
  entities are unescaped.
* Text tables: within a block of consecutive non-blank lines, a line is
  "tabular" when it has >= 3 column-separated numeric fields; the whole
  block is dropped when >= 50% of its lines are tabular.
* Page numbers: a line whose trimmed content is only digits, or "Page N",
  is dropped.
* Whitespace: lines of a paragraph are joined with single spaces;
  paragraphs are separated by one blank line.  Cleaning is idempotent.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import date
from html import unescape
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptySection, NoMdnaFound

FORM_TYPES = ("10-K", "10-KSB", "10-K405", "10KSB40", "OTHER")

_TOKEN_RE = re.compile(r"[A-Za-z]+")

# "Item 6" / "Item 7" (not 7A) at the start of a line, optional punctuation,
# then an MD&A-indicative title on the same or the immediately following
# line.  The match swallows the standard title tail ("... and Analysis of
# Financial Condition and Results of Operations") so the section text starts
# after the full heading even when heading and body share a line.
_MDNA_HEADING_RE = re.compile(
    r"^[ \t]*item\s*[67](?!\s*[a-z0-9])\s*[.:\-–—]?[ \t]*(?:\n[ \t]*)?"
    r"(?:management[’']?s?\s+discussion|md\s*&\s*a|plan\s+of\s+operation)"
    r"(?:\s+(?:and|of|or|analysis|discussion|financial|condition|results?|operations?|plans?)\b)*"
    r"[.:]?",
    re.IGNORECASE | re.MULTILINE,
)

# Any later item heading ends the section ("Item 7A.", "Item 8.", ...).
# Line-anchored, or mid-line right after a sentence end when it carries its
# own punctuation; bare cross-references ("see Item 8 for details") do not
# terminate the section.
_NEXT_ITEM_RE = re.compile(
    r"(?:^[ \t]*item\s*\d+[a-z]?\b|(?<=[.!?])[ \t]+item\s*\d+[a-z]?\s*[.:\-–—])",
    re.IGNORECASE | re.MULTILINE,
)

_TAG_RE = re.compile(r"<[^>]*>")
_DROPPED_ELEMENT_RE = re.compile(
    r"<(table|script|style)\b.*?</\1\s*>", re.IGNORECASE | re.DOTALL
)
_BLOCK_TAG_RE = re.compile(
    r"</?(?:p|div|br|tr|li|h[1-6]|table|thead|tbody|html|head|body)\b[^>]*>", re.IGNORECASE
)

_PAGE_NUMBER_RE = re.compile(r"^(?:\d+|page\s+\d+)$", re.IGNORECASE)
_NUMERIC_FIELD_RE = re.compile(r"^[$(]*[-+]?[\d,]+(?:\.\d+)?[%)]*$")
_COLUMN_SPLIT_RE = re.compile(r"\s{2,}|\t|\|")

_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s+[\"'(A-Z0-9“])", re.DOTALL)


def _load_abbreviations() -> frozenset[str]:
    text = resources.files("distresskit.data").joinpath("abbreviations.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        entry = line.split("#", 1)[0].strip().rstrip(".")
        if entry:
            words.add(entry.upper())
    return frozenset(words)


_ABBREVIATIONS = _load_abbreviations()


@dataclass(frozen=True)
class RawFiling:
    """One annual-report filing as retrieved, body untouched."""

    filing_id: str
    firm_id: str
    fiscal_year: int
    filing_date: date
    form_type: str
    body: str

    def __post_init__(self) -> None:
        if not self.filing_id:
            raise ValueError("filing_id must be nonempty")
        if self.form_type not in FORM_TYPES:
            object.__setattr__(self, "form_type", "OTHER")


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    text: str
    word_count: int


@dataclass(frozen=True)
class MdnaDocument:
    """A cleaned MD&A section with its sentence segmentation."""

    filing_id: str
    firm_id: str
    filing_date: date
    text: str
    sentences: tuple[Sentence, ...] = field(default_factory=tuple)

    @property
    def doc_id(self) -> str:
        return self.filing_id


def tokenize_words(text: str) -> list[str]:
    """Maximal alphabetic runs, uppercased; digits and punctuation are not tokens."""
    return [m.group(0).upper() for m in _TOKEN_RE.finditer(text)]


def segment_sentences(doc_text: str) -> list[Sentence]:
    """Split text into sentences on terminal punctuation.

    A split happens after ``.!?`` when the next non-space character opens a
    sentence (capital, digit, or quote) and the word before a period is not
    a known abbreviation or a single-letter initial.  The guard list ships
    as ``data/abbreviations.txt`` and is editable without a code change.
    """
    sentences: list[Sentence] = []
    if not doc_text or not doc_text.strip():
        return sentences

    starts = [0]
    for m in _SENTENCE_END_RE.finditer(doc_text):
        if doc_text[m.start()] == "." and _guarded_abbreviation(doc_text, m.start()):
            continue
        starts.append(m.end())

    spans = list(zip(starts, starts[1:] + [len(doc_text)]))
    for begin, end in spans:
        piece = doc_text[begin:end].strip()
        if piece:
            sentences.append(
                Sentence(
                    doc_id="",
                    index=len(sentences),
                    text=piece,
                    word_count=len(tokenize_words(piece)),
                )
            )
    return sentences


def _guarded_abbreviation(text: str, period_pos: int) -> bool:
    # Token immediately before the period, including internal dots ("U.S").
    m = re.search(r"[\w.]+$", text[:period_pos])
    if m is None:
        return False
    token = m.group(0).rstrip(".")
    if not token:
        return False
    upper = token.upper()
    if upper in _ABBREVIATIONS:
        return True
    # Single-letter initials: "J. Smith".
    if len(token) == 1 and token.isalpha():
        return True
    return False


def extract_mdna(filing: RawFiling) -> MdnaDocument:
    """Extract and clean the MD&A section of a filing.

    The LAST qualifying MD&A heading wins (tables of contents repeat the
    heading), and the section runs until the next item heading.  The heading
    line itself is not part of the section.
    """
    if not filing.body:
        raise ValueError("filing body is empty")

    text = _strip_html(filing.body)

    heading = None
    for heading in _MDNA_HEADING_RE.finditer(text):
        pass
    if heading is None:
        raise NoMdnaFound(f"no MD&A item heading in filing {filing.filing_id}")

    start = heading.end()
    next_item = _NEXT_ITEM_RE.search(text, start)
    end = next_item.start() if next_item else len(text)

    cleaned = _clean_section(text[start:end])
    sentences = segment_sentences(cleaned)
    if not sentences:
        raise EmptySection(f"MD&A section of {filing.filing_id} is empty after cleaning")

    sentences = [
        Sentence(filing.filing_id, s.index, s.text, s.word_count) for s in sentences
    ]
    return MdnaDocument(
        filing_id=filing.filing_id,
        firm_id=filing.firm_id,
        filing_date=filing.filing_date,
        text=cleaned,
        sentences=tuple(sentences),
    )


def _strip_html(body: str) -> str:
    if "<" in body:
        body = _DROPPED_ELEMENT_RE.sub(" ", body)
        body = _BLOCK_TAG_RE.sub("\n", body)
        body = _TAG_RE.sub(" ", body)
    return unescape(body)


def _is_page_number_line(line: str) -> bool:
    return bool(_PAGE_NUMBER_RE.match(line.strip()))


def _is_tabular_line(line: str) -> bool:
    fields = [f.strip() for f in _COLUMN_SPLIT_RE.split(line.strip()) if f.strip()]
    numeric = sum(1 for f in fields if _NUMERIC_FIELD_RE.match(f))
    return numeric >= 3


def _clean_section(section: str) -> str:
    lines = [ln for ln in section.splitlines() if not _is_page_number_line(ln)]

    # Group into blocks of consecutive non-blank lines.
    blocks: list[list[str]] = []
    current: list[str] = []
    for ln in lines:
        if ln.strip():
            current.append(ln)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)

    paragraphs = []
    for block in blocks:
        tabular = sum(1 for ln in block if _is_tabular_line(ln))
        if tabular / len(block) >= 0.5:
            continue
        paragraph = " ".join(" ".join(ln.split()) for ln in block)
        if paragraph:
            paragraphs.append(paragraph)
    return "\n\n".join(paragraphs)


# -- corpus I/O ---------------------------------------------------------------

INDEX_COLUMNS = ("filing_id", "firm_id", "fiscal_year", "filing_date", "form_type", "path")


def iter_filings(index_path: str | Path) -> Iterator[RawFiling]:
    """Read filings listed in a sidecar CSV index; paths are relative to it."""
    index_path = Path(index_path)
    base = index_path.parent
    with open(index_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            body = (base / row["path"]).read_text(encoding="utf-8")
            yield RawFiling(
                filing_id=row["filing_id"],
                firm_id=row["firm_id"],
                fiscal_year=int(row["fiscal_year"]),
                filing_date=date.fromisoformat(row["filing_date"]),
                form_type=row["form_type"],
                body=body,
            )


def write_documents(docs: Iterable[MdnaDocument], path: str | Path) -> int:
    """Write cleaned documents as JSON lines; returns the record count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "filing_id": doc.filing_id,
                "firm_id": doc.firm_id,
                "filing_date": doc.filing_date.isoformat(),
                "text": doc.text,
                "sentences": [
                    {"index": s.index, "text": s.text, "word_count": s.word_count}
                    for s in doc.sentences
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_documents(path: str | Path) -> list[MdnaDocument]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            sentences = tuple(
                Sentence(rec["filing_id"], s["index"], s["text"], s["word_count"])
                for s in rec["sentences"]
            )
            docs.append(
                MdnaDocument(
                    filing_id=rec["filing_id"],
                    firm_id=rec["firm_id"],
                    filing_date=date.fromisoformat(rec["filing_date"]),
                    text=rec["text"],
                    sentences=sentences,
                )
            )
    return docs
