"""Per-sentence 3-class sentiment scoring and document-level aggregation.

Class order is fixed everywhere: index 0 = positive, 1 = negative,
2 = neutral.  A document's sentiment is the component-wise sum of its
sentence probability triples divided by the grand total, which equals the
per-sentence average when every triple sums to one but stays well defined
when a backend returns slightly sub-simplex rows.

Two backends ship here: a deterministic lexicon-softmax stub so the whole
pipeline runs offline, and an HTTP client for an external scoring service.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import requests

from .corpus import MdnaDocument, Sentence, tokenize_words
from .errors import (
    BackendRejected,
    BackendUnavailable,
    EmptyDocument,
    EmptyScoreList,
    InvalidDistribution,
    MixedDocuments,
)
from .lexicon import Lexicon, count_hits

CLASS_ORDER = ("positive", "negative", "neutral")

_SIMPLEX_TOL = 1e-9
# A backend row whose sum strays farther than this is a contract violation;
# anything closer is float truncation and gets renormalized.
_BACKEND_SUM_TOL = 1e-4

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class SentenceScore:
    doc_id: str
    sent_index: int
    p: Triple

    def __post_init__(self) -> None:
        validate_distribution(self.p, tol=_SIMPLEX_TOL)

    @property
    def p_pos(self) -> float:
        return self.p[0]

    @property
    def p_neg(self) -> float:
        return self.p[1]

    @property
    def p_neu(self) -> float:
        return self.p[2]


@dataclass(frozen=True)
class DocumentSentiment:
    doc_id: str
    pos: float
    neg: float
    neu: float
    n_sentences: int


def validate_distribution(p: Sequence[float], tol: float = 1e-6) -> None:
    if len(p) < 2:
        raise InvalidDistribution(f"need at least 2 classes, got {len(p)}")
    if any(x < -tol for x in p):
        raise InvalidDistribution(f"negative component in {p}")
    total = sum(p)
    if abs(total - 1.0) > tol:
        raise InvalidDistribution(f"components sum to {total}, not 1")


def normalize_class_totals(totals: Sequence[float]) -> Triple:
    """Divide summed class scores by their grand total."""
    grand = sum(totals)
    if grand <= 0:
        raise InvalidDistribution(f"non-positive total {grand}")
    return tuple(t / grand for t in totals)  # type: ignore[return-value]


def aggregate_document(scores: Sequence[SentenceScore]) -> DocumentSentiment:
    """Sum sentence probability triples and normalize by the grand total."""
    if not scores:
        raise EmptyScoreList("no sentence scores to aggregate")
    doc_ids = {s.doc_id for s in scores}
    if len(doc_ids) > 1:
        raise MixedDocuments(f"scores span documents {sorted(doc_ids)}")
    totals = (
        sum(s.p[0] for s in scores),
        sum(s.p[1] for s in scores),
        sum(s.p[2] for s in scores),
    )
    pos, neg, neu = normalize_class_totals(totals)
    return DocumentSentiment(
        doc_id=scores[0].doc_id, pos=pos, neg=neg, neu=neu, n_sentences=len(scores)
    )


# -- backends -----------------------------------------------------------------


class ScoringBackend(ABC):
    """A deterministic sentence scorer: same input and model state, same scores."""

    name: str
    model_version: str
    max_sentence_tokens: int

    @abstractmethod
    def score_sentences(self, sentences: Sequence[str]) -> list[Triple]:
        """One probability triple per sentence, order preserved."""


def _softmax3(logits: Sequence[float]) -> Triple:
    peak = max(logits)
    exps = [math.exp(z - peak) for z in logits]
    total = sum(exps)
    return tuple(e / total for e in exps)  # type: ignore[return-value]


def stub_score(sentence: Sentence, lex: Lexicon, temperature: float = 1.0) -> SentenceScore:
    """Deterministic offline score: softmax over lexicon hit counts.

    Logits are (n_pos, n_neg, 0.5) / temperature; the 0.5 is a fixed neutral
    prior so hit-free sentences come out mostly neutral.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    p = _stub_triple(sentence.text, lex, temperature)
    return SentenceScore(doc_id=sentence.doc_id, sent_index=sentence.index, p=p)


_NEUTRAL_PRIOR = 0.5


def _stub_triple(text: str, lex: Lexicon, temperature: float) -> Triple:
    n_pos, n_neg = count_hits(tokenize_words(text), lex)
    return _softmax3((n_pos / temperature, n_neg / temperature, _NEUTRAL_PRIOR / temperature))


class StubBackend(ScoringBackend):
    """Offline lexicon-softmax backend; model version derives from the lexicon."""

    max_sentence_tokens = 512

    def __init__(self, lexicon: Lexicon, temperature: float = 1.0, name: str = "stub"):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.lexicon = lexicon
        self.temperature = temperature
        self.name = name
        digest = hashlib.sha256(
            f"{lexicon.content_hash()}|{temperature!r}".encode()
        ).hexdigest()
        self.model_version = f"stub-{digest[:12]}"

    def score_sentences(self, sentences: Sequence[str]) -> list[Triple]:
        return [_stub_triple(s, self.lexicon, self.temperature) for s in sentences]


class HttpScoringBackend(ScoringBackend):
    """Client for the external scoring service's POST /v1/score endpoint.

    Batches are dispatched with bounded parallelism and reassembled in order,
    so concurrency is unobservable downstream.
    """

    def __init__(
        self,
        url: str,
        model_version: str,
        name: str = "service",
        max_sentence_tokens: int = 512,
        batch_size: int = 64,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        retries: int = 2,
        session: requests.Session | None = None,
    ):
        self.url = url.rstrip("/")
        self.model_version = model_version
        self.name = name
        self.max_sentence_tokens = max_sentence_tokens
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def score_sentences(self, sentences: Sequence[str]) -> list[Triple]:
        batches = [
            list(sentences[i : i + self.batch_size])
            for i in range(0, len(sentences), self.batch_size)
        ]
        if len(batches) <= 1:
            results = [self._score_batch(b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._score_batch, batches))
        return [triple for batch in results for triple in batch]

    def _score_batch(self, batch: list[str]) -> list[Triple]:
        payload = {"model_version": self.model_version, "sentences": batch}
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(
                    f"{self.url}/v1/score", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                time.sleep(0.2 * (attempt + 1))
                continue
            if resp.status_code >= 500:
                last_exc = BackendUnavailable(f"service returned {resp.status_code}")
                time.sleep(0.2 * (attempt + 1))
                continue
            if resp.status_code != 200:
                raise BackendRejected(f"service returned {resp.status_code}: {resp.text[:200]}")
            try:
                probs = resp.json()["probs"]
            except (ValueError, KeyError) as exc:
                raise BackendRejected(f"malformed score response: {exc}") from exc
            if not isinstance(probs, list) or len(probs) != len(batch):
                raise BackendRejected(
                    f"expected {len(batch)} rows, got {len(probs) if isinstance(probs, list) else type(probs)}"
                )
            return [_coerce_triple(row) for row in probs]
        raise BackendUnavailable(f"scoring service unreachable: {last_exc}")


def _coerce_triple(row: object) -> Triple:
    if not isinstance(row, (list, tuple)) or len(row) != 3:
        raise BackendRejected(f"probability row is not a 3-vector: {row!r}")
    try:
        values = [float(x) for x in row]
    except (TypeError, ValueError) as exc:
        raise BackendRejected(f"non-numeric probability in {row!r}") from exc
    try:
        validate_distribution(values, tol=_BACKEND_SUM_TOL)
    except InvalidDistribution as exc:
        raise BackendRejected(str(exc)) from exc
    # Exact renormalization absorbs sub-1e-4 truncation from the wire.
    total = sum(values)
    return tuple(max(v, 0.0) / total for v in values)  # type: ignore[return-value]


def truncate_sentence(text: str, max_tokens: int) -> str:
    """Keep the first max_tokens whitespace-delimited tokens."""
    parts = text.split()
    if len(parts) <= max_tokens:
        return text
    return " ".join(parts[:max_tokens])


def score_document(doc: MdnaDocument, backend: ScoringBackend) -> list[SentenceScore]:
    """Score every sentence of a document, in order.

    Over-length sentences are truncated to the backend's token cap before
    scoring, not rejected.
    """
    if not doc.sentences:
        raise EmptyDocument(f"document {doc.doc_id} has no sentences")
    texts = [truncate_sentence(s.text, backend.max_sentence_tokens) for s in doc.sentences]
    triples = backend.score_sentences(texts)
    if len(triples) != len(texts):
        raise BackendRejected(
            f"backend returned {len(triples)} rows for {len(texts)} sentences"
        )
    return [
        SentenceScore(doc_id=doc.doc_id, sent_index=s.index, p=_coerce_triple(p))
        for s, p in zip(doc.sentences, triples)
    ]


# -- score cache --------------------------------------------------------------


class ScoreCache:
    """JSON-lines cache of sentence scores keyed by backend, version, and sentence.

    Scoring is the pipeline's cost center; re-scoring is skipped on cache hit.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: dict[tuple[str, str, str, int], Triple] = {}
        self.hits = 0
        self.misses = 0
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    key = (rec["backend"], rec["model_version"], rec["doc_id"], rec["sent_index"])
                    self._records[key] = (rec["p_pos"], rec["p_neg"], rec["p_neu"])

    def get_document(self, backend: ScoringBackend, doc: MdnaDocument) -> list[SentenceScore] | None:
        scores = []
        for s in doc.sentences:
            key = (backend.name, backend.model_version, doc.doc_id, s.index)
            p = self._records.get(key)
            if p is None:
                return None
            scores.append(SentenceScore(doc_id=doc.doc_id, sent_index=s.index, p=p))
        return scores

    def put_document(self, backend: ScoringBackend, scores: Iterable[SentenceScore]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            for s in scores:
                key = (backend.name, backend.model_version, s.doc_id, s.sent_index)
                if key in self._records:
                    continue
                self._records[key] = s.p
                fh.write(
                    json.dumps(
                        {
                            "doc_id": s.doc_id,
                            "sent_index": s.sent_index,
                            "backend": backend.name,
                            "model_version": backend.model_version,
                            "p_pos": s.p[0],
                            "p_neg": s.p[1],
                            "p_neu": s.p[2],
                        }
                    )
                    + "\n"
                )


def score_document_cached(
    doc: MdnaDocument, backend: ScoringBackend, cache: ScoreCache | None
) -> list[SentenceScore]:
    if cache is not None:
        hit = cache.get_document(backend, doc)
        if hit is not None:
            cache.hits += 1
            return hit
    scores = score_document(doc, backend)
    if cache is not None:
        cache.misses += 1
        cache.put_document(backend, scores)
    return scores


# -- remote training client ----------------------------------------------------


def request_remote_training(
    url: str,
    dataset_path: str | Path,
    base_model_version: str,
    epochs: int = 2,
    batch_size: int = 32,
    learning_rate: float = 5e-5,
    poll_interval: float = 1.0,
    timeout: float = 600.0,
    session: requests.Session | None = None,
) -> str:
    """Upload a pseudo-label training set and poll the job until it finishes.

    Returns the newly registered model version.
    """
    sess = session or requests.Session()
    url = url.rstrip("/")
    dataset = Path(dataset_path).read_text("utf-8")
    payload = {
        "base_model_version": base_model_version,
        "dataset": dataset,
        "epochs": epochs,
        "batch_size": batch_size,
        "learning_rate": learning_rate,
    }
    try:
        resp = sess.post(f"{url}/v1/train", json=payload, timeout=60.0)
    except requests.RequestException as exc:
        raise BackendUnavailable(f"train request failed: {exc}") from exc
    if resp.status_code != 200:
        raise BackendRejected(f"train request returned {resp.status_code}: {resp.text[:200]}")
    job_id = resp.json()["job_id"]

    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            status = sess.get(f"{url}/v1/train/{job_id}", timeout=30.0)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"train poll failed: {exc}") from exc
        if status.status_code != 200:
            raise BackendRejected(f"train poll returned {status.status_code}")
        job = status.json()
        if job["status"] == "done":
            return job["model_version"]
        if job["status"] == "failed":
            raise BackendRejected(f"training job failed: {job.get('reason', 'unknown')}")
        time.sleep(poll_interval)
    raise BackendUnavailable(f"training job {job_id} did not finish within {timeout}s")
