"""Self-learning round: pseudo-labels, self-entropy filtering, training sets.

The pipeline samples documents, scores every sentence with the current
backend, keeps only the sentences whose normalized self-entropy is at or
below the threshold (low entropy = high confidence), and emits the
survivors as a supervised {text, label} training set.

For the offline stub backend the training step is ``learn_lexicon``, which
re-estimates the word lists from the filtered pseudo-labels; an external
service instead consumes the emitted file through its train endpoint.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import MdnaDocument, Sentence, tokenize_words
from .errors import CorpusTooSmall, EmptyTrainingSet, InvalidDistribution, IoFailure
from .lexicon import Lexicon
from .scoring import ScoreCache, ScoringBackend, SentenceScore, score_document_cached

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdaptationConfig:
    n_documents: int = 1200
    entropy_threshold: float = 0.2
    n_classes: int = 3
    rng_seed: int = 0
    rounds: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.entropy_threshold <= 1:
            raise ValueError("entropy_threshold must be in (0, 1]")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.n_documents < 1:
            raise ValueError("n_documents must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass(frozen=True)
class PseudoLabel:
    sentence: Sentence
    label: int
    score: SentenceScore
    self_entropy: float


def self_entropy(p: Sequence[float], tol: float = 1e-6) -> float:
    """Shannon entropy of a class distribution, scaled into [0, 1] by log M.

    Natural log; the 0 * log 0 terms are taken as 0.  Works for any number
    of classes M >= 2.
    """
    if len(p) < 2:
        raise InvalidDistribution(f"need at least 2 classes, got {len(p)}")
    if any(x < -tol for x in p):
        raise InvalidDistribution(f"negative component in {p}")
    total = sum(p)
    if abs(total - 1.0) > tol:
        raise InvalidDistribution(f"components sum to {total}, not 1")
    h = 0.0
    for x in p:
        if x > 0:
            h -= x * math.log(x)
    h /= math.log(len(p))
    return min(max(h, 0.0), 1.0)


def generate_pseudo_labels(
    corpus: Sequence[MdnaDocument],
    backend: ScoringBackend,
    config: AdaptationConfig,
    cache: ScoreCache | None = None,
) -> list[PseudoLabel]:
    """Sample documents without replacement and pseudo-label every sentence.

    The label is the argmax class of the backend's probability triple, ties
    broken toward the lowest class index.
    """
    if len(corpus) < config.n_documents:
        raise CorpusTooSmall(
            f"corpus has {len(corpus)} documents, config wants {config.n_documents}"
        )
    rng = np.random.default_rng(config.rng_seed)
    chosen = rng.choice(len(corpus), size=config.n_documents, replace=False)

    labels: list[PseudoLabel] = []
    for idx in chosen:
        doc = corpus[int(idx)]
        for sentence, score in zip(doc.sentences, score_document_cached(doc, backend, cache)):
            label = int(np.argmax(score.p))
            labels.append(
                PseudoLabel(
                    sentence=sentence,
                    label=label,
                    score=score,
                    self_entropy=self_entropy(score.p),
                )
            )
    return labels


def filter_reliable(labels: Sequence[PseudoLabel], threshold: float) -> list[PseudoLabel]:
    """Keep pseudo-labels with self-entropy <= threshold, order preserved."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    kept = [lab for lab in labels if lab.self_entropy <= threshold]
    if labels:
        logger.info(
            "self-entropy filter at %.3f retained %d / %d sentences (%.2f%%)",
            threshold, len(kept), len(labels), 100.0 * len(kept) / len(labels),
        )
    return kept


def emit_training_set(
    labels: Sequence[PseudoLabel], path: str | Path, rng_seed: int = 0
) -> dict[int, int]:
    """Write {text, label} JSON lines, shuffled; returns the class histogram."""
    if not labels:
        raise EmptyTrainingSet("no pseudo-labels to emit")
    order = np.random.default_rng(rng_seed).permutation(len(labels))
    histogram = Counter(lab.label for lab in labels)
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for i in order:
                lab = labels[int(i)]
                fh.write(json.dumps({"text": lab.sentence.text, "label": lab.label}) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write training set to {path}: {exc}") from exc
    return {c: histogram.get(c, 0) for c in range(3)}


def write_adaptation_manifest(
    path: str | Path,
    config: AdaptationConfig,
    n_scored: int,
    n_retained: int,
    histogram: dict[int, int],
    model_version: str,
) -> None:
    """Run manifest recorded next to the emitted training set."""
    manifest = {
        "n_documents": config.n_documents,
        "entropy_threshold": config.entropy_threshold,
        "n_classes": config.n_classes,
        "rng_seed": config.rng_seed,
        "rounds": config.rounds,
        "backend_model_version": model_version,
        "sentences_scored": n_scored,
        "sentences_retained": n_retained,
        "retained_fraction": (n_retained / n_scored) if n_scored else 0.0,
        "class_histogram": {str(k): v for k, v in sorted(histogram.items())},
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def read_training_set(path: str | Path) -> list[tuple[str, int]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            records.append((rec["text"], int(rec["label"])))
    return records


def learn_lexicon(
    records: Iterable[tuple[str, int]],
    base: Lexicon,
    min_count: int = 5,
    min_purity: float = 0.7,
) -> Lexicon:
    """Fit enlarged word lists from a pseudo-label training set.

    This is the training step of the self-learning round for the stub
    backend: a token seen at least ``min_count`` times whose occurrences sit
    in one polarity class with frequency >= ``min_purity`` joins that list.
    Base entries are kept and win any conflict.
    """
    per_class: dict[str, Counter] = defaultdict(Counter)
    for text, label in records:
        for token in tokenize_words(text):
            per_class[token][label] += 1

    positive = set(base.positive)
    negative = set(base.negative)
    for token in sorted(per_class):
        if token in base.positive or token in base.negative:
            continue
        counts = per_class[token]
        total = sum(counts.values())
        if total < min_count:
            continue
        if counts[0] / total >= min_purity:
            positive.add(token)
        elif counts[1] / total >= min_purity:
            negative.add(token)
    return Lexicon(frozenset(positive), frozenset(negative))
