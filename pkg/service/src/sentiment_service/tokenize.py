"""Deterministic tokenization and embedding-table loading.

The transformer uses hash-bucket token ids so no vocabulary file is needed
and ids are stable across processes (Python's builtin hash is salted, so
md5 is used instead).  The CNN-static architecture reads a word2vec-style
text embedding table; out-of-vocabulary words map to a zero row.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

_TOKEN_RE = re.compile(r"[a-z']+|[0-9]+")

PAD_ID = 0


def words(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def hash_token_ids(text: str, vocab_size: int, max_tokens: int) -> list[int]:
    """Stable bucket ids in [1, vocab_size); 0 is reserved for padding."""
    ids = []
    for token in words(text)[:max_tokens]:
        digest = hashlib.md5(token.encode("utf-8")).digest()
        ids.append(1 + int.from_bytes(digest[:8], "big") % (vocab_size - 1))
    return ids


class EmbeddingTable:
    """Frozen word vectors from a word2vec text file (optional count header)."""

    def __init__(self, vocab: dict[str, int], vectors: np.ndarray):
        self.vocab = vocab
        self.vectors = vectors  # row 0 is the all-zero OOV/padding row

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def lookup(self, text: str, max_tokens: int) -> list[int]:
        """Row indices, zero row for out-of-vocabulary words."""
        return [self.vocab.get(w, 0) for w in words(text)[:max_tokens]]

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        rows: list[list[float]] = []
        vocab: dict[str, int] = {}
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().split()
            header = len(first) == 2 and all(p.isdigit() for p in first)
            if not header and first:
                vocab[first[0].lower()] = len(rows) + 1
                rows.append([float(x) for x in first[1:]])
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                word = parts[0].lower()
                if word in vocab:
                    continue
                vocab[word] = len(rows) + 1
                rows.append([float(x) for x in parts[1:]])
        if not rows:
            raise ValueError(f"embedding table {path} is empty")
        dim = len(rows[0])
        if any(len(r) != dim for r in rows):
            raise ValueError(f"embedding table {path} has inconsistent dimensions")
        vectors = np.vstack([np.zeros((1, dim)), np.array(rows, dtype=np.float32)])
        return cls(vocab, vectors.astype(np.float32))
