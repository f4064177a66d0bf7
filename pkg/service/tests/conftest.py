import numpy as np
import pytest
from fastapi.testclient import TestClient

from sentiment_service.app import create_app

POSITIVE_WORDS = ["gain", "improve", "strong", "profit", "growth", "robust", "upbeat", "exceed"]
NEGATIVE_WORDS = ["loss", "decline", "weak", "default", "impair", "slump", "shortfall", "breach"]
NEUTRAL_WORDS = ["company", "quarter", "report", "segment", "market", "period", "total", "fiscal"]


def toy_sentence(rng, label, extra_pos=(), extra_neg=()):
    pools = {
        0: list(POSITIVE_WORDS) + list(extra_pos),
        1: list(NEGATIVE_WORDS) + list(extra_neg),
        2: [],
    }
    n = int(rng.integers(4, 9))
    words = []
    for _ in range(n):
        if label in (0, 1) and rng.random() < 0.55:
            words.append(str(rng.choice(pools[label])))
        else:
            words.append(str(rng.choice(NEUTRAL_WORDS)))
    return " ".join(words)


def toy_dataset(n=100, seed=0, extra_pos=(), extra_neg=()):
    """Balanced labeled sentences with a learnable token signal."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        label = i % 3
        records.append({"text": toy_sentence(rng, label, extra_pos, extra_neg), "label": label})
    return records


def to_jsonl(records):
    import json

    return "\n".join(json.dumps(r) for r in records) + "\n"


@pytest.fixture(scope="session")
def embedding_file(tmp_path_factory):
    """Small word2vec-format table covering the toy vocabulary."""
    rng = np.random.default_rng(99)
    vocab = POSITIVE_WORDS + NEGATIVE_WORDS + NEUTRAL_WORDS
    dim = 16
    path = tmp_path_factory.mktemp("emb") / "vectors.txt"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {dim}\n")
        for word in vocab:
            values = " ".join(f"{v:.5f}" for v in rng.normal(size=dim))
            fh.write(f"{word} {values}\n")
    return path


@pytest.fixture()
def client(embedding_file):
    app = create_app(embedding_path=str(embedding_file), seed=0)
    return TestClient(app)


def wait_for_job(client, job_id, timeout=120.0):
    import time

    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/v1/train/{job_id}").json()
        if job["status"] in ("done", "failed"):
            return job
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")
