"""HTTP API: synchronous scoring, asynchronous training, model listing.

Endpoints:
  POST /v1/score            one probability triple per sentence, in order
  POST /v1/train            submit a fine-tuning job (409 while one runs)
  GET  /v1/train/{job_id}   poll a job
  GET  /v1/models           registered model cards

The app boots with a deterministic randomly initialized tiny transformer
("transformer-base") and, when an embedding table is configured, a
CNN-static model ("w2v-cnn-base").  Architecture defaults differ: the
transformer trains 2 epochs / batch 32, the CNN-static 60 epochs /
batch 50; explicit request fields win.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .models import (
    CLASS_ORDER,
    ModelCard,
    TRANSFORMER_MAX_TOKENS,
    W2V_CNN_MAX_TOKENS,
    build_transformer,
    build_w2v_cnn,
    score_sentences,
)
from .registry import ModelRegistry
from .tokenize import EmbeddingTable
from .training import DatasetError, TrainingManager, parse_dataset

MAX_SENTENCE_BYTES = 100 * 1024

ENV_EMBEDDINGS = "SENTIMENT_SERVICE_EMBEDDINGS"

ARCH_TRAIN_DEFAULTS = {
    "transformer": {"epochs": 2, "batch_size": 32},
    "w2v_cnn": {"epochs": 60, "batch_size": 50},
}
DEFAULT_LEARNING_RATE = 5e-5


class ScoreRequest(BaseModel):
    model_version: str
    sentences: list[str] = Field(min_length=1)


class ScoreResponse(BaseModel):
    model_version: str
    probs: list[list[float]]


class TrainRequest(BaseModel):
    base_model_version: str
    dataset: str | list = Field(description="JSON-lines text of {text, label} records")
    epochs: int | None = Field(default=None, ge=1)
    batch_size: int | None = Field(default=None, ge=1)
    learning_rate: float | None = Field(default=None, gt=0)


def create_app(embedding_path: str | None = None, seed: int = 0) -> FastAPI:
    registry = ModelRegistry()
    registry.register(
        "transformer-base",
        ModelCard(
            model_version="transformer-base",
            architecture="transformer",
            max_sentence_tokens=TRANSFORMER_MAX_TOKENS,
        ),
        build_transformer(seed=seed),
    )

    embedding_path = embedding_path or os.environ.get(ENV_EMBEDDINGS)
    w2v_available = bool(embedding_path and Path(embedding_path).exists())
    if w2v_available:
        table = EmbeddingTable.load(embedding_path)
        registry.register(
            "w2v-cnn-base",
            ModelCard(
                model_version="w2v-cnn-base",
                architecture="w2v_cnn",
                max_sentence_tokens=W2V_CNN_MAX_TOKENS,
            ),
            build_w2v_cnn(table, seed=seed),
        )

    manager = TrainingManager(registry)
    app = FastAPI(title="sentiment-service")
    app.state.registry = registry
    app.state.manager = manager

    def resolve(version: str):
        state = registry.get(version)
        if state is None:
            # The CNN-static architecture exists but cannot serve without
            # its pretrained table; distinguish that from a bad version.
            if version.startswith("w2v-cnn") and not w2v_available:
                raise HTTPException(status_code=409, detail="embedding table missing")
            raise HTTPException(status_code=404, detail=f"unknown model_version {version!r}")
        return state

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(request: ScoreRequest):
        state = resolve(request.model_version)
        for i, sentence in enumerate(request.sentences):
            if len(sentence.encode("utf-8")) > MAX_SENTENCE_BYTES:
                raise HTTPException(status_code=422, detail=f"sentence {i} exceeds {MAX_SENTENCE_BYTES} bytes")
        probs = score_sentences(state.module, request.sentences)
        return ScoreResponse(model_version=request.model_version, probs=probs)

    @app.post("/v1/train")
    def train(request: TrainRequest):
        state = resolve(request.base_model_version)
        try:
            records = parse_dataset(request.dataset)
        except DatasetError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        defaults = ARCH_TRAIN_DEFAULTS[state.card.architecture]
        try:
            job = manager.submit(
                base_model_version=request.base_model_version,
                records=records,
                epochs=request.epochs or defaults["epochs"],
                batch_size=request.batch_size or defaults["batch_size"],
                learning_rate=request.learning_rate or DEFAULT_LEARNING_RATE,
            )
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"job_id": job.job_id}

    @app.get("/v1/train/{job_id}")
    def job_status(job_id: str):
        job = manager.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job.to_dict()

    @app.get("/v1/models")
    def models():
        return {"models": [card.to_dict() for card in registry.cards()], "class_order": list(CLASS_ORDER)}

    return app


def main() -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="Run the sentiment scoring service.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8701)
    parser.add_argument("--embeddings", default=None, help="word2vec text file for the CNN-static model")
    args = parser.parse_args()
    uvicorn.run(create_app(embedding_path=args.embeddings), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
