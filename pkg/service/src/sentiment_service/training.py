"""Fine-tuning jobs: cross-entropy loss, Adam, one job at a time.

Training is asynchronous (clients poll the job id) and never mutates the
base model: the job clones the weights, trains the clone, and registers the
result as a new version.  The full per-step loss curve stays on the job
record.  Terminal job states are immutable.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import uuid
from dataclasses import dataclass, field

import torch
from torch import nn

from .models import clone_module, score_sentences
from .registry import ModelRegistry


class DatasetError(ValueError):
    """The uploaded dataset does not match the {text, label} JSONL contract."""


def parse_dataset(payload: str | list) -> list[tuple[str, int]]:
    """Accept JSON-lines text (the emitted training-set format) or a list."""
    records: list[tuple[str, int]] = []
    if isinstance(payload, str):
        rows = []
        for lineno, line in enumerate(payload.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc})") from exc
    elif isinstance(payload, list):
        rows = payload
    else:
        raise DatasetError(f"dataset must be JSONL text or a list, got {type(payload).__name__}")

    for i, row in enumerate(rows):
        if not isinstance(row, dict) or "text" not in row or "label" not in row:
            raise DatasetError(f"record {i}: expected an object with text and label")
        text, label = row["text"], row["label"]
        if not isinstance(text, str) or not text.strip():
            raise DatasetError(f"record {i}: text must be a nonempty string")
        if not isinstance(label, int) or label not in (0, 1, 2):
            raise DatasetError(f"record {i}: label must be 0, 1, or 2")
        records.append((text, label))
    if not records:
        raise DatasetError("dataset is empty")
    return records


@dataclass
class TrainJob:
    job_id: str
    base_model_version: str
    n_examples: int
    epochs: int
    batch_size: int
    learning_rate: float
    status: str = "pending"  # pending | running | done | failed
    model_version: str | None = None
    reason: str | None = None
    loss_curve: list[float] = field(default_factory=list)
    epoch_mean_loss: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "base_model_version": self.base_model_version,
            "n_examples": self.n_examples,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "status": self.status,
            "model_version": self.model_version,
            "reason": self.reason,
            "loss_curve": list(self.loss_curve),
            "epoch_mean_loss": list(self.epoch_mean_loss),
        }


def train_module(
    module: nn.Module,
    records: list[tuple[str, int]],
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
    job: TrainJob | None = None,
) -> nn.Module:
    """Cross-entropy + Adam fine-tuning; returns the trained module."""
    generator = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)  # dropout streams
    module.train()
    optimizer = torch.optim.Adam(
        [p for p in module.parameters() if p.requires_grad], lr=learning_rate
    )
    loss_fn = nn.CrossEntropyLoss()
    labels = torch.tensor([label for _, label in records], dtype=torch.long)
    texts = [text for text, _ in records]

    for epoch in range(epochs):
        order = torch.randperm(len(records), generator=generator)
        epoch_losses = []
        for start in range(0, len(records), batch_size):
            idx = order[start : start + batch_size]
            batch, mask = module.encode_batch([texts[i] for i in idx])
            optimizer.zero_grad()
            loss = loss_fn(module(batch, mask), labels[idx])
            loss.backward()
            optimizer.step()
            value = float(loss.item())
            if not math.isfinite(value):
                raise RuntimeError(f"loss diverged at epoch {epoch}: {value}")
            epoch_losses.append(value)
            if job is not None:
                job.loss_curve.append(value)
        if job is not None:
            job.epoch_mean_loss.append(sum(epoch_losses) / len(epoch_losses))
    module.eval()
    return module


class TrainingManager:
    """Runs at most one job at a time; terminal job states never change."""

    def __init__(self, registry: ModelRegistry):
        self.registry = registry
        self._lock = threading.Lock()
        self._jobs: dict[str, TrainJob] = {}
        self._active: str | None = None

    def get(self, job_id: str) -> TrainJob | None:
        with self._lock:
            return self._jobs.get(job_id)

    def submit(
        self,
        base_model_version: str,
        records: list[tuple[str, int]],
        epochs: int,
        batch_size: int,
        learning_rate: float,
    ) -> TrainJob:
        base = self.registry.get(base_model_version)
        if base is None:
            raise KeyError(base_model_version)
        with self._lock:
            if self._active is not None and self._jobs[self._active].status in ("pending", "running"):
                raise RuntimeError("a training job is already running")
            job = TrainJob(
                job_id=uuid.uuid4().hex[:12],
                base_model_version=base_model_version,
                n_examples=len(records),
                epochs=epochs,
                batch_size=batch_size,
                learning_rate=learning_rate,
            )
            self._jobs[job.job_id] = job
            self._active = job.job_id

        # Content-derived seed: identical train requests produce identical
        # weights regardless of submission order.
        fingerprint = hashlib.sha256(
            f"{base_model_version}|{epochs}|{batch_size}|{learning_rate!r}|".encode()
            + hashlib.sha256(
                "\n".join(f"{t}\0{l}" for t, l in records).encode()
            ).digest()
        ).digest()
        seed = int.from_bytes(fingerprint[:4], "big")

        thread = threading.Thread(
            target=self._run, args=(job, base, records, seed), daemon=True
        )
        thread.start()
        return job

    def _run(self, job: TrainJob, base, records, seed) -> None:
        job.status = "running"
        try:
            module = clone_module(base.module)
            train_module(
                module,
                records,
                epochs=job.epochs,
                batch_size=job.batch_size,
                learning_rate=job.learning_rate,
                seed=seed,
                job=job,
            )
            job.model_version = self.registry.register_derived(base.card, module)
            job.status = "done"
        except Exception as exc:
            job.reason = f"{type(exc).__name__}: {exc}"
            job.status = "failed"
        finally:
            with self._lock:
                if self._active == job.job_id:
                    self._active = None
