"""The two scorer architectures behind the service.

Class order is fixed and immutable across versions: index 0 = positive,
1 = negative, 2 = neutral.  Primary-side caches key on model_version, so a
version's outputs must never change; training always registers a new one.

The transformer is deliberately tiny (hash-bucket embeddings, two encoder
layers) so CI can exercise /train and /score without downloading weights;
swapping in a larger pretrained encoder only changes this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .tokenize import PAD_ID, EmbeddingTable, hash_token_ids

CLASS_ORDER = ("positive", "negative", "neutral")
N_CLASSES = 3

TRANSFORMER_MAX_TOKENS = 512
W2V_CNN_MAX_TOKENS = 50


@dataclass(frozen=True)
class ModelCard:
    model_version: str
    architecture: str  # "transformer" | "w2v_cnn"
    max_sentence_tokens: int
    base_version: str | None = None
    class_order: tuple[str, ...] = CLASS_ORDER

    def to_dict(self) -> dict:
        return {
            "model_version": self.model_version,
            "architecture": self.architecture,
            "max_sentence_tokens": self.max_sentence_tokens,
            "base_version": self.base_version,
            "class_order": list(self.class_order),
        }


class TinyTransformerClassifier(nn.Module):
    """Hash-embedding transformer encoder with a mean-pooled 3-class head."""

    architecture = "transformer"
    max_sentence_tokens = TRANSFORMER_MAX_TOKENS

    def __init__(self, vocab_size: int = 4096, dim: int = 48, heads: int = 4,
                 layers: int = 2, ff_dim: int = 96, dropout: float = 0.1):
        super().__init__()
        self.vocab_size = vocab_size
        self.embed = nn.Embedding(vocab_size, dim, padding_idx=PAD_ID)
        self.position = nn.Embedding(TRANSFORMER_MAX_TOKENS, dim)
        encoder_layer = nn.TransformerEncoderLayer(
            d_model=dim, nhead=heads, dim_feedforward=ff_dim,
            dropout=dropout, batch_first=True,
        )
        # The nested-tensor fast path makes padding arithmetic depend on
        # batch composition; keep per-sentence outputs batch-invariant.
        self.encoder = nn.TransformerEncoder(
            encoder_layer, num_layers=layers, enable_nested_tensor=False
        )
        self.head = nn.Linear(dim, N_CLASSES)

    def encode_batch(self, sentences: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        ids = [hash_token_ids(s, self.vocab_size, self.max_sentence_tokens) or [PAD_ID] for s in sentences]
        width = max(len(row) for row in ids)
        batch = torch.full((len(ids), width), PAD_ID, dtype=torch.long)
        for i, row in enumerate(ids):
            batch[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        mask = batch == PAD_ID
        return batch, mask

    def forward(self, batch: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(batch.shape[1], device=batch.device)
        hidden = self.embed(batch) + self.position(positions)[None, :, :]
        hidden = self.encoder(hidden, src_key_padding_mask=mask)
        keep = (~mask).float().unsqueeze(-1)
        denom = keep.sum(dim=1).clamp(min=1.0)
        pooled = (hidden * keep).sum(dim=1) / denom
        return self.head(pooled)


class W2vCnnClassifier(nn.Module):
    """CNN-static: frozen pretrained embeddings under a single conv layer.

    The convolution filters span the full embedding dimension and slide
    over 3-word windows; global max pooling feeds the 3-class output.
    Sentences are padded/truncated to 50 words, OOV words hit the zero row.
    """

    architecture = "w2v_cnn"
    max_sentence_tokens = W2V_CNN_MAX_TOKENS

    def __init__(self, table: EmbeddingTable, filters: int = 32, window: int = 3):
        super().__init__()
        self.table = table
        weights = torch.from_numpy(table.vectors)
        self.embed = nn.Embedding.from_pretrained(weights, freeze=True, padding_idx=0)
        self.conv = nn.Conv1d(table.dim, filters, kernel_size=window, padding=window // 2)
        self.head = nn.Linear(filters, N_CLASSES)

    def encode_batch(self, sentences: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        batch = torch.zeros((len(sentences), self.max_sentence_tokens), dtype=torch.long)
        for i, s in enumerate(sentences):
            row = self.table.lookup(s, self.max_sentence_tokens)
            if row:
                batch[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        mask = batch == 0
        return batch, mask

    def forward(self, batch: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        hidden = self.embed(batch).transpose(1, 2)  # (n, dim, time)
        feature = torch.relu(self.conv(hidden)).max(dim=2).values
        return self.head(feature)


@dataclass
class ScorerState:
    card: ModelCard
    module: nn.Module


def score_sentences(module: nn.Module, sentences: list[str]) -> list[list[float]]:
    """Deterministic probabilities: eval mode, no dropout, no grad."""
    module.eval()
    with torch.no_grad():
        batch, mask = module.encode_batch(sentences)
        probs = torch.softmax(module(batch, mask), dim=1)
    return probs.double().tolist()


def build_transformer(seed: int = 0) -> TinyTransformerClassifier:
    generator_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        return TinyTransformerClassifier()
    finally:
        torch.random.set_rng_state(generator_state)


def build_w2v_cnn(table: EmbeddingTable, seed: int = 0) -> W2vCnnClassifier:
    generator_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        return W2vCnnClassifier(table)
    finally:
        torch.random.set_rng_state(generator_state)


def clone_module(module: nn.Module) -> nn.Module:
    """Fresh instance with copied weights (training never mutates a version)."""
    if isinstance(module, TinyTransformerClassifier):
        twin = TinyTransformerClassifier(vocab_size=module.vocab_size)
    elif isinstance(module, W2vCnnClassifier):
        twin = W2vCnnClassifier(module.table)
    else:
        raise TypeError(f"unknown module type {type(module)!r}")
    twin.load_state_dict(module.state_dict())
    return twin
