"""Append-only model registry.

Versions are immutable: once registered, a model's weights and card never
change, so score caches keyed by model_version on the client side stay
valid forever.  Training registers a new version derived from its base.
"""

from __future__ import annotations

import itertools
import threading

from torch import nn

from .models import ModelCard, ScorerState


class ModelRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._models: dict[str, ScorerState] = {}
        self._counter = itertools.count(1)

    def register(self, version: str, card: ModelCard, module: nn.Module) -> None:
        with self._lock:
            if version in self._models:
                raise ValueError(f"model version {version!r} already registered")
            self._models[version] = ScorerState(card=card, module=module)

    def register_derived(self, base: ModelCard, module: nn.Module) -> str:
        with self._lock:
            version = f"{base.architecture}-ft-{next(self._counter):04d}"
            card = ModelCard(
                model_version=version,
                architecture=base.architecture,
                max_sentence_tokens=base.max_sentence_tokens,
                base_version=base.model_version,
            )
            self._models[version] = ScorerState(card=card, module=module)
            return version

    def get(self, version: str) -> ScorerState | None:
        with self._lock:
            return self._models.get(version)

    def cards(self) -> list[ModelCard]:
        with self._lock:
            return [state.card for state in self._models.values()]
