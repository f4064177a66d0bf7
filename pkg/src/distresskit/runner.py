"""Pipeline orchestration: staged runs, content-keyed caching, reports.

Stages run in order extract -> tone -> score -> adapt -> features ->
evaluate, each reading the previous stage's files under the output
directory.  A stage is skipped when its content hash key (inputs plus the
config slice it depends on) matches the recorded key and its outputs still
exist; deleting any output forces exact regeneration.

Report CSVs are byte-deterministic for a given config and seed; wall-clock
detail lives only in the run manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from . import classifiers
from .adaptation import (
    AdaptationConfig,
    emit_training_set,
    filter_reliable,
    generate_pseudo_labels,
    learn_lexicon,
    read_training_set,
    write_adaptation_manifest,
)
from .corpus import MdnaDocument, extract_mdna, iter_filings, read_documents, write_documents
from .errors import DistresskitError, MissingSentiment
from .evaluation import (
    MetricReport,
    SplitPlan,
    accuracy,
    confusion_from_predictions,
    hyperparameter_sweep,
    pseudo_r2,
    rescaled_pseudo_r2,
    time_based_resample,
    univariate_ttest,
)
from .features import (
    FIN_VARIABLES,
    SENTIMENT_PAIRS,
    VARIABLE_SETS,
    assemble,
    fit_winsor_matrix,
    apply_winsor_matrix,
    read_financial_csv,
    standardize,
    to_matrix,
    write_observations_csv,
)
from .lexicon import DictTone, Lexicon, compute_dict_tone, load_lexicon
from .scoring import (
    DocumentSentiment,
    HttpScoringBackend,
    ScoreCache,
    ScoringBackend,
    StubBackend,
    aggregate_document,
    request_remote_training,
    score_document_cached,
)
from .synthetic import SyntheticSpec, generate_corpus

logger = logging.getLogger(__name__)

CLASSIFIER_NAMES = ("hazard", "knn", "svm")

ENV_BACKEND_URL = "DISTRESSKIT_BACKEND_URL"
ENV_OUT_DIR = "DISTRESSKIT_OUT"


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_index: Path
    financial_csv: Path
    lexicon_positive: Path
    lexicon_negative: Path
    out_dir: Path
    backend: str = "stub"  # "stub" or a service base URL
    model_version: str | None = None  # service model for the BERT role
    w2v_model_version: str | None = None  # service model for the W2V role
    stub_temperature: float = 1.0
    w2v_stub_temperature: float = 2.5
    variable_sets: tuple[str, ...] = ("FIN", "FIN+DICT", "FIN+DAPT")
    classifiers: tuple[str, ...] = ("hazard",)
    knn_k: int = 5
    svm_c: float = 1e-5
    sweep: bool = False
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    adapt_min_count: int = 5
    adapt_min_purity: float = 0.7
    train_epochs: int = 2
    train_batch_size: int = 32
    train_learning_rate: float = 5e-5
    split: SplitPlan = field(
        default_factory=lambda: SplitPlan(window_start=date(2018, 1, 1), window_end=date(2020, 12, 31))
    )
    rng_seed: int = 0
    synthetic: SyntheticSpec | None = None

    def __post_init__(self) -> None:
        for vs in self.variable_sets:
            if vs not in VARIABLE_SETS:
                raise ValueError(f"unknown variable set {vs!r}")
        for clf in self.classifiers:
            if clf not in CLASSIFIER_NAMES:
                raise ValueError(f"unknown classifier {clf!r}")

    @property
    def uses_service(self) -> bool:
        return self.backend != "stub"

    def sentiment_sources(self) -> tuple[str, ...]:
        return tuple(
            vs.split("+", 1)[1] for vs in self.variable_sets if vs != "FIN"
        )


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read the YAML config; relative paths resolve against the config file.

    Environment variables DISTRESSKIT_BACKEND_URL and DISTRESSKIT_OUT
    override the backend and output directory; explicit overrides win over
    both.
    """
    path = Path(path)
    raw = yaml.safe_load(path.read_text("utf-8")) or {}
    base = path.parent
    overrides = overrides or {}

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else (base / p).resolve()

    def parse_date(v):
        return v if isinstance(v, date) else date.fromisoformat(str(v))

    backend = overrides.get("backend") or os.environ.get(ENV_BACKEND_URL) or raw.get("backend", "stub")
    out_dir = overrides.get("out_dir") or os.environ.get(ENV_OUT_DIR) or raw.get("out_dir", "out")
    seed = overrides.get("rng_seed")
    if seed is None:
        seed = int(raw.get("rng_seed", 0))

    lex = raw.get("lexicon", {})
    adapt_raw = dict(raw.get("adaptation", {}))
    min_count = int(adapt_raw.pop("min_count", 5))
    min_purity = float(adapt_raw.pop("min_purity", 0.7))
    adaptation = AdaptationConfig(rng_seed=seed, **adapt_raw) if "rng_seed" not in adapt_raw else AdaptationConfig(**adapt_raw)

    split_raw = dict(raw.get("split", {}))
    split_raw["window_start"] = parse_date(split_raw["window_start"])
    split_raw["window_end"] = parse_date(split_raw["window_end"])
    split = SplitPlan(rng_seed=seed, **split_raw) if "rng_seed" not in split_raw else SplitPlan(**split_raw)

    synth = None
    if "synthetic" in raw:
        synth_raw = dict(raw["synthetic"])
        synth_raw.setdefault("rng_seed", seed)
        synth = SyntheticSpec(**synth_raw)

    train_raw = raw.get("service_training", {})

    return ExperimentConfig(
        corpus_index=resolve(raw["corpus_index"]),
        financial_csv=resolve(raw["financial_csv"]),
        lexicon_positive=resolve(lex.get("positive", raw.get("lexicon_positive"))),
        lexicon_negative=resolve(lex.get("negative", raw.get("lexicon_negative"))),
        out_dir=resolve(out_dir),
        backend=str(backend),
        model_version=raw.get("model_version"),
        w2v_model_version=raw.get("w2v_model_version"),
        stub_temperature=float(raw.get("stub_temperature", 1.0)),
        w2v_stub_temperature=float(raw.get("w2v_stub_temperature", 2.5)),
        variable_sets=tuple(raw.get("variable_sets", ("FIN", "FIN+DICT", "FIN+DAPT"))),
        classifiers=tuple(raw.get("classifiers", ("hazard",))),
        knn_k=int(raw.get("knn_k", 5)),
        svm_c=float(raw.get("svm_c", 1e-5)),
        sweep=bool(raw.get("sweep", False)),
        adaptation=adaptation,
        adapt_min_count=min_count,
        adapt_min_purity=min_purity,
        train_epochs=int(train_raw.get("epochs", 2)),
        train_batch_size=int(train_raw.get("batch_size", 32)),
        train_learning_rate=float(train_raw.get("learning_rate", 5e-5)),
        split=split,
        rng_seed=seed,
        synthetic=synth,
    )


# -- content-keyed stage cache ---------------------------------------------------


def _hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_tree(path: Path) -> str:
    if path.is_file():
        return _hash_file(path)
    digest = hashlib.sha256()
    for sub in sorted(path.rglob("*")):
        if sub.is_file():
            digest.update(sub.relative_to(path).as_posix().encode())
            digest.update(_hash_file(sub).encode())
    return digest.hexdigest()


class RunState:
    """Tracks stage keys, outputs, timings, and cache hits for one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.keys_path = self.out / "stage_keys.json"
        self.keys: dict[str, str] = {}
        if self.keys_path.exists():
            self.keys = json.loads(self.keys_path.read_text("utf-8"))
        self.timings: dict[str, float] = {}
        self.cache_hits: list[str] = []
        self.cell_errors: list[dict] = []
        self.adaptation_summary: dict = {}

    def path(self, name: str) -> Path:
        return self.out / name

    def record_cell_error(self, variable_set: str, classifier: str, exc: Exception) -> None:
        logger.error("cell (%s, %s) failed: %s", variable_set, classifier, exc)
        self.cell_errors.append(
            {
                "variable_set": variable_set,
                "classifier": classifier,
                "error": type(exc).__name__,
                "message": str(exc),
            }
        )

    def run_stage(self, name: str, key_parts: Sequence[str], outputs: Sequence[Path], fn: Callable[[], None]) -> None:
        key = hashlib.sha256("\0".join(key_parts).encode()).hexdigest()
        if self.keys.get(name) == key and all(p.exists() for p in outputs):
            logger.info("stage %s: cache hit", name)
            self.cache_hits.append(name)
            return
        started = time.perf_counter()
        fn()
        self.timings[name] = time.perf_counter() - started
        self.keys[name] = key
        self.keys_path.write_text(json.dumps(self.keys, indent=2, sort_keys=True), encoding="utf-8")


# -- stages ------------------------------------------------------------------------


def stage_synth(cfg: ExperimentConfig) -> None:
    if cfg.synthetic is None:
        raise DistresskitError("config has no synthetic section")
    target = cfg.corpus_index.parent.parent
    generate_corpus(cfg.synthetic, target)


def stage_extract(state: RunState) -> Path:
    cfg = state.cfg
    out = state.path("docs.jsonl")

    def run():
        docs = []
        failures = 0
        for filing in iter_filings(cfg.corpus_index):
            try:
                docs.append(extract_mdna(filing))
            except DistresskitError as exc:
                failures += 1
                logger.warning("extraction failed for %s: %s", filing.filing_id, exc)
        write_documents(docs, out)
        logger.info("extracted %d documents (%d failures)", len(docs), failures)

    state.run_stage("extract", ["extract", _hash_tree(cfg.corpus_index.parent)], [out], run)
    return out


def _fiscal_years(cfg: ExperimentConfig) -> dict[str, int]:
    with open(cfg.corpus_index, newline="", encoding="utf-8") as fh:
        return {row["filing_id"]: int(row["fiscal_year"]) for row in csv.DictReader(fh)}


def stage_tone(state: RunState) -> Path:
    cfg = state.cfg
    out = state.path("tones.jsonl")
    docs_path = state.path("docs.jsonl")

    def run():
        lex = load_lexicon(cfg.lexicon_positive, cfg.lexicon_negative)
        years = _fiscal_years(cfg)
        with open(out, "w", encoding="utf-8") as fh:
            for doc in read_documents(docs_path):
                tone = compute_dict_tone(doc, lex)
                fh.write(
                    json.dumps(
                        {
                            "filing_id": doc.filing_id,
                            "firm_id": doc.firm_id,
                            "fiscal_year": years[doc.filing_id],
                            "DICTPOS": tone.dict_pos,
                            "DICTNEG": tone.dict_neg,
                            "n_pos": tone.n_pos,
                            "n_neg": tone.n_neg,
                            "n_words": tone.n_words,
                        }
                    )
                    + "\n"
                )

    key = ["tone", _hash_file(docs_path), _hash_file(cfg.lexicon_positive), _hash_file(cfg.lexicon_negative)]
    state.run_stage("tone", key, [out], run)
    return out


def _base_backend(cfg: ExperimentConfig, role: str) -> ScoringBackend:
    """Backend serving one sentiment role (BERT or W2V)."""
    if cfg.uses_service:
        version = cfg.model_version if role == "BERT" else cfg.w2v_model_version
        if version is None:
            raise DistresskitError(f"no model_version configured for the {role} role")
        return HttpScoringBackend(cfg.backend, model_version=version, name=f"service-{role.lower()}")
    lex = load_lexicon(cfg.lexicon_positive, cfg.lexicon_negative)
    if role == "BERT":
        return StubBackend(lex, temperature=cfg.stub_temperature)
    # The W2V role is a coarser stub variant so the full grid runs offline.
    return StubBackend(lex, temperature=cfg.w2v_stub_temperature, name="stub-w2v")


def _write_sentiments(
    path: Path, docs: Sequence[MdnaDocument], backend: ScoringBackend,
    cache: ScoreCache, years: dict[str, int],
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            scores = score_document_cached(doc, backend, cache)
            agg = aggregate_document(scores)
            fh.write(
                json.dumps(
                    {
                        "filing_id": doc.filing_id,
                        "firm_id": doc.firm_id,
                        "fiscal_year": years[doc.filing_id],
                        "pos": agg.pos,
                        "neg": agg.neg,
                        "neu": agg.neu,
                        "n_sentences": agg.n_sentences,
                        "model_version": backend.model_version,
                    }
                )
                + "\n"
            )


def stage_score(state: RunState) -> list[Path]:
    cfg = state.cfg
    docs_path = state.path("docs.jsonl")
    outputs = []
    roles = [s for s in cfg.sentiment_sources() if s in ("BERT", "W2V")]
    for role in roles:
        out = state.path(f"sentiments_{role}.jsonl")
        outputs.append(out)

        def run(role=role, out=out):
            backend = _base_backend(cfg, role)
            docs = read_documents(docs_path)
            cache = ScoreCache(state.path("score_cache.jsonl"))
            _write_sentiments(out, docs, backend, cache, _fiscal_years(cfg))
            logger.info("scored %d documents for %s (%d cache hits)", len(docs), role, cache.hits)

        key = [
            "score", role, _hash_file(docs_path), cfg.backend,
            str(cfg.model_version), str(cfg.w2v_model_version),
            str(cfg.stub_temperature), str(cfg.w2v_stub_temperature),
            _hash_file(cfg.lexicon_positive), _hash_file(cfg.lexicon_negative),
        ]
        state.run_stage(f"score_{role}", key, [out], run)
    return outputs


def stage_adapt(state: RunState) -> Path:
    """One or more self-learning rounds producing the DAPT sentiment file."""
    cfg = state.cfg
    docs_path = state.path("docs.jsonl")
    out = state.path("sentiments_DAPT.jsonl")
    training_path = state.path("training_set.jsonl")
    manifest_path = state.path("adaptation_manifest.json")

    def run():
        docs = read_documents(docs_path)
        cache = ScoreCache(state.path("score_cache.jsonl"))
        years = _fiscal_years(cfg)
        backend = _base_backend(cfg, "BERT")

        for round_idx in range(cfg.adaptation.rounds):
            round_cfg = replace(
                cfg.adaptation, rng_seed=cfg.adaptation.rng_seed + round_idx
            )
            labels = generate_pseudo_labels(docs, backend, round_cfg, cache)
            kept = filter_reliable(labels, round_cfg.entropy_threshold)
            histogram = emit_training_set(kept, training_path, rng_seed=round_cfg.rng_seed)
            write_adaptation_manifest(
                manifest_path, round_cfg, len(labels), len(kept), histogram, backend.model_version
            )
            state.adaptation_summary = {
                "sentences_scored": len(labels),
                "sentences_retained": len(kept),
                "retained_fraction": len(kept) / len(labels) if labels else 0.0,
                "rounds": cfg.adaptation.rounds,
            }
            if cfg.uses_service:
                new_version = request_remote_training(
                    cfg.backend,
                    training_path,
                    base_model_version=backend.model_version,
                    epochs=cfg.train_epochs,
                    batch_size=cfg.train_batch_size,
                    learning_rate=cfg.train_learning_rate,
                )
                backend = HttpScoringBackend(
                    cfg.backend, model_version=new_version, name="service-dapt"
                )
            else:
                learned = learn_lexicon(
                    read_training_set(training_path),
                    backend.lexicon,
                    min_count=cfg.adapt_min_count,
                    min_purity=cfg.adapt_min_purity,
                )
                state.path("adapted_positive.txt").write_text(
                    "\n".join(sorted(learned.positive)) + "\n", encoding="utf-8"
                )
                state.path("adapted_negative.txt").write_text(
                    "\n".join(sorted(learned.negative)) + "\n", encoding="utf-8"
                )
                backend = StubBackend(
                    learned, temperature=cfg.stub_temperature, name="stub-dapt"
                )

        _write_sentiments(out, docs, backend, cache, years)

    key = [
        "adapt", _hash_file(docs_path), cfg.backend, str(cfg.model_version),
        str(cfg.stub_temperature), str(cfg.adaptation.n_documents),
        str(cfg.adaptation.entropy_threshold), str(cfg.adaptation.rng_seed),
        str(cfg.adaptation.rounds), str(cfg.adapt_min_count), str(cfg.adapt_min_purity),
        _hash_file(cfg.lexicon_positive), _hash_file(cfg.lexicon_negative),
        str(cfg.train_epochs), str(cfg.train_batch_size), str(cfg.train_learning_rate),
    ]
    state.run_stage("adapt", key, [out, training_path, manifest_path], run)
    return out


def _read_tones(path: Path) -> dict[tuple[str, int], DictTone]:
    tones = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            tones[(rec["firm_id"], rec["fiscal_year"])] = DictTone(
                dict_pos=rec["DICTPOS"], dict_neg=rec["DICTNEG"],
                n_pos=rec["n_pos"], n_neg=rec["n_neg"], n_words=rec["n_words"],
            )
    return tones


def _read_sentiments(path: Path) -> dict[tuple[str, int], DocumentSentiment]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out[(rec["firm_id"], rec["fiscal_year"])] = DocumentSentiment(
                doc_id=rec["filing_id"], pos=rec["pos"], neg=rec["neg"],
                neu=rec["neu"], n_sentences=rec["n_sentences"],
            )
    return out


def stage_features(state: RunState) -> dict[str, Path]:
    cfg = state.cfg
    records = read_financial_csv(cfg.financial_csv)
    tones = None
    sentiments: dict[str, dict] = {}
    sources = cfg.sentiment_sources()
    if "DICT" in sources:
        tones = _read_tones(state.path("tones.jsonl"))
    for role in ("BERT", "W2V", "DAPT"):
        if role in sources:
            sentiments[role] = _read_sentiments(state.path(f"sentiments_{role}.jsonl"))

    outputs = {}
    for vs in cfg.variable_sets:
        out = state.path(f"features_{vs.replace('+', '_')}.csv")

        def run(vs=vs, out=out):
            observations = assemble(records, tones, sentiments, vs)
            write_observations_csv(observations, out)

        parts = ["features", vs, _hash_file(cfg.financial_csv)]
        if vs != "FIN":
            source = vs.split("+", 1)[1]
            dep = state.path("tones.jsonl") if source == "DICT" else state.path(f"sentiments_{source}.jsonl")
            if not dep.exists():
                state.record_cell_error(vs, "*", MissingSentiment(f"no {source} scores at {dep.name}"))
                continue
            parts.append(_hash_file(dep))
        try:
            state.run_stage(f"features_{vs}", parts, [out], run)
        except DistresskitError as exc:
            # A variable set without its scores fails alone; other cells run.
            state.record_cell_error(vs, "*", exc)
            continue
        outputs[vs] = out
    return outputs


@dataclass
class CellResult:
    report: MetricReport | None
    error: str | None = None


def _evaluate_cell(
    observations, plan: SplitPlan, classifier: str, cfg: ExperimentConfig,
    variable_set: str,
) -> MetricReport:
    splits = time_based_resample(observations, plan)
    names = observations[0].feature_names
    n_fin = len(FIN_VARIABLES)

    a1s, a2s, r2s, r2s_rescaled = [], [], [], []
    sweep_result = None
    knn_k, svm_c = cfg.knn_k, cfg.svm_c

    for rep_idx, split in enumerate(splits):
        x_train, y_train = to_matrix(split.train)
        x_val, y_val = to_matrix(split.val)
        x_test, y_test = to_matrix(split.test)

        # Winsorize the financial columns with training-split bounds only.
        bounds = fit_winsor_matrix(x_train[:, :n_fin], names[:n_fin])
        for x in (x_train, x_val, x_test):
            x[:, :n_fin] = apply_winsor_matrix(x[:, :n_fin], bounds)

        x_train_std, (x_val_std, x_test_std), _ = standardize(
            x_train, [x_val, x_test], names
        )

        if cfg.sweep and rep_idx == 0 and classifier in ("knn", "svm"):
            from .evaluation import KNN_K_GRID, SVM_C_GRID

            grid = KNN_K_GRID if classifier == "knn" else SVM_C_GRID
            sweep_result = hyperparameter_sweep(
                classifier, grid, (x_train_std, y_train), (x_val_std, y_val)
            )
            if sweep_result.best_param is not None:
                if classifier == "knn":
                    knn_k = int(sweep_result.best_param)
                else:
                    svm_c = float(sweep_result.best_param)

        if classifier == "hazard":
            model = classifiers.hazard_fit(x_train_std, y_train)
            preds = classifiers.hazard_predict_batch(model, x_test_std)
            r2s.append(pseudo_r2(model.log_lik_fit, model.log_lik_null, model.n))
            r2s_rescaled.append(
                rescaled_pseudo_r2(model.log_lik_fit, model.log_lik_null, model.n)
            )
        elif classifier == "knn":
            model = classifiers.knn_fit(x_train_std, y_train, k=knn_k)
            preds = classifiers.knn_predict_batch(model, x_test_std)
        else:
            model = classifiers.svm_fit(x_train_std, y_train, c=svm_c)
            preds = classifiers.svm_predict_batch(model, x_test_std)

        a1, a2 = accuracy(confusion_from_predictions(y_test, preds))
        a1s.append(a1)
        a2s.append(a2)

    return MetricReport(
        variable_set=variable_set,
        classifier=classifier,
        a1=tuple(a1s),
        a2=tuple(a2s),
        r2=tuple(r2s),
        r2_rescaled=tuple(r2s_rescaled),
        sweep=sweep_result,
    )


def write_univariate_csv(feature_paths: dict[str, Path], out: Path) -> None:
    """Per-variable mean difference by label over the full sample.

    One row per distinct feature across the assembled variable sets, with
    the bankrupt/healthy means, their difference, the Welch t statistic,
    and significance stars.
    """
    from .errors import InsufficientData as _InsufficientData
    from .features import read_observations_csv

    columns: dict[str, tuple[list[float], list[float]]] = {}
    for vs in feature_paths:
        observations = read_observations_csv(feature_paths[vs])
        if not observations:
            continue
        # Shared columns (the financial five) repeat across variable sets;
        # take each feature from the first set that carries it.
        fresh = [n for n in observations[0].feature_names if n not in columns]
        if not fresh:
            continue
        for name in fresh:
            columns[name] = ([], [])
        for obs in observations:
            for name, value in zip(obs.feature_names, obs.values):
                if name in fresh:
                    columns[name][obs.brupt].append(value)

    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("variable", "mean_bankrupt", "mean_healthy", "difference", "t_stat", "stars")
        )
        for name, (healthy, bankrupt) in columns.items():
            try:
                row = univariate_ttest(bankrupt, healthy)
            except _InsufficientData:
                continue
            writer.writerow(
                (
                    name,
                    f"{row.mean1:.6f}",
                    f"{row.mean0:.6f}",
                    f"{row.diff:.6f}",
                    f"{row.t_stat:.4f}",
                    row.stars,
                )
            )


def stage_evaluate(state: RunState, feature_paths: dict[str, Path]) -> list[MetricReport]:
    cfg = state.cfg
    from .features import read_observations_csv

    if feature_paths:
        write_univariate_csv(feature_paths, state.path("univariate.csv"))

    reports: list[MetricReport] = []
    for vs in cfg.variable_sets:
        if vs not in feature_paths:
            continue  # already recorded as a cell error by stage_features
        observations = read_observations_csv(feature_paths[vs])
        for clf in cfg.classifiers:
            try:
                reports.append(_evaluate_cell(observations, cfg.split, clf, cfg, vs))
            except DistresskitError as exc:
                state.record_cell_error(vs, clf, exc)
    return reports


def write_report_csv(reports: Sequence[MetricReport], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("variable_set", "classifier", "r2_mean", "r2_sd", "a1_mean", "a1_sd", "a2_mean", "a2_sd")
        )
        for r in reports:
            r2_mean = f"{np.mean(r.r2):.6f}" if r.r2 else ""
            r2_sd = f"{np.std(r.r2):.6f}" if r.r2 else ""
            writer.writerow(
                (
                    r.variable_set, r.classifier, r2_mean, r2_sd,
                    f"{r.a1_mean:.6f}", f"{r.a1_sd:.6f}",
                    f"{r.a2_mean:.6f}", f"{r.a2_sd:.6f}",
                )
            )


def write_report_json(reports: Sequence[MetricReport], state: RunState, path: Path) -> None:
    payload = {
        "cells": [r.to_dict() for r in reports],
        "cell_errors": state.cell_errors,
        "adaptation": state.adaptation_summary,
        "rng_seed": state.cfg.rng_seed,
        "repetitions": state.cfg.split.repetitions,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def render_chart(reports: Sequence[MetricReport], path: Path) -> None:
    """Grouped A1/A2 bars per classifier, one group per variable set."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_classifier: dict[str, list[MetricReport]] = {}
    for r in reports:
        by_classifier.setdefault(r.classifier, []).append(r)

    n = max(len(by_classifier), 1)
    fig, axes = plt.subplots(1, n, figsize=(5 * n, 4), squeeze=False)
    for ax, (clf, rows) in zip(axes[0], sorted(by_classifier.items())):
        labels = [r.variable_set for r in rows]
        xpos = np.arange(len(rows))
        width = 0.38
        ax.bar(xpos - width / 2, [r.a1_mean for r in rows], width,
               yerr=[r.a1_sd for r in rows], capsize=3, label="A1")
        ax.bar(xpos + width / 2, [r.a2_mean for r in rows], width,
               yerr=[r.a2_sd for r in rows], capsize=3, label="A2")
        ax.set_xticks(xpos)
        ax.set_xticklabels(labels, rotation=20)
        ax.set_ylim(0, 1)
        ax.set_title(clf)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


STAGES = ("extract", "tone", "score", "adapt", "features", "evaluate")


def run(cfg: ExperimentConfig, stages: Sequence[str] | None = None) -> tuple[list[MetricReport], RunState]:
    """Execute the pipeline; cell failures are recorded, not fatal."""
    wanted = tuple(stages) if stages else STAGES
    for s in wanted:
        if s not in STAGES:
            raise ValueError(f"unknown stage {s!r}")

    state = RunState(cfg)
    started = time.perf_counter()
    sources = cfg.sentiment_sources()

    needs_docs = bool(sources) or "extract" in wanted
    if "extract" in wanted and needs_docs:
        stage_extract(state)
    if "tone" in wanted and "DICT" in sources:
        stage_tone(state)
    if "score" in wanted and any(s in sources for s in ("BERT", "W2V")):
        stage_score(state)
    if "adapt" in wanted and "DAPT" in sources:
        stage_adapt(state)

    reports: list[MetricReport] = []
    if "features" in wanted or "evaluate" in wanted:
        feature_paths = stage_features(state)
        if "evaluate" in wanted:
            reports = stage_evaluate(state, feature_paths)
            write_report_csv(reports, state.path("report.csv"))
            write_report_json(reports, state, state.path("report.json"))
            render_chart(reports, state.path("chart.svg"))

    from . import __version__

    manifest = {
        "config_hash": hashlib.sha256(
            json.dumps(_config_fingerprint(cfg), sort_keys=True).encode()
        ).hexdigest(),
        "distresskit_version": __version__,
        "backend": cfg.backend,
        "rng_seed": cfg.rng_seed,
        "stages_run": list(wanted),
        "stage_timings_s": {k: round(v, 4) for k, v in state.timings.items()},
        "cache_hits": state.cache_hits,
        "cell_errors": state.cell_errors,
        "adaptation": state.adaptation_summary,
        "total_s": round(time.perf_counter() - started, 4),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    state.path("manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return reports, state


def _config_fingerprint(cfg: ExperimentConfig) -> dict:
    return {
        "backend": cfg.backend,
        "variable_sets": list(cfg.variable_sets),
        "classifiers": list(cfg.classifiers),
        "knn_k": cfg.knn_k,
        "svm_c": cfg.svm_c,
        "sweep": cfg.sweep,
        "rng_seed": cfg.rng_seed,
        "split": {
            "window_start": cfg.split.window_start.isoformat(),
            "window_end": cfg.split.window_end.isoformat(),
            "n_bankrupt_test": cfg.split.n_bankrupt_test,
            "repetitions": cfg.split.repetitions,
        },
        "adaptation": {
            "n_documents": cfg.adaptation.n_documents,
            "entropy_threshold": cfg.adaptation.entropy_threshold,
            "rounds": cfg.adaptation.rounds,
        },
    }
