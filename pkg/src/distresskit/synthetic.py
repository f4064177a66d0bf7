"""Synthetic filing corpus with planted distress signal.

Substitutes for the proprietary filing/fundamentals data so the pipeline is
verifiable at desk scale.  The generative story, also recorded in the
emitted manifest:

* Each firm-year draws two independent latent factors, z_fin and z_text.
* Bankruptcy: BRUPT ~ Bernoulli(sigmoid(a + w_f z_fin + w_t z_text)), with
  the intercept a calibrated by bisection so the sample rate matches the
  spec's base rate.  Bankrupt firm-years receive a bankruptcy date within
  365 days of the filing date; a small share of healthy firm-years get a
  later date to exercise the labeling boundary.
* Financials: v = mean_v + dir_v * fin_effect * z_fin + scale_v * noise,
  with directions matching the usual pre-bankruptcy signs (distressed
  firms: lower WC/RE/EBIT/MVE, higher SALE) and occasional 10x noise
  outliers so winsorization matters.
* Text: each sentence picks a polarity from
  softmax((-text_effect * z_text, +text_effect * z_text, neutral_bias));
  polar sentences mix tokens from their polarity pool at signal_token_rate
  with neutral filler.  The emitted base lexicon covers only a fraction of
  each pool, which is exactly the headroom a self-learning round can
  recover.

Filing bodies wrap the text in a 10-K skeleton with a table-of-contents
decoy heading, a numeric table, and page-number lines, so extraction and
cleaning are exercised end to end.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

POSITIVE_BANK = (
    "ACCELERATED", "ADVANTAGE", "ATTRACTIVE", "BENEFITED", "CONFIDENT",
    "DELIVERED", "DURABLE", "EFFICIENT", "ENHANCED", "EXCEEDED", "EXPANDING",
    "FAVORABLE", "FLOURISHING", "GAINED", "GROWING", "HEALTHY", "IMPROVED",
    "INNOVATIVE", "MOMENTUM", "OPTIMISTIC", "OUTPERFORMED", "PROFITABLE",
    "PROMISING", "PROSPERED", "REBOUNDED", "RESILIENT", "REWARDING", "ROBUST",
    "SOLID", "STRENGTHENED", "STRONGER", "SUCCESSFUL", "SUSTAINABLE",
    "THRIVING", "UPBEAT", "VIBRANT", "WINNING", "ADVANCED", "BOOSTED", "RECORD",
)

NEGATIVE_BANK = (
    "ARREARS", "BREACH", "CLOSURE", "CONTRACTION", "CURTAILED", "DEFICIT",
    "DELINQUENT", "DETERIORATED", "DILUTION", "DISTRESS", "DOWNTURN",
    "EROSION", "FORECLOSURE", "HALTED", "IMPAIRED", "INSOLVENCY", "LAYOFFS",
    "LIQUIDATION", "OVERDUE", "PENALTIES", "RESTRUCTURING", "SHORTFALL",
    "SLOWDOWN", "SLUMPED", "STRAINED", "STRUGGLING", "SUSPENDED",
    "TERMINATION", "UNDERPERFORMED", "UNPROFITABLE", "VIOLATION", "WEAKENED",
    "WORSENED", "WRITEDOWN", "WRITEOFF", "DEFAULTED", "DISTRESSED", "LOSSES",
    "PLUNGED", "TROUBLED",
)

NEUTRAL_BANK = (
    "accordance", "activities", "administrative", "agreements", "amounts",
    "annual", "assets", "balance", "board", "business", "capital", "cash",
    "changes", "company", "compared", "conditions", "continuing", "contracts",
    "costs", "current", "customers", "datacenter", "December", "development",
    "directors", "distribution", "during", "employees", "equipment", "equity",
    "expenses", "facilities", "fiscal", "following", "general", "include",
    "income", "increase", "interest", "inventory", "investments", "liabilities",
    "management", "market", "marketing", "operations", "payable", "period",
    "plans", "price", "primarily", "products", "property", "quarter", "rate",
    "receivable", "related", "report", "research", "respectively", "results",
    "revenue", "sales", "securities", "segment", "selling", "services",
    "shares", "statements", "strategy", "supply", "taxes", "technology",
    "total", "vendors", "year",
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_firms: int = 400
    start_year: int = 2015
    end_year: int = 2019
    base_rate: float = 0.25
    fin_effect: float = 0.6
    text_effect: float = 1.5
    brupt_fin_weight: float = 1.2
    brupt_text_weight: float = 1.6
    neutral_bias: float = 0.8
    signal_token_rate: float = 0.4
    pool_size: int = 30
    lexicon_coverage: float = 0.25
    sentences_low: int = 8
    sentences_high: int = 18
    tokens_low: int = 6
    tokens_high: int = 14
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.base_rate < 1:
            raise ValueError("base_rate must be in (0, 1)")
        if not 0 < self.lexicon_coverage <= 1:
            raise ValueError("lexicon_coverage must be in (0, 1]")
        if self.pool_size > min(len(POSITIVE_BANK), len(NEGATIVE_BANK)):
            raise ValueError("pool_size exceeds the word banks")
        if self.start_year > self.end_year:
            raise ValueError("start_year after end_year")
        for name in ("fin_effect", "text_effect", "brupt_fin_weight", "brupt_text_weight"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


_FIN_MEANS = {"wc": 0.2, "re": 0.0, "ebit": 0.4, "mve": 5.0, "sale": 1.0}
_FIN_SCALES = {"wc": 1.0, "re": 1.0, "ebit": 1.0, "mve": 3.0, "sale": 0.5}
_FIN_DIRECTIONS = {"wc": -1.0, "re": -1.0, "ebit": -1.0, "mve": -1.0, "sale": 0.3}
_OUTLIER_RATE = 0.01


def _calibrate_intercept(signal: np.ndarray, base_rate: float) -> float:
    lo, hi = -30.0, 30.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if np.mean(1.0 / (1.0 + np.exp(-(mid + signal)))) < base_rate:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def generate_corpus(spec: SyntheticSpec, out_dir: str | Path) -> dict:
    """Write filings, index, financial CSV, base lexicon, and manifest.

    Returns the manifest dictionary.  Byte-identical output for an
    identical spec.
    """
    out_dir = Path(out_dir)
    filings_dir = out_dir / "filings"
    filings_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(spec.rng_seed)
    pos_pool = sorted(rng.choice(POSITIVE_BANK, size=spec.pool_size, replace=False))
    neg_pool = sorted(rng.choice(NEGATIVE_BANK, size=spec.pool_size, replace=False))
    n_known = max(1, round(spec.lexicon_coverage * spec.pool_size))
    known_pos = sorted(rng.choice(pos_pool, size=n_known, replace=False))
    known_neg = sorted(rng.choice(neg_pool, size=n_known, replace=False))

    years = list(range(spec.start_year, spec.end_year + 1))
    n_obs = spec.n_firms * len(years)
    z_fin = rng.standard_normal(n_obs)
    z_text = rng.standard_normal(n_obs)
    signal = spec.brupt_fin_weight * z_fin + spec.brupt_text_weight * z_text
    intercept = _calibrate_intercept(signal, spec.base_rate)
    brupt = rng.random(n_obs) < 1.0 / (1.0 + np.exp(-(intercept + signal)))

    index_rows = []
    financial_rows = []
    obs_idx = 0
    for firm in range(spec.n_firms):
        firm_id = f"F{firm:04d}"
        for year in years:
            filing_id = f"{firm_id}-{year}"
            filing_date = date(year + 1, 3, 15) + timedelta(days=int(rng.integers(-20, 21)))

            if brupt[obs_idx]:
                bankruptcy_date = filing_date + timedelta(days=int(rng.integers(30, 331)))
            elif rng.random() < 0.04:
                bankruptcy_date = filing_date + timedelta(days=int(rng.integers(400, 901)))
            else:
                bankruptcy_date = None

            ratios = {}
            for name in ("wc", "re", "ebit", "mve", "sale"):
                noise = rng.standard_normal()
                if rng.random() < _OUTLIER_RATE:
                    noise *= 10.0
                ratios[name] = (
                    _FIN_MEANS[name]
                    + _FIN_DIRECTIONS[name] * spec.fin_effect * z_fin[obs_idx]
                    + _FIN_SCALES[name] * noise
                )

            body = _render_filing(
                rng, spec, z_text[obs_idx], pos_pool, neg_pool, filing_id, year
            )
            rel_path = f"{filing_id}.txt"
            (filings_dir / rel_path).write_text(body, encoding="utf-8")

            index_rows.append(
                (filing_id, firm_id, year, filing_date.isoformat(), "10-K", rel_path)
            )
            financial_rows.append(
                (
                    firm_id, year, filing_date.isoformat(),
                    f"{ratios['wc']:.6f}", f"{ratios['re']:.6f}", f"{ratios['ebit']:.6f}",
                    f"{ratios['mve']:.6f}", f"{ratios['sale']:.6f}",
                    bankruptcy_date.isoformat() if bankruptcy_date else "",
                )
            )
            obs_idx += 1

    with open(filings_dir / "index.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("filing_id", "firm_id", "fiscal_year", "filing_date", "form_type", "path"))
        writer.writerows(index_rows)

    with open(out_dir / "financials.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("firm_id", "fiscal_year", "filing_date", "wc", "re", "ebit", "mve", "sale", "bankruptcy_date")
        )
        writer.writerows(financial_rows)

    (out_dir / "lexicon_positive.txt").write_text("\n".join(known_pos) + "\n", encoding="utf-8")
    (out_dir / "lexicon_negative.txt").write_text("\n".join(known_neg) + "\n", encoding="utf-8")

    manifest = {
        "spec": asdict(spec),
        "generative_model": {
            "latents": "z_fin, z_text ~ iid N(0,1) per firm-year",
            "bankruptcy": "BRUPT ~ Bernoulli(sigmoid(a + w_f*z_fin + w_t*z_text)); "
            "bankruptcy_date = filing_date + U{30..330} days when BRUPT, "
            "U{400..900} days for 4% of healthy firm-years",
            "intercept_a": intercept,
            "financials": "v = mean_v + dir_v*fin_effect*z_fin + scale_v*noise, "
            "noise ~ N(0,1) with 1% chance of 10x outliers",
            "fin_means": _FIN_MEANS,
            "fin_scales": _FIN_SCALES,
            "fin_directions": _FIN_DIRECTIONS,
            "text": "sentence polarity ~ softmax((-text_effect*z_text, "
            "+text_effect*z_text, neutral_bias)); polar sentences draw pool "
            "tokens at signal_token_rate, else neutral filler",
        },
        "pools": {"positive": list(pos_pool), "negative": list(neg_pool)},
        "base_lexicon": {"positive": list(known_pos), "negative": list(known_neg)},
        "counts": {
            "filings": len(index_rows),
            "bankrupt": int(brupt.sum()),
            "bankrupt_rate": float(brupt.mean()),
        },
        "paths": {
            "corpus_index": "filings/index.csv",
            "financial_csv": "financials.csv",
            "lexicon_positive": "lexicon_positive.txt",
            "lexicon_negative": "lexicon_negative.txt",
        },
    }
    (out_dir / "synth_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _render_sentence(rng, spec: SyntheticSpec, polarity: int, pos_pool, neg_pool) -> str:
    n_tokens = int(rng.integers(spec.tokens_low, spec.tokens_high + 1))
    words = []
    for _ in range(n_tokens):
        if polarity in (0, 1) and rng.random() < spec.signal_token_rate:
            pool = pos_pool if polarity == 0 else neg_pool
            words.append(str(rng.choice(pool)).lower())
        else:
            words.append(str(rng.choice(NEUTRAL_BANK)).lower())
    sentence = " ".join(words)
    return sentence[0].upper() + sentence[1:] + "."


def _render_filing(rng, spec: SyntheticSpec, z_text: float, pos_pool, neg_pool, filing_id: str, year: int) -> str:
    polarity_logits = np.array(
        [-spec.text_effect * z_text, spec.text_effect * z_text, spec.neutral_bias]
    )
    polarity_probs = _softmax(polarity_logits)
    n_sentences = int(rng.integers(spec.sentences_low, spec.sentences_high + 1))
    sentences = [
        _render_sentence(rng, spec, int(rng.choice(3, p=polarity_probs)), pos_pool, neg_pool)
        for _ in range(n_sentences)
    ]

    paragraphs = []
    for start in range(0, len(sentences), 4):
        paragraphs.append(" ".join(sentences[start : start + 4]))
    mdna = "\n\n".join(paragraphs)

    revenue = 40000 + int(rng.integers(0, 60000))
    table = (
        f"                      {year}        {year - 1}        {year - 2}\n"
        f"Revenues            {revenue:,}      {int(revenue * 0.9):,}      {int(revenue * 0.8):,}\n"
        f"Net income           {int(revenue * 0.08):,}       {int(revenue * 0.07):,}       {int(revenue * 0.05):,}"
    )

    return (
        f"SECURITIES AND EXCHANGE COMMISSION\n\nFORM 10-K ANNUAL REPORT\n\n"
        f"Registrant: {filing_id}\n\n"
        "TABLE OF CONTENTS\n\n"
        "Item 1. Business                                                   2\n"
        "Item 7. Management's Discussion and Analysis                       5\n"
        "Item 8. Financial Statements and Supplementary Data               12\n\n"
        "ITEM 1. BUSINESS\n\n"
        "The company operates in its segment and serves customers under contracts.\n\n"
        "4\n\n"
        "ITEM 7. MANAGEMENT'S DISCUSSION AND ANALYSIS OF FINANCIAL CONDITION AND RESULTS OF OPERATIONS\n\n"
        f"{mdna}\n\n"
        f"{table}\n\n"
        "11\n\n"
        "ITEM 8. FINANCIAL STATEMENTS AND SUPPLEMENTARY DATA\n\n"
        "The financial statements are filed with this report.\n"
    )


def corpus_fingerprint(out_dir: str | Path) -> str:
    """Digest of every generated file; equal seeds must produce equal bytes."""
    out_dir = Path(out_dir)
    digest = hashlib.sha256()
    for path in sorted(out_dir.rglob("*")):
        if path.is_file():
            digest.update(path.relative_to(out_dir).as_posix().encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()
