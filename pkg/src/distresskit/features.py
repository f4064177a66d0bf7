"""Classifier-ready observations: financial variables, labels, transforms.

The five financial ratios follow the classic pre-bankruptcy variable set:
working capital, retained earnings, EBITDA (named EBIT here, both usages
refer to the same scaled-earnings ratio), market equity, and sales, each
scaled by assets or liabilities upstream.  A bankruptcy label is 1 when the
firm files within 365 calendar days of the annual report (boundary
inclusive).

Winsor bounds and standardization statistics must be fit on the training
split only and then applied to validation/test, which is why the fit and
apply steps are separate functions.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateFeatureWarning,
    InsufficientData,
    InvalidDateOrder,
    MissingSentiment,
)
from .lexicon import DictTone
from .scoring import DocumentSentiment

FIN_VARIABLES = ("WC", "RE", "EBIT", "MVE", "SALE")

SENTIMENT_PAIRS: dict[str, tuple[str, str]] = {
    "DICT": ("DICTPOS", "DICTNEG"),
    "W2V": ("W2VPOS", "W2VNEG"),
    "BERT": ("BERTPOS", "BERTNEG"),
    "DAPT": ("DAPTPOS", "DAPTNEG"),
}

VARIABLE_SETS = ("FIN", "FIN+DICT", "FIN+W2V", "FIN+BERT", "FIN+DAPT")

MAX_LABEL_GAP_DAYS = 365

FirmYear = tuple[str, int]


@dataclass(frozen=True)
class FinancialRecord:
    firm_id: str
    fiscal_year: int
    filing_date: date
    wc: float
    re: float
    ebit: float
    mve: float
    sale: float
    bankruptcy_date: date | None = None

    def __post_init__(self) -> None:
        for name in ("wc", "re", "ebit", "mve", "sale"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite for {self.firm_id}/{self.fiscal_year}")
        if self.bankruptcy_date is not None and self.bankruptcy_date < self.filing_date:
            raise InvalidDateOrder(
                f"bankruptcy {self.bankruptcy_date} precedes filing {self.filing_date}"
            )

    @property
    def key(self) -> FirmYear:
        return (self.firm_id, self.fiscal_year)

    def values(self) -> tuple[float, ...]:
        return (self.wc, self.re, self.ebit, self.mve, self.sale)


@dataclass(frozen=True)
class Observation:
    firm_id: str
    fiscal_year: int
    filing_date: date
    brupt: int
    feature_names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("duplicate feature names")
        if len(self.feature_names) != len(self.values):
            raise ValueError("feature name/value length mismatch")


@dataclass(frozen=True)
class WinsorBounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    variables: tuple[str, ...]

    def __post_init__(self) -> None:
        for name, lo, hi in zip(self.variables, self.lower, self.upper):
            if lo > hi:
                raise ValueError(f"winsor bounds inverted for {name}")


def label_bankruptcy(filing_date: date, bankruptcy_date: date | None) -> int:
    """1 when the firm files for bankruptcy within 365 days of the report."""
    if bankruptcy_date is None:
        return 0
    if bankruptcy_date < filing_date:
        raise InvalidDateOrder(
            f"bankruptcy {bankruptcy_date} precedes filing {filing_date}"
        )
    gap = (bankruptcy_date - filing_date).days
    return 1 if 0 < gap <= MAX_LABEL_GAP_DAYS else 0


# -- winsorization -------------------------------------------------------------


def fit_winsor_matrix(
    x: np.ndarray, variables: Sequence[str], level: float = 0.01
) -> WinsorBounds:
    """Empirical (level, 1-level) quantiles per column, linear interpolation."""
    if not 0 < level < 0.5:
        raise ValueError("winsor level must be in (0, 0.5)")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientData("need at least 2 rows to fit winsor bounds")
    lower = np.quantile(x, level, axis=0)
    upper = np.quantile(x, 1.0 - level, axis=0)
    return WinsorBounds(tuple(lower), tuple(upper), tuple(variables))


def apply_winsor_matrix(x: np.ndarray, bounds: WinsorBounds) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.clip(x, np.asarray(bounds.lower), np.asarray(bounds.upper))


def fit_winsor(records: Sequence[FinancialRecord], level: float = 0.01) -> WinsorBounds:
    if len(records) < 2:
        raise InsufficientData("need at least 2 records to fit winsor bounds")
    x = np.array([r.values() for r in records], dtype=float)
    return fit_winsor_matrix(x, FIN_VARIABLES, level)


def apply_winsor(
    records: Sequence[FinancialRecord], bounds: WinsorBounds
) -> list[FinancialRecord]:
    clamped = []
    for r in records:
        x = apply_winsor_matrix(np.array([r.values()]), bounds)[0]
        clamped.append(replace(r, wc=x[0], re=x[1], ebit=x[2], mve=x[3], sale=x[4]))
    return clamped


# -- standardization -------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    mean: tuple[float, ...]
    sd: tuple[float, ...]
    feature_names: tuple[str, ...]
    kept: tuple[int, ...]

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[:, list(self.kept)]
        return (x - np.asarray(self.mean)) / np.asarray(self.sd)


def standardize(
    train: np.ndarray,
    others: Sequence[np.ndarray],
    feature_names: Sequence[str],
) -> tuple[np.ndarray, list[np.ndarray], Standardizer]:
    """Z-score all sets with training mean and population standard deviation.

    Constant training columns carry no information and would divide by zero;
    they are dropped from every set with a DegenerateFeatureWarning.
    """
    train = np.asarray(train, dtype=float)
    if train.size == 0:
        raise InsufficientData("empty training set")
    mean = train.mean(axis=0)
    sd = train.std(axis=0)  # population sd: train {0, 2} standardizes to {-1, +1}
    kept = [i for i in range(train.shape[1]) if sd[i] > 0]
    dropped = [feature_names[i] for i in range(train.shape[1]) if sd[i] == 0]
    if dropped:
        warnings.warn(
            f"dropping constant features {dropped}", DegenerateFeatureWarning, stacklevel=2
        )
    scaler = Standardizer(
        mean=tuple(mean[kept]),
        sd=tuple(sd[kept]),
        feature_names=tuple(feature_names[i] for i in kept),
        kept=tuple(kept),
    )
    return scaler.transform(train), [scaler.transform(o) for o in others], scaler


# -- assembly -------------------------------------------------------------------


def assemble(
    records: Sequence[FinancialRecord],
    tones: Mapping[FirmYear, DictTone] | None,
    sentiments: Mapping[str, Mapping[FirmYear, DocumentSentiment]] | None,
    variable_set: str,
) -> list[Observation]:
    """Join financial records with their sentiment pair for one variable set.

    Every record must have the scores its variable set requires; missing
    keys raise MissingSentiment rather than dropping rows silently.
    """
    if variable_set not in VARIABLE_SETS:
        raise ValueError(f"unknown variable set {variable_set!r}")
    source = None if variable_set == "FIN" else variable_set.split("+", 1)[1]

    names: tuple[str, ...] = FIN_VARIABLES
    if source is not None:
        names = FIN_VARIABLES + SENTIMENT_PAIRS[source]

    observations = []
    missing: list[FirmYear] = []
    for rec in records:
        values = list(rec.values())
        if source == "DICT":
            tone = (tones or {}).get(rec.key)
            if tone is None:
                missing.append(rec.key)
                continue
            values += [tone.dict_pos, tone.dict_neg]
        elif source is not None:
            sent = ((sentiments or {}).get(source) or {}).get(rec.key)
            if sent is None:
                missing.append(rec.key)
                continue
            values += [sent.pos, sent.neg]
        observations.append(
            Observation(
                firm_id=rec.firm_id,
                fiscal_year=rec.fiscal_year,
                filing_date=rec.filing_date,
                brupt=label_bankruptcy(rec.filing_date, rec.bankruptcy_date),
                feature_names=names,
                values=tuple(values),
            )
        )
    if missing:
        raise MissingSentiment(
            f"{len(missing)} records lack {source} scores, e.g. {missing[:3]}"
        )
    return observations


def to_matrix(observations: Sequence[Observation]) -> tuple[np.ndarray, np.ndarray]:
    """Stack observations into a design matrix and a label vector."""
    x = np.array([o.values for o in observations], dtype=float)
    y = np.array([o.brupt for o in observations], dtype=float)
    return x, y


# -- CSV interfaces --------------------------------------------------------------

FINANCIAL_COLUMNS = (
    "firm_id", "fiscal_year", "filing_date", "wc", "re", "ebit", "mve", "sale",
    "bankruptcy_date",
)


def read_financial_csv(path: str | Path) -> list[FinancialRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            raw_bdate = (row.get("bankruptcy_date") or "").strip()
            records.append(
                FinancialRecord(
                    firm_id=row["firm_id"],
                    fiscal_year=int(row["fiscal_year"]),
                    filing_date=date.fromisoformat(row["filing_date"]),
                    wc=float(row["wc"]),
                    re=float(row["re"]),
                    ebit=float(row["ebit"]),
                    mve=float(row["mve"]),
                    sale=float(row["sale"]),
                    bankruptcy_date=date.fromisoformat(raw_bdate) if raw_bdate else None,
                )
            )
    return records


def write_observations_csv(observations: Sequence[Observation], path: str | Path) -> None:
    if not observations:
        raise InsufficientData("no observations to write")
    names = observations[0].feature_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("firm_id", "fiscal_year", "filing_date") + names + ("brupt",))
        for o in observations:
            if o.feature_names != names:
                raise ValueError("mixed feature sets in one observation CSV")
            writer.writerow(
                (o.firm_id, o.fiscal_year, o.filing_date.isoformat())
                + tuple(f"{v:.10g}" for v in o.values)
                + (o.brupt,)
            )


def read_observations_csv(path: str | Path) -> list[Observation]:
    observations = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = tuple(header[3:-1])
        for row in reader:
            observations.append(
                Observation(
                    firm_id=row[0],
                    fiscal_year=int(row[1]),
                    filing_date=date.fromisoformat(row[2]),
                    brupt=int(row[-1]),
                    feature_names=names,
                    values=tuple(float(v) for v in row[3:-1]),
                )
            )
    return observations
