"""Labels, winsorization, standardization, and observation assembly."""

from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distresskit.errors import (
    DegenerateFeatureWarning,
    InsufficientData,
    InvalidDateOrder,
    MissingSentiment,
)
from distresskit.features import (
    FIN_VARIABLES,
    FinancialRecord,
    Observation,
    apply_winsor,
    apply_winsor_matrix,
    assemble,
    fit_winsor,
    fit_winsor_matrix,
    label_bankruptcy,
    read_financial_csv,
    read_observations_csv,
    standardize,
    to_matrix,
    write_observations_csv,
)
from distresskit.lexicon import DictTone
from distresskit.scoring import DocumentSentiment

FILED = date(2020, 1, 1)


def record(firm="F1", year=2019, bdate=None, **ratios):
    values = dict(wc=0.1, re=0.2, ebit=0.3, mve=0.4, sale=0.5)
    values.update(ratios)
    return FinancialRecord(
        firm_id=firm, fiscal_year=year, filing_date=FILED, bankruptcy_date=bdate, **values
    )


class TestLabelBankruptcy:
    def test_boundary_365_inclusive(self):
        assert label_bankruptcy(FILED, date(2020, 12, 31)) == 1  # exactly 365 days

    def test_367_days_is_zero(self):
        assert label_bankruptcy(FILED, date(2021, 1, 2)) == 0

    def test_no_bankruptcy(self):
        assert label_bankruptcy(FILED, None) == 0

    def test_same_day_is_zero(self):
        assert label_bankruptcy(FILED, FILED) == 0

    def test_inverted_dates_raise(self):
        with pytest.raises(InvalidDateOrder):
            label_bankruptcy(FILED, date(2019, 12, 31))

    @given(st.integers(1, 365), st.integers(0, 600))
    def test_monotone_in_gap(self, gap, extra):
        # Shrinking the gap never flips the label from 1 to 0.
        if label_bankruptcy(FILED, FILED + timedelta(days=gap)) == 0:
            assert label_bankruptcy(FILED, FILED + timedelta(days=gap + extra)) == 0


class TestWinsor:
    def test_one_to_hundred_bounds(self):
        values = np.arange(1, 101, dtype=float).reshape(-1, 1)
        bounds = fit_winsor_matrix(values, ["v"], level=0.01)
        assert bounds.lower[0] == pytest.approx(1.99)
        assert bounds.upper[0] == pytest.approx(99.01)
        clamped = apply_winsor_matrix(np.array([[100.0]]), bounds)
        assert clamped[0, 0] == pytest.approx(99.01)

    def test_constant_column_unchanged(self):
        values = np.full((10, 1), 3.14)
        bounds = fit_winsor_matrix(values, ["v"])
        assert bounds.lower[0] == bounds.upper[0] == pytest.approx(3.14)
        assert np.array_equal(apply_winsor_matrix(values, bounds), values)

    def test_clamp_idempotent(self):
        rng = np.random.default_rng(5)
        values = rng.standard_normal((200, 3))
        bounds = fit_winsor_matrix(values, ["a", "b", "c"])
        once = apply_winsor_matrix(values, bounds)
        assert np.array_equal(apply_winsor_matrix(once, bounds), once)

    def test_record_level_roundtrip(self):
        records = [record(firm=f"F{i}", wc=float(i)) for i in range(1, 101)]
        bounds = fit_winsor(records)
        assert bounds.variables == FIN_VARIABLES
        clamped = apply_winsor(records, bounds)
        assert max(r.wc for r in clamped) == pytest.approx(99.01)
        # untouched variables stay put
        assert all(r.sale == 0.5 for r in clamped)

    def test_needs_two_records(self):
        with pytest.raises(InsufficientData):
            fit_winsor([record()])

    def test_level_validated(self):
        with pytest.raises(ValueError):
            fit_winsor_matrix(np.zeros((5, 1)), ["v"], level=0.7)

    @given(st.lists(st.floats(-100, 100), min_size=5, max_size=60))
    @settings(max_examples=60)
    def test_monotone_and_median_preserving(self, raw):
        values = np.array(raw).reshape(-1, 1)
        bounds = fit_winsor_matrix(values, ["v"], level=0.05)
        clamped = apply_winsor_matrix(values, bounds)[:, 0]
        order = np.argsort(values[:, 0], kind="stable")
        assert np.all(np.diff(clamped[order]) >= -1e-12)
        assert np.median(clamped) == pytest.approx(np.median(values), abs=1e-12)


class TestStandardize:
    def test_population_sd_convention(self):
        train = np.array([[0.0], [2.0]])
        std_train, _, scaler = standardize(train, [], ["v"])
        assert std_train[:, 0] == pytest.approx([-1.0, 1.0])
        assert scaler.mean == (1.0,)
        assert scaler.sd == (1.0,)

    def test_train_becomes_zero_mean_unit_sd(self):
        rng = np.random.default_rng(9)
        train = rng.normal(5.0, 3.0, size=(500, 4))
        std_train, _, _ = standardize(train, [], list("abcd"))
        assert np.allclose(std_train.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(std_train.std(axis=0), 1.0, atol=1e-12)

    def test_constant_feature_dropped_with_warning(self):
        train = np.array([[1.0, 2.0], [1.0, 4.0]])
        with pytest.warns(DegenerateFeatureWarning):
            std_train, others, scaler = standardize(train, [train], ["const", "var"])
        assert std_train.shape == (2, 1)
        assert others[0].shape == (2, 1)
        assert scaler.feature_names == ("var",)

    def test_transform_applied_to_others(self):
        train = np.array([[0.0], [2.0]])
        other = np.array([[4.0]])
        _, [std_other], _ = standardize(train, [other], ["v"])
        assert std_other[0, 0] == pytest.approx(3.0)


def tone_for(key):
    return DictTone(dict_pos=0.02, dict_neg=0.01, n_pos=2, n_neg=1, n_words=100)


def sentiment_for(kind):
    return DocumentSentiment(doc_id="D", pos=0.3, neg=0.5, neu=0.2, n_sentences=10)


class TestAssemble:
    def records(self):
        return [record(firm="F1"), record(firm="F2", bdate=date(2020, 6, 1))]

    def test_fin_only(self):
        obs = assemble(self.records(), None, None, "FIN")
        assert all(o.feature_names == FIN_VARIABLES for o in obs)
        assert [o.brupt for o in obs] == [0, 1]

    def test_fin_bert_ordering(self):
        keys = {("F1", 2019), ("F2", 2019)}
        sentiments = {"BERT": {k: sentiment_for("BERT") for k in keys}}
        obs = assemble(self.records(), None, sentiments, "FIN+BERT")
        assert obs[0].feature_names == FIN_VARIABLES + ("BERTPOS", "BERTNEG")
        assert obs[0].values[5:] == (0.3, 0.5)

    def test_fin_dict_uses_tone(self):
        keys = {("F1", 2019), ("F2", 2019)}
        tones = {k: tone_for(k) for k in keys}
        obs = assemble(self.records(), tones, None, "FIN+DICT")
        assert obs[0].feature_names[-2:] == ("DICTPOS", "DICTNEG")
        assert obs[0].values[-2:] == (0.02, 0.01)

    def test_missing_sentiment_raises(self):
        sentiments = {"DAPT": {("F1", 2019): sentiment_for("DAPT")}}
        with pytest.raises(MissingSentiment):
            assemble(self.records(), None, sentiments, "FIN+DAPT")

    def test_unknown_variable_set(self):
        with pytest.raises(ValueError):
            assemble(self.records(), None, None, "FIN+LSTM")

    def test_output_count_matches_join(self):
        keys = {("F1", 2019), ("F2", 2019)}
        sentiments = {"W2V": {k: sentiment_for("W2V") for k in keys}}
        obs = assemble(self.records(), None, sentiments, "FIN+W2V")
        assert len(obs) == 2


def test_record_validation():
    with pytest.raises(InvalidDateOrder):
        record(bdate=date(2019, 1, 1))
    with pytest.raises(ValueError):
        record(wc=float("nan"))


def test_to_matrix():
    obs = assemble([record(firm="F1"), record(firm="F2")], None, None, "FIN")
    x, y = to_matrix(obs)
    assert x.shape == (2, 5)
    assert y.tolist() == [0.0, 0.0]


def test_financial_csv_roundtrip(tmp_path):
    path = tmp_path / "fin.csv"
    path.write_text(
        "firm_id,fiscal_year,filing_date,wc,re,ebit,mve,sale,bankruptcy_date\n"
        "F1,2019,2020-01-01,0.1,0.2,0.3,0.4,0.5,\n"
        "F2,2019,2020-01-01,-0.5,-0.4,-0.7,1.8,1.0,2020-06-01\n"
    )
    records = read_financial_csv(path)
    assert len(records) == 2
    assert records[0].bankruptcy_date is None
    assert records[1].bankruptcy_date == date(2020, 6, 1)


def test_observation_csv_roundtrip(tmp_path):
    obs = assemble([record(firm="F1"), record(firm="F2", bdate=date(2020, 3, 1))], None, None, "FIN")
    path = tmp_path / "obs.csv"
    write_observations_csv(obs, path)
    loaded = read_observations_csv(path)
    assert loaded == obs
