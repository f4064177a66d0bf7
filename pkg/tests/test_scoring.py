"""Sentence scoring contracts, aggregation arithmetic, and the stub backend."""

import json
import math
import threading
from datetime import date
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distresskit.corpus import MdnaDocument, Sentence
from distresskit.errors import (
    BackendRejected,
    BackendUnavailable,
    EmptyScoreList,
    InvalidDistribution,
    MixedDocuments,
)
from distresskit.lexicon import Lexicon
from distresskit.scoring import (
    DocumentSentiment,
    HttpScoringBackend,
    ScoreCache,
    ScoringBackend,
    SentenceScore,
    StubBackend,
    aggregate_document,
    normalize_class_totals,
    score_document,
    score_document_cached,
    stub_score,
    truncate_sentence,
)

LEX = Lexicon(frozenset({"STRENGTH", "EXPANDED", "ACHIEVE", "PROFITABILITY"}), frozenset({"ASSURANCE", "WEAK"}))


def make_doc(texts, doc_id="D1"):
    sentences = tuple(
        Sentence(doc_id, i, t, word_count=len(t.split())) for i, t in enumerate(texts)
    )
    return MdnaDocument(
        filing_id=doc_id,
        firm_id="F",
        filing_date=date(2020, 1, 1),
        text=" ".join(texts),
        sentences=sentences,
    )


def score(doc_id, idx, p):
    return SentenceScore(doc_id=doc_id, sent_index=idx, p=p)


simplex = st.tuples(
    st.floats(0.001, 1.0), st.floats(0.001, 1.0), st.floats(0.001, 1.0)
).map(lambda t: tuple(x / sum(t) for x in t))


class TestAggregation:
    def test_reported_worked_example(self):
        # Summed class vector from the worked example; its normalization is
        # (0.2343..., 0.5010..., 0.2646...).
        pos, neg, neu = normalize_class_totals((1.0365, 2.2161, 1.1704))
        assert pos == pytest.approx(0.2343, abs=1e-3)
        assert neg == pytest.approx(0.5010, abs=2e-3)
        assert pos + neg + neu == pytest.approx(1.0, abs=1e-12)

    def test_single_one_hot(self):
        got = aggregate_document([score("D1", 0, (1.0, 0.0, 0.0))])
        assert (got.pos, got.neg, got.neu) == (1.0, 0.0, 0.0)
        assert got.n_sentences == 1

    def test_two_sentence_symmetry(self):
        got = aggregate_document(
            [score("D1", 0, (1.0, 0.0, 0.0)), score("D1", 1, (0.0, 1.0, 0.0))]
        )
        assert got.pos == pytest.approx(0.5)
        assert got.neg == pytest.approx(0.5)
        assert got.neu == 0.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyScoreList):
            aggregate_document([])

    def test_mixed_documents_rejected(self):
        with pytest.raises(MixedDocuments):
            aggregate_document(
                [score("D1", 0, (1.0, 0.0, 0.0)), score("D2", 0, (1.0, 0.0, 0.0))]
            )

    @given(st.lists(simplex, min_size=1, max_size=12))
    @settings(max_examples=80)
    def test_permutation_invariant(self, triples):
        scores = [score("D1", i, p) for i, p in enumerate(triples)]
        forward = aggregate_document(scores)
        backward = aggregate_document(list(reversed(scores)))
        assert forward.pos == pytest.approx(backward.pos, abs=1e-12)
        assert forward.neg == pytest.approx(backward.neg, abs=1e-12)

    @given(simplex, st.integers(1, 10))
    def test_copies_fixed_point(self, p, n):
        got = aggregate_document([score("D1", i, p) for i in range(n)])
        assert got.pos == pytest.approx(p[0], abs=1e-12)
        assert got.neg == pytest.approx(p[1], abs=1e-12)
        assert got.neu == pytest.approx(p[2], abs=1e-12)

    @given(st.lists(simplex, min_size=2, max_size=10), st.integers(1, 9))
    @settings(max_examples=60)
    def test_split_and_merge_associative(self, triples, cut_raw):
        cut = 1 + cut_raw % (len(triples) - 1) if len(triples) > 1 else 1
        scores = [score("D1", i, p) for i, p in enumerate(triples)]
        whole = aggregate_document(scores)
        left, right = scores[:cut], scores[cut:]
        merged_totals = tuple(
            sum(s.p[k] for s in left) + sum(s.p[k] for s in right) for k in range(3)
        )
        pos, neg, neu = normalize_class_totals(merged_totals)
        assert whole.pos == pytest.approx(pos, abs=1e-12)
        assert whole.neg == pytest.approx(neg, abs=1e-12)
        assert whole.neu == pytest.approx(neu, abs=1e-12)

    def test_simplex_invariant_enforced(self):
        with pytest.raises(InvalidDistribution):
            score("D1", 0, (0.5, 0.5, 0.5))
        with pytest.raises(InvalidDistribution):
            score("D1", 0, (-0.1, 0.6, 0.5))


class TestStubScore:
    def sent(self, text):
        return Sentence("D1", 0, text, word_count=len(text.split()))

    def test_no_hits_mostly_neutral(self):
        got = stub_score(self.sent("plain words here"), LEX, temperature=1.0)
        expected = math.exp(0) / (2 * math.exp(0) + math.exp(0.5))
        assert got.p[0] == pytest.approx(expected, abs=1e-12)
        assert got.p[1] == pytest.approx(expected, abs=1e-12)
        assert got.p[2] == max(got.p)

    def test_positive_hits_win(self):
        got = stub_score(self.sent("strength expanded outlook"), LEX)
        assert got.p[0] == max(got.p)

    def test_balanced_hits_tie_exactly(self):
        got = stub_score(self.sent("strength but weak"), LEX)
        assert got.p[0] == got.p[1]

    def test_document_example(self):
        got = stub_score(self.sent("strength expanded achieve profitability"), LEX)
        assert got.p[0] > got.p[1]

    @given(st.floats(0.1, 5.0))
    def test_simplex_output(self, temperature):
        got = stub_score(self.sent("strength weak words"), LEX, temperature)
        assert abs(sum(got.p) - 1.0) < 1e-9
        assert all(x >= 0 for x in got.p)

    def test_temperature_positive_required(self):
        with pytest.raises(ValueError):
            stub_score(self.sent("x"), LEX, temperature=0.0)


class TestScoreDocument:
    def test_stub_three_sentences(self):
        doc = make_doc(["Strength ahead.", "Weak quarter.", "Nothing else."])
        got = score_document(doc, StubBackend(LEX))
        assert len(got) == 3
        assert [s.sent_index for s in got] == [0, 1, 2]
        for s in got:
            assert abs(sum(s.p) - 1.0) < 1e-9

    def test_wrong_arity_rejected(self):
        class TwoClassBackend(ScoringBackend):
            name = "bad"
            model_version = "v0"
            max_sentence_tokens = 512

            def score_sentences(self, sentences):
                return [(0.5, 0.5)] * len(sentences)

        with pytest.raises(BackendRejected):
            score_document(make_doc(["One.", "Two."]), TwoClassBackend())

    def test_wrong_row_count_rejected(self):
        class ShortBackend(ScoringBackend):
            name = "short"
            model_version = "v0"
            max_sentence_tokens = 512

            def score_sentences(self, sentences):
                return [(1.0, 0.0, 0.0)]

        with pytest.raises(BackendRejected):
            score_document(make_doc(["One.", "Two."]), ShortBackend())

    def test_truncation_to_token_cap(self):
        recorded = []

        class Recorder(ScoringBackend):
            name = "rec"
            model_version = "v0"
            max_sentence_tokens = 3

            def score_sentences(self, sentences):
                recorded.extend(sentences)
                return [(1.0, 0.0, 0.0)] * len(sentences)

        score_document(make_doc(["one two three four five"]), Recorder())
        assert recorded == ["one two three"]

    def test_truncate_sentence_helper(self):
        assert truncate_sentence("a b c d", 2) == "a b"
        assert truncate_sentence("a b", 5) == "a b"

    def test_stub_versions_track_lexicon(self):
        grown = Lexicon(LEX.positive | {"IMPROVED"}, LEX.negative)
        assert StubBackend(LEX).model_version != StubBackend(grown).model_version
        assert StubBackend(LEX).model_version == StubBackend(LEX).model_version


class TestScoreCache:
    def test_roundtrip_and_hit(self, tmp_path):
        doc = make_doc(["Strength ahead.", "Weak quarter."])
        backend = StubBackend(LEX)
        cache = ScoreCache(tmp_path / "scores.jsonl")
        first = score_document_cached(doc, backend, cache)
        assert cache.misses == 1 and cache.hits == 0
        second = score_document_cached(doc, backend, cache)
        assert cache.hits == 1
        assert first == second

        reloaded = ScoreCache(tmp_path / "scores.jsonl")
        assert reloaded.get_document(backend, doc) == first

    def test_version_change_misses(self, tmp_path):
        doc = make_doc(["Strength ahead."])
        cache = ScoreCache(tmp_path / "scores.jsonl")
        score_document_cached(doc, StubBackend(LEX), cache)
        other = StubBackend(Lexicon(LEX.positive | {"UPBEAT"}, LEX.negative))
        assert cache.get_document(other, doc) is None


class _ScoreHandler(BaseHTTPRequestHandler):
    payload = None
    status = 200

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        n = len(body["sentences"])
        if self.status != 200:
            self.send_response(self.status)
            self.end_headers()
            return
        if self.payload is not None:
            out = self.payload
        else:
            out = {"probs": [[0.2, 0.3, 0.5]] * n}
        data = json.dumps(out).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def fake_service():
    server = HTTPServer(("127.0.0.1", 0), _ScoreHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


class TestHttpBackend:
    def url(self, server):
        return f"http://127.0.0.1:{server.server_port}"

    def test_scores_roundtrip(self, fake_service):
        _ScoreHandler.payload = None
        _ScoreHandler.status = 200
        backend = HttpScoringBackend(self.url(fake_service), model_version="m1", batch_size=2)
        doc = make_doc(["One.", "Two.", "Three."])
        got = score_document(doc, backend)
        assert len(got) == 3
        assert got[0].p == pytest.approx((0.2, 0.3, 0.5))

    def test_malformed_rows_rejected(self, fake_service):
        _ScoreHandler.payload = {"probs": [[0.9, 0.1]]}
        backend = HttpScoringBackend(self.url(fake_service), model_version="m1")
        with pytest.raises(BackendRejected):
            score_document(make_doc(["One."]), backend)
        _ScoreHandler.payload = None

    def test_unreachable_is_unavailable(self):
        backend = HttpScoringBackend(
            "http://127.0.0.1:9", model_version="m1", retries=0, timeout=0.2
        )
        with pytest.raises(BackendUnavailable):
            backend.score_sentences(["One."])

    def test_server_error_is_unavailable(self, fake_service):
        _ScoreHandler.status = 503
        backend = HttpScoringBackend(self.url(fake_service), model_version="m1", retries=0)
        with pytest.raises(BackendUnavailable):
            backend.score_sentences(["One."])
        _ScoreHandler.status = 200
