"""CLI subcommands, exit codes, and the machine-readable error channel."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from distresskit.cli import main


def bundled_config(tmp_path, corpus_dir, **updates) -> Path:
    raw = {
        "corpus_index": str(corpus_dir / "sample_index.csv"),
        "financial_csv": str(tmp_path / "financials.csv"),
        "lexicon": {
            "positive": str(tmp_path / "pos.txt"),
            "negative": str(tmp_path / "neg.txt"),
        },
        "out_dir": str(tmp_path / "out"),
        "backend": "stub",
        "variable_sets": ["FIN"],
        "classifiers": ["hazard"],
        "split": {
            "window_start": "1996-01-01",
            "window_end": "1996-12-31",
            "n_bankrupt_test": 1,
            "repetitions": 2,
        },
    }
    raw.update(updates)
    (tmp_path / "financials.csv").write_text(
        "firm_id,fiscal_year,filing_date,wc,re,ebit,mve,sale,bankruptcy_date\n"
        "LTRE,1996,1996-09-30,0.1,0.2,0.3,0.4,0.5,1997-05-01\n"
    )
    (tmp_path / "pos.txt").write_text("STRENGTH\nEXPANDED\nACHIEVE\nPROFITABILITY\n")
    (tmp_path / "neg.txt").write_text("ASSURANCE\n")
    path = tmp_path / "cli.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_extract_on_bundled_fixture(tmp_path, bundled_corpus_dir):
    config = bundled_config(tmp_path, bundled_corpus_dir)
    result = CliRunner().invoke(main, ["extract", "--config", str(config)])
    assert result.exit_code == 0, result.output
    docs = [
        json.loads(line)
        for line in (tmp_path / "out" / "docs.jsonl").read_text().splitlines()
        if line.strip()
    ]
    assert len(docs) == 1
    assert len(docs[0]["sentences"]) == 2


def test_tone_on_bundled_fixture(tmp_path, bundled_corpus_dir):
    config = bundled_config(tmp_path, bundled_corpus_dir)
    result = CliRunner().invoke(main, ["tone", "--config", str(config)])
    assert result.exit_code == 0, result.output
    tone = json.loads((tmp_path / "out" / "tones.jsonl").read_text().splitlines()[0])
    assert tone["n_pos"] == 4
    assert tone["n_neg"] == 1


def test_fatal_error_emits_json_and_exit_2(tmp_path, bundled_corpus_dir):
    config = bundled_config(tmp_path, bundled_corpus_dir)
    (tmp_path / "pos.txt").write_text("not-a-word\n")
    result = CliRunner().invoke(main, ["tone", "--config", str(config)])
    assert result.exit_code == 2
    payload = json.loads(result.stderr.strip().splitlines()[-1])
    assert payload["error"] == "MalformedLexicon"


def test_missing_config_is_usage_error(tmp_path):
    result = CliRunner().invoke(main, ["extract", "--config", str(tmp_path / "nope.yaml")])
    assert result.exit_code != 0


def test_evaluate_cell_failure_exits_1(tmp_path):
    from distresskit import runner as runner_mod

    synth = {
        "n_firms": 60, "start_year": 2017, "end_year": 2019, "base_rate": 0.3,
        "fin_effect": 1.2, "text_effect": 1.2, "brupt_fin_weight": 1.8,
        "brupt_text_weight": 1.4, "signal_token_rate": 0.35, "lexicon_coverage": 0.2,
    }
    raw = {
        "corpus_index": "synth/filings/index.csv",
        "financial_csv": "synth/financials.csv",
        "lexicon": {"positive": "synth/lexicon_positive.txt", "negative": "synth/lexicon_negative.txt"},
        "out_dir": "out",
        "backend": "stub",
        "stub_temperature": 0.25,
        "variable_sets": ["FIN", "FIN+BERT"],
        "classifiers": ["hazard"],
        "rng_seed": 3,
        "split": {
            "window_start": "2019-01-01", "window_end": "2020-12-31",
            "n_bankrupt_test": 10, "repetitions": 2,
        },
        "synthetic": synth,
    }
    config = tmp_path / "cfg.yaml"
    config.write_text(yaml.safe_dump(raw))
    cfg = runner_mod.load_config(config)
    runner_mod.stage_synth(cfg)
    with open(cfg.financial_csv, "a", encoding="utf-8") as fh:
        fh.write("FX999,2018,2019-03-15,0.1,0.1,0.1,0.1,0.1,\n")

    result = CliRunner().invoke(main, ["evaluate", "--config", str(config)])
    assert result.exit_code == 1
    err = json.loads(result.stderr.strip().splitlines()[-1])
    assert err["variable_set"] == "FIN+BERT"
    # The healthy cell still produced a report row.
    report = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert any(line.startswith("FIN,") for line in report[1:])


def test_seed_override_changes_outputs(tmp_path, bundled_corpus_dir):
    config = bundled_config(tmp_path, bundled_corpus_dir)
    r = CliRunner().invoke(main, ["extract", "--config", str(config), "--seed", "42"])
    assert r.exit_code == 0


def test_subprocess_entrypoint_smoke(tmp_path, bundled_corpus_dir):
    # The module is runnable headlessly; error JSON lands on stderr.
    config = bundled_config(tmp_path, bundled_corpus_dir)
    (tmp_path / "pos.txt").write_text("bad entry\n")
    proc = subprocess.run(
        [sys.executable, "-m", "distresskit.cli", "tone", "--config", str(config)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip().splitlines()[-1])["error"] == "MalformedLexicon"
