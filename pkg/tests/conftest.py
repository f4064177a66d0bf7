import shutil
from importlib import resources
from pathlib import Path

import pytest

from distresskit import corpus
from distresskit.lexicon import Lexicon, sample_lexicon


@pytest.fixture(scope="session")
def sample_lex() -> Lexicon:
    return sample_lexicon()


@pytest.fixture(scope="session")
def bundled_corpus_dir(tmp_path_factory) -> Path:
    """Copy of the bundled one-filing sample corpus (filing + CSV index)."""
    target = tmp_path_factory.mktemp("sample_corpus")
    data = resources.files("distresskit.data")
    for name in ("sample_filing.txt", "sample_index.csv"):
        with resources.as_file(data.joinpath(name)) as src:
            shutil.copy(src, target / name)
    return target


@pytest.fixture(scope="session")
def excerpt_doc(bundled_corpus_dir) -> corpus.MdnaDocument:
    filings = list(corpus.iter_filings(bundled_corpus_dir / "sample_index.csv"))
    assert len(filings) == 1
    return corpus.extract_mdna(filings[0])
