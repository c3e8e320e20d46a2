import tempfile
from pathlib import Path

import pytest

from mcpvet.fixtures import emit_corpus


@pytest.fixture(scope="session")
def corpus_dir():
    out = Path(tempfile.mkdtemp(prefix="fixture-corpus-"))
    emit_corpus(out)
    return out
