import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from corpus import build_corpus, fixture_config  # noqa: E402


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    build_corpus(root)
    return root


@pytest.fixture(scope="session")
def completed_run(corpus_root, tmp_path_factory):
    """One full offline pipeline run over the fixture corpus, shared."""
    from nbaudit.driver import PipelineDriver

    workspace = tmp_path_factory.mktemp("workspace")
    config, env = fixture_config(corpus_root, workspace)
    os.environ.update(env)
    driver = PipelineDriver(config)
    driver.run()
    yield driver
    driver.close()
