import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from imgforensics.refdb import ReferenceDb  # noqa: E402
from imgforensics.synth import labeled_corpus, splice_suite  # noqa: E402

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
EXTRACTION_ROOT = os.path.join(DATA_DIR, "extraction")
EXTRACTION_MANIFEST = os.path.join(DATA_DIR, "extraction_manifest.json")

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        number, title = mark.args
        ok = call.excinfo is None
        item.config._criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        title, ok = criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}")


@pytest.fixture(scope="session")
def corpus():
    return labeled_corpus()


@pytest.fixture(scope="session")
def corpus_db(corpus):
    db = ReferenceDb()
    for s in corpus:
        db.ingest(s.data, s.filename, s.label)
    yield db
    db.close()


@pytest.fixture(scope="session")
def splices():
    return splice_suite()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
