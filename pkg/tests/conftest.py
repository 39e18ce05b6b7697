import pytest

from mockgithub import MockGitHub  # noqa: F401  (re-exported for tests)

from tdreview.corpus import LabeledSentence, RawComment
from tdreview.evaluation import split_80_20
from tdreview.pipeline import train_pipeline
from tdreview.synthetic import keyword_corpus

_acceptance: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance[marker[0]] = (outcome, marker[1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result().acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance, key=lambda k: int(k.split("-")[1])):
        outcome, title = _acceptance[key]
        terminalreporter.write_line(f"{outcome:4}  {key}  {title}")


@pytest.fixture(scope="session")
def synthetic_split():
    return split_80_20(keyword_corpus(60, seed=3), seed=3)


@pytest.fixture(scope="session")
def synthetic_model(synthetic_split):
    train, _ = synthetic_split
    return train_pipeline(train, seed=3, hierarchy_source="reference")


@pytest.fixture
def comment():
    def make(body, cid="c1", package="pkgA", platform="ropensci", created_at="2019-05-01T00:00:00Z"):
        return RawComment(platform, package, 1, cid, created_at, body, f"https://github.com/o/r/issues/1#{cid}")

    return make


@pytest.fixture
def sentence():
    def make(text, label, cid="c1"):
        return LabeledSentence(text=text, label=label, comment_id=cid)

    return make
