import numpy as np
import pytest

from emfprint import synth
from emfprint.features import features_from_trace
from emfprint.trace import HACKRF_ONE, SpectralTrace

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, name): acceptance criterion check")
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, name = marker.args
        detail = dict(item.user_properties).get("detail", "")
        item.config.stash[_CRITERIA][number] = (name, report.outcome, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[_CRITERIA]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        name, outcome, detail = results[number]
        status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        line = f"[{status}] {number}. {name}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)


def make_trace(times, freqs, powers, fmt=HACKRF_ONE, **kw) -> SpectralTrace:
    return SpectralTrace(np.asarray(times, float), np.asarray(freqs, float),
                         np.asarray(powers, float), fmt, **kw)


def grid_trace(rng, n_sweeps=40, points=30, sweep_ms=8.0, fmt=HACKRF_ONE, **kw) -> SpectralTrace:
    """Random trace on a regular sweep grid spanning the instrument band."""
    t = np.repeat(np.arange(n_sweeps) * sweep_ms, points)
    f = np.tile(np.linspace(fmt.start_frequency, fmt.stop_frequency, points), n_sweeps)
    p = rng.normal(-70.0, 8.0, t.size)
    return make_trace(t, f, p, fmt, **kw)


class Corpus:
    def __init__(self, spec):
        self.spec = spec
        self.entries = synth.generate_corpus(spec)
        self.layout = synth.scenario_layout(spec)
        self.vectors = [features_from_trace(e.trace, self.layout) for e in self.entries]
        self.X = np.vstack([v.values for v in self.vectors])
        self.labels = [e.label for e in self.entries]


@pytest.fixture(scope="session")
def scenario1():
    return Corpus(synth.scenario1_spec())


@pytest.fixture(scope="session")
def small_corpus():
    """Four distinct devices, six traces each: quick end-to-end fixture."""
    return Corpus(synth.scenario1_spec(seed=11, classes=4, traces_per_class=6))
