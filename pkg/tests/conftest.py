import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from imbalgat import graphio, synthetic

sys.path.insert(0, str(Path(__file__).parent))

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def path3():
    """Path graph 0-1-2 with distinct features."""
    feats = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
    return graphio.build_graph(feats, [0, 1, 0], [(0, 1), (1, 2)], name="path3")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """Synthetic citation network: 4 classes, one of them small."""
    d = tmp_path_factory.mktemp("small")
    synthetic.write_dataset(d, "small", [60, 50, 45, 25], num_features=40, seed=3)
    return d


@pytest.fixture(scope="session")
def small_ds(small_dataset_dir):
    return graphio.load_dataset(small_dataset_dir)


@pytest.fixture(scope="session")
def small_split(small_ds):
    return graphio.make_split(small_ds, per_class=10, val_size=40, test_size=80)


# --- acceptance reporting -------------------------------------------------------------------

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    detail = ""
    if rep.failed:
        crash = getattr(rep.longrepr, "reprcrash", None)
        detail = (crash.message if crash else str(rep.longrepr)).splitlines()[0]
    else:
        detail = "; ".join(v for k, v in rep.user_properties if k == "measured")
    _CRITERIA.append((marker.args[0], marker.args[1], rep.outcome.upper(), detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, title, outcome, detail in sorted(_CRITERIA, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if outcome == 'PASSED' else 'FAIL'}] criterion {num}: {title}"
                                    + (f" -- {detail}" if detail else ""))
