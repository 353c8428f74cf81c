import numpy as np
import pytest

from ddos_hybrid.forest import ForestConfig
from ddos_hybrid.hybrid import HybridConfig, StackConfig, fit_hybrid
from ddos_hybrid.mlp import MlpConfig
from ddos_hybrid.synth import blob_table

# Small but complete pipeline config used by the unit tests.
SMALL = HybridConfig(
    forest=ForestConfig(tree_count=10),
    mlp=MlpConfig(hidden=(16,), learning_rate=0.1, epochs=20, batch_size=32),
    stack=StackConfig(folds=3),
)


@pytest.fixture(scope="session")
def small_table():
    return blob_table(n=300, d=8, n_classes=3, seed=11)


@pytest.fixture(scope="session")
def small_model(small_table):
    return fit_hybrid(small_table, SMALL)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config._criteria = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the session prints them all at the end."""
    def record(name: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        request.config._criteria.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
