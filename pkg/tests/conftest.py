import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skelmap import RunConfig, default_topology, split_dataset, train_pipeline  # noqa: E402
from skelmap.synth import generate_dataset  # noqa: E402


@pytest.fixture(scope="session")
def topology():
    return default_topology()


@pytest.fixture(scope="session")
def synthetic():
    """5 classes x 40 sequences, seed 0, and its stratified 80/20 split."""
    ds = generate_dataset(5, 40, seed=0)
    train, test = split_dataset(ds, 0.8, 0)
    return ds, train, test


@pytest.fixture(scope="session")
def som_model(synthetic):
    _, train, _ = synthetic
    return train_pipeline(train, RunConfig())


@pytest.fixture(scope="session")
def small_model():
    """A quick model with a 12x12 first map, for tests that only need plumbing."""
    ds = generate_dataset(3, 8, seed=3)
    cfg = RunConfig().with_overrides({"first_map.rows": 12, "first_map.cols": 12,
                                      "first_map.epochs": 3, "second_map.rows": 4,
                                      "second_map.cols": 4, "second_map.epochs": 10})
    return train_pipeline(ds, cfg), ds


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; printed again in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(name, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"criterion {name}: {status}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
