import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedboost import data as D  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = ROOT / "data"
CONFIG_DIR = ROOT / "configs"


@pytest.fixture(scope="session")
def reference_csv():
    return DATA_DIR / "reference_synthetic.csv"


@pytest.fixture(scope="session")
def reference_dataset(reference_csv):
    """Reference table after idle isolation and BPFOnly selection."""
    return D.select_feature_group(D.min_idle_isolate(D.ingest_csv(reference_csv)), D.BPF_ONLY)


def make_dataset(rng, n=50, d=3, node_types=("a",)):
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + rng.normal(scale=0.3, size=n)
    types = [node_types[i % len(node_types)] for i in range(n)]
    loads = rng.uniform(0, 100, size=n)
    return D.Dataset(X, y, types, loads, tuple(f"f{j}" for j in range(d)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
