import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from model_families import bernoulli_mean, build_family, hidden_binary, multinomial  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def bernoulli():
    return build_family(bernoulli_mean())


@pytest.fixture(scope="session")
def trinomial():
    return build_family(multinomial(3))


@pytest.fixture(scope="session")
def hidden_natural():
    return build_family(hidden_binary([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]], latent="natural"))


@pytest.fixture(scope="session")
def hidden_simplex():
    return build_family(hidden_binary([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]], latent="simplex"))
