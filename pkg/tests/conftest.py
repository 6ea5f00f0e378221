import os
import sys

import numpy as np
import pytest

# Adicionar o diretório do projeto ao path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from measures import DiscreteMeasure  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def grid4():
    return DiscreteMeasure.midpoint_grid(4)


@pytest.fixture
def dirac2():
    return DiscreteMeasure.dirac(2.0)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    from config import Config
    monkeypatch.setattr(Config, 'OUTPUT_FOLDER', str(tmp_path))
    return tmp_path
