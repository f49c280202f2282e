import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sis_forge import trainer  # noqa: E402
from sis_forge.config import TrainConfig  # noqa: E402


def tiny_config(**kw):
    base = dict(nt=9, nr=9, lt=2, lr=2, mt=2, mr=2, symbols_per_block=4, batch_size=4,
                chunk_size=2, test_realizations=4, test_symbols=200)
    base.update(kw)
    cfg = TrainConfig(**base)
    cfg.validate()
    return cfg


@pytest.fixture
def tiny_link():
    return trainer.Link.from_config(tiny_config())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
