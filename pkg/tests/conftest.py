"""Shared fixtures."""

import logging
from dataclasses import replace

import numpy as np
import pytest

from osfuse.core.settings import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """A run small enough to train in a couple of seconds."""
    return replace(
        RunConfig(),
        image_size=32,
        n_train=16,
        n_test=8,
        epochs=2,
        batch_size=8,
        embed_dim=4,
        head_dim=4,
        state_dim=2,
        area_k=2,
    ).validate()


@pytest.fixture(autouse=True)
def _restore_root_logger():
    # the CLI reconfigures the root logger; keep tests isolated from each other
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
