import logging
import os
from typing import Callable, Iterator, Optional

import numpy as np
import pytest

from superabsorber.lib.quantum.core import DensityMatrix
from superabsorber.lib.quantum.fock import FockField


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """no SUPERABSORBER* variable from the calling shell leaks into a test"""
    for key in list(os.environ):
        if key.startswith('SUPERABSORBER'):
            monkeypatch.delenv(key)


@pytest.fixture(autouse=True)
def restore_logging() -> Iterator[None]:
    """undo configure_logging, which stops package records reaching caplog"""
    root = logging.getLogger()
    saved_root = list(root.handlers), root.level
    yield
    root.handlers[:], root.level = saved_root
    for name in ('superabsorber', 'scipy', '__main__'):
        logger = logging.getLogger(name)
        logger.handlers.clear()
        logger.setLevel(logging.NOTSET)
        logger.propagate = True


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20241017)


@pytest.fixture
def random_state(rng: np.random.Generator) -> Callable[..., DensityMatrix]:
    """a full rank random density matrix on the first `support` levels of `dim`"""

    def make(dim: int, support: Optional[int] = None) -> DensityMatrix:
        support = dim if support is None else support
        g = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
        rho = np.zeros((dim, dim), dtype=complex)
        rho[:support, :support] = g @ g.conj().T
        rho = (rho + rho.conj().T) / 2
        return DensityMatrix(rho / np.trace(rho))

    return make


@pytest.fixture
def random_field(random_state: Callable[..., DensityMatrix]) -> Callable[..., FockField]:
    def make(n_max: int, support: Optional[int] = None) -> FockField:
        return FockField(random_state(n_max + 1, support))

    return make
