import numpy as np
import pytest

from googlenet import backend


@pytest.fixture(params=backend.available())
def kernel_backend(request, monkeypatch):
    """Run the test once per usable kernel backend."""
    monkeypatch.setattr(backend, "kernels", backend.get(request.param))
    monkeypatch.setattr(backend, "name", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
