import numpy as np
import pytest

from nozzleflow import geometry, inlet


@pytest.fixture(scope="session")
def straight():
    return geometry.straight()


@pytest.fixture(scope="session")
def contracting():
    return geometry.tanh_nozzle(0.75)


@pytest.fixture(scope="session")
def sheared():
    """Smooth stratified inlet data satisfying the wall monotonicity conditions."""
    return inlet.polynomial([1.0, 0.0, 0.2], [1.0, 0.1])


def uniform_closure(B=2.0, S=1.0, gamma=1.4, m=1.0, eps_cut=0.05):
    const = lambda v: (lambda s, **_: np.full(np.shape(s), float(v)))
    return inlet.closure_from_stream(m, const(B), const(0.0), const(S), const(0.0), gamma,
                                     eps_cut=eps_cut)
