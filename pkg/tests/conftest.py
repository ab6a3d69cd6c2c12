import math

import numpy as np
import pytest
from scipy.optimize import brentq

from sparsefrac.grid import RootBox


@pytest.fixture(scope="session")
def root1():
    return RootBox((0.0,), 1.0)


@pytest.fixture(scope="session")
def root2():
    return RootBox((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def t_star():
    """Root of t log(e + t) = 1; the llog norm of the unit function is 1/t*."""
    return brentq(lambda t: t * math.log(math.e + t) - 1.0, 0.1, 1.0, xtol=1e-15)


@pytest.fixture(scope="session")
def inv_log2():
    """The expm1 norm of the unit function: solve exp(1/lam) - 1 = 1."""
    return 1.0 / math.log(2.0)


def refine(cells: np.ndarray, factor: int) -> np.ndarray:
    """Represent a coarse mesh function exactly on a finer mesh."""
    if factor == 1:
        return cells
    out = np.repeat(cells, factor, axis=0)
    if cells.ndim == 2:
        out = np.repeat(out, factor, axis=1)
    return out
