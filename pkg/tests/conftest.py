import math

import numpy as np
import pytest

from reebkit.manifold import builtin_carriere, builtin_local_chart, builtin_t3_contact, builtin_trivial_open_book

# Independent eigenvalue oracle for A = [[2, 1], [1, 1]]: larger root of x^2 - 3x + 1.
LAM = (3.0 + math.sqrt(5.0)) / 2.0
LN_LAM = math.log(LAM)


@pytest.fixture(scope="session")
def carriere():
    return builtin_carriere()


@pytest.fixture(scope="session")
def open_book():
    return builtin_trivial_open_book()


@pytest.fixture(scope="session")
def t3():
    return builtin_t3_contact()


@pytest.fixture(scope="session")
def box3():
    cc = builtin_local_chart(3)
    return cc, cc.chart("box3")


@pytest.fixture(scope="session")
def box5():
    cc = builtin_local_chart(5)
    return cc, cc.chart("box5")


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
