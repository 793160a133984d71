import math

import pytest

from services import constructions as cons
from services.flow import TraceConfig

UPPER_ZERO = complex(0.5, math.sqrt(3) / 2)
LOWER_ZERO = UPPER_ZERO.conjugate()


@pytest.fixture(scope="session")
def q1():
    return cons.q1()


@pytest.fixture(scope="session")
def cfg():
    return TraceConfig()


@pytest.fixture(scope="session")
def q1_graph(q1, cfg):
    from services.strebel import critical_graph

    return critical_graph(q1, cfg)


@pytest.fixture(scope="session")
def omega11_graph(cfg):
    from services.strebel import critical_graph

    return critical_graph(cons.omega_ab(1.0, 1.0), cfg)
