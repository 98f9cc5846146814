import numpy as np
import pytest

from gcnpac.gcn import GcnModel
from gcnpac.graphs import generate
from gcnpac.verify import random_instance

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def k3():
    return generate("complete", 3)


@pytest.fixture
def p3():
    return generate("path", 3)


@pytest.fixture
def relu_instances():
    return [random_instance(1000 + t) for t in range(12)]


def unit_model(d, activation="identity"):
    return GcnModel(tuple(np.ones((1, 1)) for _ in range(d)), activation)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
