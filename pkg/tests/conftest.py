# tests/conftest.py
"""Shared fixtures. Sample sizes here are small; acceptance-scale runs are marked `slow`."""
import pytest

from app.families import dirac_singletons, example42, example45, tiny_instance
from app.goals import always_nonzero, eventually_nonzero

# Tests use a wider band than reports so that small samples stay stable.
TEST_Z = 4.0


@pytest.fixture
def seed() -> int:
    return 20240601


@pytest.fixture
def z() -> float:
    return TEST_Z


@pytest.fixture
def tiny():
    return tiny_instance()


@pytest.fixture
def dummy():
    return dirac_singletons(0)


@pytest.fixture
def e42():
    return example42()


@pytest.fixture
def e45():
    return example45()


@pytest.fixture
def always():
    return always_nonzero()


@pytest.fixture
def eventually():
    return eventually_nonzero()
