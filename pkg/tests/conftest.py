import pytest

from nsf.config import Registry
from nsf.constitutive import ConstitutiveSet


@pytest.fixture
def registry() -> Registry:
    return Registry.builtin()


@pytest.fixture
def default_set() -> ConstitutiveSet:
    return ConstitutiveSet()
