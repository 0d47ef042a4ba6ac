import pytest

from ricci_lab.geometry import ProfileFamily, make_profile


@pytest.fixture(scope="session")
def round_metric():
    return make_profile(ProfileFamily.ROUND, 201)


@pytest.fixture(scope="session")
def perturbed_metric():
    return make_profile(ProfileFamily.PERTURBED, 201, 0.3, 1)
