import pytest

from nsdde_sim import constant_segment, neutral_cubic_model, neutral_cubic_rates

CUBIC = dict(k=0.5, c1=-1.0, c2=-1.0, tau=1.0)


@pytest.fixture(scope="session")
def cubic_model():
    return neutral_cubic_model(**CUBIC)


@pytest.fixture(scope="session")
def cubic_rates():
    return neutral_cubic_rates(box_radius=2.0, **CUBIC)


@pytest.fixture()
def unit_segment():
    return constant_segment(1.0)
