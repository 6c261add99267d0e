import pytest

from mapdes.battery import BatterySpec
from mapdes.pricing import FeedInPrice, TimeOfUseTariff


@pytest.fixture
def tariff():
    return TimeOfUseTariff()


@pytest.fixture
def fit():
    return FeedInPrice()


@pytest.fixture
def spec():
    return BatterySpec()
