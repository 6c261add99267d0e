import math

import pytest
from hypothesis import given, strategies as st

from mapdes.pricing import (
    NO_DEMAND_SDR, FeedInPrice, InvalidPriceOrder, InvalidTariff, TimeOfUseTariff, compute_sdr,
    internal_prices, is_peak, rate_at,
)


def test_rate_at_windows(tariff):
    assert rate_at(tariff, 3) == tariff.night_rate
    assert rate_at(tariff, 23) == tariff.night_rate
    assert rate_at(tariff, 8) == tariff.day_rate
    assert rate_at(tariff, 18) == tariff.peak_rate
    assert rate_at(tariff, 19) == tariff.day_rate


def test_is_peak(tariff):
    assert is_peak(tariff, 17)
    assert is_peak(tariff, 18)
    assert not is_peak(tariff, 16)
    assert not is_peak(tariff, 19)
    assert [h for h in range(24) if is_peak(tariff, h)] == [17, 18]


def test_tariff_validation(tariff):
    with pytest.raises(InvalidTariff):
        TimeOfUseTariff(night_rate=0.25, day_rate=0.21)
    with pytest.raises(InvalidTariff):
        TimeOfUseTariff(peak_window=(7, 9))
    with pytest.raises(ValueError):
        FeedInPrice(0.15).check_against(tariff)


def test_compute_sdr():
    assert compute_sdr(5, 10) == 0.5
    assert compute_sdr(0, 7) == 0.0
    assert compute_sdr(3, 0) == NO_DEMAND_SDR
    assert compute_sdr(0, 0) == NO_DEMAND_SDR
    assert internal_prices(NO_DEMAND_SDR, 0.30, 0.09).isp == 0.09


def test_internal_prices_examples():
    q = internal_prices(0.0, 0.30, 0.09)
    assert (q.isp, q.ibp) == (0.30, 0.30)
    q = internal_prices(1.0, 0.30, 0.09)
    assert (q.isp, q.ibp) == (0.09, 0.09)
    q = internal_prices(0.5, 0.30, 0.09)
    assert q.isp == pytest.approx(0.027 / 0.195, abs=1e-12)
    assert q.isp == pytest.approx(0.13846, abs=5e-6)
    assert q.ibp == pytest.approx(0.21923, abs=5e-6)
    q = internal_prices(1.6, 0.30, 0.09)
    assert q.isp == q.ibp == 0.09


def test_price_order_enforced():
    with pytest.raises(InvalidPriceOrder):
        internal_prices(0.5, 0.09, 0.09)
    with pytest.raises(InvalidPriceOrder):
        internal_prices(0.5, 0.09, 0.30)


prices = st.tuples(st.floats(0.01, 1.0), st.floats(0.01, 1.0)).filter(lambda p: p[0] > p[1] * 1.001)


@given(st.floats(0.0, 5.0), prices)
def test_bounds(sdr, p):
    lb, ls = p
    q = internal_prices(sdr, lb, ls)
    assert ls <= q.isp <= q.ibp <= lb


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), prices)
def test_monotone_on_unit_interval(a, b, p):
    lo, hi = min(a, b), max(a, b)
    qa, qb = internal_prices(lo, *p), internal_prices(hi, *p)
    assert qb.isp <= qa.isp
    assert qb.ibp <= qa.ibp


@given(st.floats(0.0, 1.0), prices)
def test_budget_identity(sdr, p):
    lb, ls = p
    q = internal_prices(sdr, lb, ls)
    assert math.isclose(q.ibp, q.isp * sdr + lb * (1 - sdr), rel_tol=1e-12)


@given(prices)
def test_continuous_at_one(p):
    below = internal_prices(1.0, *p)
    above = internal_prices(math.nextafter(1.0, 2.0), *p)
    for v in (below.isp, below.ibp, above.isp, above.ibp):
        assert v == pytest.approx(p[1], abs=1e-12)
