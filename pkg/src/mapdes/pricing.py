"""Grid tariff, feed-in price and the SDR-based internal price pair."""

from __future__ import annotations

import math
from dataclasses import dataclass


class InvalidPriceOrder(ValueError):
    pass


class InvalidTariff(ValueError):
    pass


# compute_sdr returns this when nobody bids: it routes to the surplus branch
NO_DEMAND_SDR = math.inf


def _in_window(hour: int, window: tuple[int, int]) -> bool:
    start, end = window
    if start <= end:
        return start <= hour < end
    return hour >= start or hour < end  # wraps midnight


def _window_hours(window: tuple[int, int]) -> frozenset[int]:
    return frozenset(h for h in range(24) if _in_window(h, window))


@dataclass(frozen=True)
class TimeOfUseTariff:
    """Three-tier retail tariff. Windows are half-open ``[start, end)`` hours and may wrap midnight."""

    night_rate: float = 0.12
    day_rate: float = 0.21
    peak_rate: float = 0.30
    night_window: tuple[int, int] = (23, 8)
    peak_window: tuple[int, int] = (17, 19)

    def __post_init__(self):
        if not 0 < self.night_rate <= self.day_rate <= self.peak_rate:
            raise InvalidTariff(
                f"rates must satisfy 0 < night <= day <= peak, got "
                f"{self.night_rate}, {self.day_rate}, {self.peak_rate}"
            )
        for name in ("night_window", "peak_window"):
            window = tuple(int(h) for h in getattr(self, name))
            if len(window) != 2 or not all(0 <= h <= 23 for h in window) or window[0] == window[1]:
                raise InvalidTariff(f"{name} must be two distinct hours in 0..23, got {window}")
            object.__setattr__(self, name, window)
        if _window_hours(self.night_window) & _window_hours(self.peak_window):
            raise InvalidTariff("night and peak windows overlap")

    def hourly_rates(self) -> tuple[float, ...]:
        """Retail rate for each hour of the day, index 0..23."""
        return tuple(rate_at(self, h) for h in range(24))


@dataclass(frozen=True)
class FeedInPrice:
    lambda_sell: float = 0.09

    def check_against(self, tariff: TimeOfUseTariff) -> None:
        if not 0 < self.lambda_sell < tariff.night_rate:
            raise InvalidPriceOrder(
                f"feed-in price {self.lambda_sell} must be positive and below the night rate {tariff.night_rate}"
            )


@dataclass(frozen=True)
class PriceQuote:
    isp: float
    ibp: float
    sdr: float


def _check_hour(hour_of_day: int) -> None:
    if not 0 <= hour_of_day <= 23:
        raise ValueError(f"hour_of_day must be in 0..23, got {hour_of_day}")


def rate_at(tariff: TimeOfUseTariff, hour_of_day: int) -> float:
    _check_hour(hour_of_day)
    if _in_window(hour_of_day, tariff.peak_window):
        return tariff.peak_rate
    if _in_window(hour_of_day, tariff.night_window):
        return tariff.night_rate
    return tariff.day_rate


def is_peak(tariff: TimeOfUseTariff, hour_of_day: int) -> bool:
    _check_hour(hour_of_day)
    return _in_window(hour_of_day, tariff.peak_window)


def compute_sdr(total_offer: float, total_bid: float) -> float:
    """Supply-demand ratio; :data:`NO_DEMAND_SDR` when there is no demand."""
    if total_offer < 0 or total_bid < 0:
        raise ValueError("offer and bid totals must be non-negative")
    if total_bid == 0:
        return NO_DEMAND_SDR
    return total_offer / total_bid


def internal_prices(sdr: float, lambda_buy: float, lambda_sell: float) -> PriceQuote:
    """ISP/IBP for one market interval.

    For ``sdr <= 1`` the selling price falls hyperbolically from the retail
    rate (no supply) to the feed-in price (balanced market), and the buying
    price is the supply-weighted blend ``isp*sdr + lambda_buy*(1 - sdr)``,
    which is exactly what buyers must pay for the auctioneer to cover both
    sellers and grid imports. Oversupplied intervals settle at the feed-in
    price on both sides.
    """
    if not 0 < lambda_sell < lambda_buy:
        raise InvalidPriceOrder(f"need 0 < lambda_sell < lambda_buy, got {lambda_sell}, {lambda_buy}")
    if not sdr >= 0:
        raise ValueError(f"sdr must be non-negative, got {sdr!r}")
    if sdr > 1:
        return PriceQuote(isp=lambda_sell, ibp=lambda_sell, sdr=sdr)
    isp = (lambda_sell * lambda_buy) / ((lambda_buy - lambda_sell) * sdr + lambda_sell)
    ibp = isp * sdr + lambda_buy * (1.0 - sdr)
    # rounding can push the endpoints one ulp outside the retail/feed-in band
    isp = min(max(isp, lambda_sell), lambda_buy)
    ibp = min(max(ibp, isp), lambda_buy)
    return PriceQuote(isp=isp, ibp=ibp, sdr=sdr)
