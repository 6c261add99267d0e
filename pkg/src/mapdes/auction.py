"""Hourly double-auction clearing with SDR pricing.

Orders carry quantities only; every offer is priced at the interval's ISP
and every bid at its IBP. The short side of the book is filled in full and
the long side is served pro rata, with the grid absorbing the imbalance.
Buyers pay IBP on their whole demand (including the part the auctioneer
imports), which makes the auctioneer's books balance exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .pricing import InvalidPriceOrder, PriceQuote, compute_sdr, internal_prices

GRID = -1


class Side(enum.Enum):
    BID = "bid"
    OFFER = "offer"


class DuplicateOrder(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Order:
    farm_id: int
    side: Side
    quantity: float

    def __post_init__(self):
        if not self.quantity >= 0:
            raise ValueError(f"order quantity must be non-negative, got {self.quantity!r}")


@dataclass(frozen=True)
class Trade:
    """One matched lot. ``GRID`` stands in for the utility on either side.

    Internal lots are recorded at the ISP the seller receives; the buyer's
    IBP and the auctioneer's margin show up in the per-farm cash flows.
    """

    buyer_id: int
    seller_id: int
    quantity: float
    unit_price: float


@dataclass
class ClearingResult:
    quote: PriceQuote
    trades: list[Trade] = field(default_factory=list)
    grid_import: float = 0.0
    grid_export: float = 0.0
    cash: dict[int, float] = field(default_factory=dict)       # + receives, - pays
    internal: dict[int, float] = field(default_factory=dict)   # kWh matched inside the community
    via_grid: dict[int, float] = field(default_factory=dict)   # kWh imported for / exported from each farm
    total_bid: float = 0.0
    total_offer: float = 0.0
    lambda_buy: float = 0.0
    lambda_sell: float = 0.0

    @property
    def matched(self) -> float:
        """Energy exchanged inside the community."""
        return min(self.total_bid, self.total_offer)

    def auctioneer_net(self) -> float:
        """Cash the auctioneer is left holding after paying farms and the grid."""
        farm_flows = [-c for c in self.cash.values()]
        return math.fsum(farm_flows + [-self.lambda_buy * self.grid_import, self.lambda_sell * self.grid_export])


def _split_book(orders):
    seen = set()
    bids, offers = {}, {}
    for order in orders:
        if order.farm_id in seen:
            raise DuplicateOrder(f"farm {order.farm_id} submitted more than one order")
        seen.add(order.farm_id)
        if order.quantity > 0:
            (bids if order.side is Side.BID else offers)[order.farm_id] = order.quantity
    bids = dict(sorted(bids.items()))
    offers = dict(sorted(offers.items()))
    return bids, offers, seen


def _check_prices(lambda_buy, lambda_sell):
    if not 0 < lambda_sell < lambda_buy:
        raise InvalidPriceOrder(f"need 0 < lambda_sell < lambda_buy, got {lambda_sell}, {lambda_buy}")


def clear(orders, lambda_buy: float, lambda_sell: float) -> ClearingResult:
    _check_prices(lambda_buy, lambda_sell)
    bids, offers, participants = _split_book(orders)
    total_bid = math.fsum(bids.values())
    total_offer = math.fsum(offers.values())
    quote = internal_prices(compute_sdr(total_offer, total_bid), lambda_buy, lambda_sell)
    result = ClearingResult(quote=quote, total_bid=total_bid, total_offer=total_offer,
                            lambda_buy=lambda_buy, lambda_sell=lambda_sell)
    for fid in sorted(participants):
        result.cash[fid] = 0.0
        result.internal[fid] = 0.0
        result.via_grid[fid] = 0.0

    if total_offer <= total_bid:
        # every offered kWh is used inside the community
        fill = total_offer / total_bid if total_bid > 0 else 0.0
        for fid, q in bids.items():
            inside = q * fill
            result.internal[fid] = inside
            result.via_grid[fid] = q - inside
            result.cash[fid] = -quote.ibp * q
        for fid, q in offers.items():
            result.internal[fid] = q
            result.cash[fid] = quote.isp * q
        result.grid_import = total_bid - total_offer
    else:
        take = total_bid / total_offer
        for fid, q in bids.items():
            result.internal[fid] = q
            result.cash[fid] = -quote.ibp * q
        for fid, q in offers.items():
            inside = q * take
            result.internal[fid] = inside
            result.via_grid[fid] = q - inside
            result.cash[fid] = quote.isp * q
        result.grid_export = total_offer - total_bid

    pool = max(total_offer, total_bid)
    for b, qb in bids.items():
        for s, qs in offers.items():
            lot = qb * qs / pool
            if lot > 0:
                result.trades.append(Trade(b, s, lot, quote.isp))
    for fid, q in result.via_grid.items():
        if q > 0:
            if fid in bids:
                result.trades.append(Trade(fid, GRID, q, lambda_buy))
            else:
                result.trades.append(Trade(GRID, fid, q, lambda_sell))
    return result


def brute_force_clear(orders, lambda_buy: float, lambda_sell: float) -> ClearingResult:
    """Reference clearing by explicit pairwise matching; for small books in tests.

    Walks every (buyer, seller) pair in farm-id order and moves energy lot by
    lot, then settles each farm by adding up its own lots. Prices are taken
    from :func:`internal_prices` on the book totals.
    """
    orders = list(orders)
    if len(orders) > 6:
        raise TooLarge(f"brute force clearing is limited to 6 orders, got {len(orders)}")
    _check_prices(lambda_buy, lambda_sell)
    bids, offers, participants = _split_book(orders)
    total_bid = sum(bids.values())
    total_offer = sum(offers.values())
    quote = internal_prices(compute_sdr(total_offer, total_bid), lambda_buy, lambda_sell)

    received = {fid: 0.0 for fid in participants}
    delivered = {fid: 0.0 for fid in participants}
    lots = []
    for b in sorted(bids):
        for s in sorted(offers):
            # each seller's energy is shared across buyers in proportion to their bids,
            # each buyer's demand across sellers in proportion to their offers
            if total_offer <= total_bid:
                lot = offers[s] * (bids[b] / total_bid)
            else:
                lot = bids[b] * (offers[s] / total_offer)
            received[b] += lot
            delivered[s] += lot
            lots.append((b, s, lot))

    result = ClearingResult(quote=quote, total_bid=total_bid, total_offer=total_offer,
                            lambda_buy=lambda_buy, lambda_sell=lambda_sell)
    grid_in = grid_out = 0.0
    for fid in sorted(participants):
        result.internal[fid] = received[fid] + delivered[fid]
        if fid in bids:
            shortfall = bids[fid] - received[fid]
            result.via_grid[fid] = shortfall
            grid_in += shortfall
            result.cash[fid] = -(received[fid] * quote.ibp + shortfall * quote.ibp)
        elif fid in offers:
            leftover = offers[fid] - delivered[fid]
            result.via_grid[fid] = leftover
            grid_out += leftover
            result.cash[fid] = delivered[fid] * quote.isp + leftover * quote.isp
        else:
            result.via_grid[fid] = 0.0
            result.cash[fid] = 0.0
    result.grid_import = grid_in
    result.grid_export = grid_out
    result.trades = [Trade(b, s, q, quote.isp) for b, s, q in lots if q > 0]
    return result
