"""Whole-blotter allocation methods: per-fill rounding, HPHA and APS."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import groupby
from typing import Mapping, Optional, Sequence, Union

from .ledger import (
    Account,
    AccountState,
    AllocationError,
    AllocationVector,
    Exact,
    Fill,
    LedgerError,
    LedgerState,
    Trajectory,
    TrajectoryRow,
    apply_fill,
    check_fills,
)
from .rounding import (
    LargestAccount,
    ResidualPolicy,
    allocate_fill_proportional,
    round_scaled,
    size_profile,
)


@dataclass(frozen=True)
class DayBatch:
    day: int
    buy_fills: tuple[Fill, ...]
    sell_fills: tuple[Fill, ...]
    buy_qty: int
    sell_qty: int
    avg_buy_price: Optional[Fraction]
    avg_sell_price: Optional[Fraction]


@dataclass(frozen=True)
class BatchAllocation:
    """Per-account quantities of one side of one day, filled at ``price``."""

    day: int
    side: str
    quantity: int
    price: Fraction
    parts: dict[str, int]


@dataclass
class MethodResult:
    """Outcome of one method over a blotter; money in minor units.

    ``cum_pnl`` is marked to the last event price; ``cash_pnl`` is sell
    notional minus buy notional, which ignores open positions.
    """

    method: str
    account_ids: list[str]
    allocations: list[Union[AllocationVector, BatchAllocation]]
    positions: dict[str, int]
    cum_pnl: dict[str, Exact]
    cash_pnl: dict[str, Exact]
    fund_position: int
    fund_cum_pnl: Exact
    fund_cash_pnl: Exact
    trajectory: Optional[Trajectory] = None
    extras: dict = field(default_factory=dict)


def _group_days(fills: Sequence[Fill]) -> list[list[Fill]]:
    return [list(g) for _, g in groupby(fills, key=lambda f: f.day)]


class Book:
    """Books per-fill allocations into a ledger and collects a :class:`MethodResult`."""

    def __init__(self, accounts: Sequence[Account], record: bool = True):
        self.ids = [a.id for a in accounts]
        self.state = LedgerState.open(self.ids)
        self.cash = dict.fromkeys(self.ids, 0)
        self.allocations: list[AllocationVector] = []
        self.rows: Optional[list[TrajectoryRow]] = [] if record else None

    def book(self, fill: Fill, alloc: AllocationVector) -> LedgerState:
        self.state = apply_fill(self.state, fill, alloc)
        self.allocations.append(alloc)
        for a, q in alloc.parts.items():
            if q:
                self.cash[a] -= q * fill.price
        if self.rows is not None:
            self.rows.append(TrajectoryRow(fill.seq, fill.day, fill.price, fill.qty,
                                           self.state.fund, dict(alloc.parts),
                                           self.state.accounts))
        return self.state

    def result(self, method: str) -> MethodResult:
        state = self.state
        return MethodResult(
            method, self.ids, self.allocations,
            {a: s.net_position for a, s in state.accounts.items()},
            {a: s.cum_pnl for a, s in state.accounts.items()},
            self.cash,
            state.fund.net_position, state.fund.cum_pnl, sum(self.cash.values()),
            Trajectory(self.ids, self.rows, state) if self.rows is not None else None,
        )


def result_from_allocations(method: str, fills: Sequence[Fill], accounts: Sequence[Account],
                            allocations: Sequence[AllocationVector],
                            record: bool = True) -> MethodResult:
    book = Book(accounts, record)
    for fill, alloc in zip(fills, allocations):
        book.book(fill, alloc)
    return book.result(method)


def run_simple_rounding(fills: Sequence[Fill], accounts: Sequence[Account],
                        policy: Optional[ResidualPolicy] = None,
                        record: bool = True) -> MethodResult:
    """Round every fill proportionally to the allocation factors."""
    check_fills(fills)
    policy = policy or LargestAccount()
    allocs = [allocate_fill_proportional(f, accounts, policy) for f in fills]
    return result_from_allocations("simple", fills, accounts, allocs, record)


def _average(fills: Sequence[Fill]) -> Optional[Fraction]:
    qty = sum(f.qty for f in fills)
    if not qty:
        return None
    return Fraction(sum(f.qty * f.price for f in fills), qty)


def batch_day(fills: Sequence[Fill]) -> DayBatch:
    if not fills:
        raise ValueError("empty day")
    day = fills[0].day
    if any(f.day != day for f in fills):
        raise ValueError("fills span more than one day")
    desc = lambda f: (-f.price, f.seq)
    buys = tuple(sorted((f for f in fills if f.qty > 0), key=desc))
    sells = tuple(sorted((f for f in fills if f.qty < 0), key=desc))
    return DayBatch(day, buys, sells,
                    sum(f.qty for f in buys), sum(f.qty for f in sells),
                    _average(buys), _average(sells))


def _side_totals(total: int, accounts: Sequence[Account], policy: ResidualPolicy,
                 day: int) -> list[int]:
    prof = size_profile([a.alpha for a in accounts])
    return round_scaled([s * total for s in prof.sizes], prof.den, total,
                        policy.order(prof.alphas, day))


def run_hpha(fills: Sequence[Fill], accounts: Sequence[Account],
             policy: Optional[ResidualPolicy] = None, record: bool = True) -> MethodResult:
    """Highest fill prices to the largest accounts, per day and side.

    Per-account side totals come from sum-preserving rounding; accounts in
    descending size then take lots from the price-sorted fills (highest
    first). The ledger is then driven in original fill order.
    """
    check_fills(fills)
    policy = policy or LargestAccount()
    ids = [a.id for a in accounts]
    by_size = sorted(range(len(accounts)), key=lambda i: (-accounts[i].alpha, i))
    parts: dict[int, dict[str, int]] = {f.seq: dict.fromkeys(ids, 0) for f in fills}
    for day_fills in _group_days(fills):
        batch = batch_day(day_fills)
        for side_fills, total in ((batch.buy_fills, batch.buy_qty),
                                  (batch.sell_fills, batch.sell_qty)):
            if not side_fills:
                continue
            totals = _side_totals(total, accounts, policy, batch.day)
            sign = 1 if total > 0 else -1
            lots = iter(f for f in side_fills for _ in range(abs(f.qty)))
            for i in by_size:
                for _ in range(abs(totals[i])):
                    parts[next(lots).seq][ids[i]] += sign
    allocs = [AllocationVector(f.seq, parts[f.seq]) for f in fills]
    return result_from_allocations("hpha", fills, accounts, allocs, record)


def run_aps(fills: Sequence[Fill], accounts: Sequence[Account],
            policy: Optional[ResidualPolicy] = None, record: bool = True) -> MethodResult:
    """Average pricing: each side of each day is split at its average price.

    Positions and cash accumulate per day; P&L is marked to the day's last
    event price. Average prices stay exact rationals.
    """
    policy = policy or LargestAccount()

    def split(day, side, total):
        return _side_totals(total, accounts, policy, day)

    return _average_price_run("aps", fills, accounts, split, record)


def replay_aps(fills: Sequence[Fill], accounts: Sequence[Account],
               quantities: Mapping[tuple[int, str], Mapping[str, int]],
               record: bool = True) -> MethodResult:
    """Average pricing with fixed per-account quantities per ``(day, side)``."""
    ids = [a.id for a in accounts]

    def split(day, side, total):
        try:
            share = quantities[(day, side)]
        except KeyError:
            raise LedgerError(f"no quantities for day {day} {side}") from None
        parts = [share.get(a, 0) for a in ids]
        if sum(parts) != total or any(p * total < 0 for p in parts):
            raise AllocationError(f"day {day} {side}: parts {parts} do not split {total}")
        return parts

    return _average_price_run("aps-replay", fills, accounts, split, record)


def _average_price_run(method, fills, accounts, split, record) -> MethodResult:
    check_fills(fills)
    ids = [a.id for a in accounts]
    positions = dict.fromkeys(ids, 0)
    cash: dict[str, Exact] = dict.fromkeys(ids, 0)
    fund_pos, fund_cash = 0, 0
    allocs: list[BatchAllocation] = []
    rows = []
    batches = []
    last_price = None
    prev_mark = {a: AccountState() for a in ids}
    prev_fund = AccountState()
    for day_fills in _group_days(fills):
        batch = batch_day(day_fills)
        batches.append(batch)
        day_parts = dict.fromkeys(ids, 0)
        for side, total, avg in (("buy", batch.buy_qty, batch.avg_buy_price),
                                 ("sell", batch.sell_qty, batch.avg_sell_price)):
            if not total:
                continue
            share = dict(zip(ids, split(batch.day, side, total)))
            allocs.append(BatchAllocation(batch.day, side, total, avg, share))
            for a, q in share.items():
                positions[a] += q
                cash[a] -= q * avg
                day_parts[a] += q
            fund_pos += total
            fund_cash -= total * avg
        last_price = day_fills[-1].price
        fund = _day_state(fund_pos, fund_cash, last_price, prev_fund)
        marks = {a: _day_state(positions[a], cash[a], last_price, prev_mark[a]) for a in ids}
        if record:
            rows.append(TrajectoryRow(day_fills[-1].seq, batch.day, last_price,
                                      sum(f.qty for f in day_fills), fund, day_parts, marks))
        prev_fund, prev_mark = fund, marks
    final = LedgerState(prev_fund, prev_mark, last_price)
    return MethodResult(
        method, ids, allocs, dict(positions),
        {a: s.cum_pnl for a, s in prev_mark.items()}, dict(cash),
        fund_pos, prev_fund.cum_pnl, fund_cash,
        Trajectory(ids, rows, final) if record else None,
        {"batches": batches},
    )


def _day_state(position: int, cash: Exact, price: int, prev: AccountState) -> AccountState:
    cum = cash + position * price
    if isinstance(cum, Fraction) and cum.denominator == 1:
        cum = cum.numerator
    return AccountState(position, cum, cum - prev.cum_pnl)
