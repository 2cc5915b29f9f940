"""Event-sequenced mark-to-market ledger for a fund and its accounts.

Prices and P&L are held in integer minor units (cents) so that every figure
is exact. Each fill first marks every open position (fund and all accounts)
from the previous event price to the fill price, then books the new
quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

MINOR_UNITS = 100

Exact = Union[int, Fraction]


class LedgerError(ValueError):
    """Raised when an event cannot be booked; carries the offending seq."""

    def __init__(self, message: str, seq: Optional[int] = None):
        super().__init__(message if seq is None else f"seq {seq}: {message}")
        self.seq = seq


class AllocationError(LedgerError):
    pass


def to_minor(amount) -> int:
    """Convert a currency amount (str, int, Decimal) to integer minor units."""
    try:
        value = Decimal(str(amount)) * MINOR_UNITS
    except InvalidOperation as exc:
        raise ValueError(f"not a decimal amount: {amount!r}") from exc
    if value != value.to_integral_value():
        raise ValueError(f"{amount!r} has more precision than 1/{MINOR_UNITS}")
    return int(value)


def to_major(minor: Exact) -> Fraction:
    return Fraction(minor, MINOR_UNITS)


@dataclass(frozen=True, slots=True)
class Fill:
    """One executed leg of a bunched order. ``price`` is in minor units."""

    seq: int
    day: int
    price: int
    qty: int

    def __post_init__(self):
        if self.qty == 0:
            raise LedgerError("fill quantity must be nonzero", self.seq)
        if self.price <= 0:
            raise LedgerError("fill price must be positive", self.seq)
        if self.day < 1:
            raise LedgerError("trading day must be positive", self.seq)

    @classmethod
    def of(cls, seq: int, day: int, price, qty: int) -> "Fill":
        """Build a fill from a price in currency units (e.g. ``"142.50"``)."""
        return cls(seq, day, to_minor(price), qty)


@dataclass(frozen=True)
class Account:
    id: str
    aum: Decimal
    alpha: Fraction


def make_accounts(aums: Union[Mapping[str, object], Iterable[tuple]]) -> list[Account]:
    """Create accounts with exact allocation factors ``aum_i / sum(aum)``."""
    pairs = list(aums.items()) if isinstance(aums, Mapping) else list(aums)
    if not pairs:
        raise ValueError("at least one account is required")
    ids = [str(i) for i, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("account ids must be unique")
    values = [Decimal(str(a)) for _, a in pairs]
    if any(v <= 0 for v in values):
        raise ValueError("account AUM must be positive")
    total = Fraction(sum(values))
    return [Account(i, v, Fraction(v) / total) for i, v in zip(ids, values)]


@dataclass(frozen=True)
class AllocationVector:
    fill_seq: int
    parts: Mapping[str, int]

    def validate(self, fill: Fill) -> None:
        if self.fill_seq != fill.seq:
            raise AllocationError(
                f"allocation references seq {self.fill_seq}", fill.seq)
        total = sum(self.parts.values())
        if total != fill.qty:
            raise AllocationError(
                f"parts sum to {total}, fill quantity is {fill.qty}", fill.seq)
        for acct, part in self.parts.items():
            if part * fill.qty < 0:
                raise AllocationError(
                    f"account {acct} part {part} has the wrong sign", fill.seq)


@dataclass(frozen=True, slots=True)
class AccountState:
    net_position: int = 0
    cum_pnl: Exact = 0
    last_bucket_pnl: Optional[Exact] = None


@dataclass(frozen=True)
class LedgerState:
    fund: AccountState = AccountState()
    accounts: Mapping[str, AccountState] = field(default_factory=dict)
    last_price: Optional[int] = None

    @classmethod
    def open(cls, account_ids: Iterable[str] = ()) -> "LedgerState":
        return cls(AccountState(), {a: AccountState() for a in account_ids}, None)


def bucket_pnl(net_position, prev_price, price):
    """P&L of holding ``net_position`` while the price moves prev -> price."""
    return net_position * (price - prev_price)


def _marked(acct: AccountState, prev: Optional[int], price: int) -> AccountState:
    if prev is None:
        return acct
    b = bucket_pnl(acct.net_position, prev, price)
    return AccountState(acct.net_position, acct.cum_pnl + b, b)


def mark(state: LedgerState, price: int) -> LedgerState:
    """Mark every position to ``price`` without changing positions."""
    prev = state.last_price
    return LedgerState(
        _marked(state.fund, prev, price),
        {a: _marked(s, prev, price) for a, s in state.accounts.items()},
        price,
    )


def apply_fill(state: LedgerState, fill: Fill,
               alloc: Optional[AllocationVector] = None) -> LedgerState:
    """Book ``fill`` and its allocation, returning the new state.

    Accounts with a zero part are still marked. ``alloc`` may only be omitted
    for a fund-only ledger.
    """
    if alloc is None:
        if state.accounts:
            raise AllocationError("allocation required", fill.seq)
        parts: Mapping[str, int] = {}
    else:
        alloc.validate(fill)
        parts = alloc.parts
        unknown = set(parts) - set(state.accounts)
        if unknown:
            raise AllocationError(f"unknown accounts {sorted(unknown)}", fill.seq)
    marked = mark(state, fill.price)
    fund = marked.fund
    accounts = {}
    for a, s in marked.accounts.items():
        q = parts.get(a, 0)
        accounts[a] = AccountState(s.net_position + q, s.cum_pnl, s.last_bucket_pnl) if q else s
    return LedgerState(
        AccountState(fund.net_position + fill.qty, fund.cum_pnl, fund.last_bucket_pnl),
        accounts,
        fill.price,
    )


@dataclass(frozen=True)
class TrajectoryRow:
    seq: int
    day: int
    price: Exact
    qty: int
    fund: AccountState
    parts: Mapping[str, int]
    accounts: Mapping[str, AccountState]


@dataclass
class Trajectory:
    account_ids: list[str]
    rows: list[TrajectoryRow]
    final: LedgerState

    @property
    def cum_pnl(self) -> dict[str, Exact]:
        return {a: s.cum_pnl for a, s in self.final.accounts.items()}

    @property
    def positions(self) -> dict[str, int]:
        return {a: s.net_position for a, s in self.final.accounts.items()}


def check_fills(fills: Sequence[Fill]) -> None:
    for prev, cur in zip(fills, fills[1:]):
        if cur.seq <= prev.seq:
            raise LedgerError("seq must be strictly increasing", cur.seq)
        if cur.day < prev.day:
            raise LedgerError("day must not decrease", cur.seq)


def replay(fills: Sequence[Fill], allocations: Sequence[AllocationVector],
           accounts: Sequence[Account]) -> Trajectory:
    """Drive the ledger with a fixed allocation per fill."""
    if len(fills) != len(allocations):
        raise LedgerError(
            f"{len(fills)} fills but {len(allocations)} allocations")
    check_fills(fills)
    ids = [a.id for a in accounts]
    state = LedgerState.open(ids)
    rows = []
    for fill, alloc in zip(fills, allocations):
        state = apply_fill(state, fill, alloc)
        rows.append(TrajectoryRow(fill.seq, fill.day, fill.price, fill.qty,
                                  state.fund, dict(alloc.parts), state.accounts))
    return Trajectory(ids, rows, state)


def fund_trajectory(fills: Sequence[Fill]) -> Trajectory:
    if not fills:
        raise LedgerError("no fills")
    check_fills(fills)
    state = LedgerState.open()
    rows = []
    for fill in fills:
        state = apply_fill(state, fill)
        rows.append(TrajectoryRow(fill.seq, fill.day, fill.price, fill.qty,
                                  state.fund, {}, {}))
    return Trajectory([], rows, state)


def cash_flow(trades: Iterable[tuple]) -> Exact:
    """Sell notional minus buy notional for ``(price, signed qty)`` pairs."""
    return -sum(p * q for p, q in trades)
