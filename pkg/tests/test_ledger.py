from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tradealloc.ledger import (
    AllocationError,
    AllocationVector,
    Fill,
    LedgerError,
    LedgerState,
    apply_fill,
    bucket_pnl,
    cash_flow,
    check_fills,
    fund_trajectory,
    make_accounts,
    mark,
    replay,
    to_major,
    to_minor,
)


def test_to_minor_exact():
    assert to_minor("142.50") == 14250
    assert to_minor(Decimal("0.01")) == 1
    assert to_minor(100) == 10000
    assert to_major(14250) == Fraction(285, 2)


@pytest.mark.parametrize("bad", ["1.001", "abc", "NaN-ish"])
def test_to_minor_rejects(bad):
    with pytest.raises(ValueError):
        to_minor(bad)


def test_fill_validation():
    with pytest.raises(LedgerError):
        Fill(1, 1, 100, 0)
    with pytest.raises(LedgerError):
        Fill(1, 1, 0, 5)
    with pytest.raises(LedgerError):
        Fill(1, 0, 100, 5)
    assert Fill.of(3, 1, "99.75", -2) == Fill(3, 1, 9975, -2)


def test_make_accounts_exact_alpha():
    a, b, c = make_accounts({"x": 1, "y": 1, "z": 1})
    assert a.alpha == Fraction(1, 3) and a.alpha + b.alpha + c.alpha == 1
    with pytest.raises(ValueError):
        make_accounts({"x": 0})
    with pytest.raises(ValueError):
        make_accounts([("x", 1), ("x", 2)])
    with pytest.raises(ValueError):
        make_accounts({})


def test_bucket_pnl():
    assert bucket_pnl(8, 10000, 13000) == 24000
    assert bucket_pnl(-16, 11000, 8000) == 48000
    assert bucket_pnl(0, 1, 2) == 0


def test_first_fill_books_no_pnl(sample_fills):
    traj = fund_trajectory(sample_fills[:1])
    assert traj.final.fund.cum_pnl == 0
    assert traj.rows[0].fund.last_bucket_pnl is None


def test_zero_part_accounts_are_marked():
    state = LedgerState.open(["A", "B"])
    state = apply_fill(state, Fill(1, 1, 100, 2), AllocationVector(1, {"A": 1, "B": 1}))
    state = apply_fill(state, Fill(2, 1, 110, 3), AllocationVector(2, {"A": 3, "B": 0}))
    assert state.accounts["B"].cum_pnl == 10
    assert state.accounts["B"].last_bucket_pnl == 10
    assert state.accounts["A"].cum_pnl == 10


def test_mark_keeps_positions():
    state = LedgerState.open(["A"])
    state = apply_fill(state, Fill(1, 1, 100, 4), AllocationVector(1, {"A": 4}))
    marked = mark(state, 90)
    assert marked.accounts["A"].net_position == 4
    assert marked.accounts["A"].cum_pnl == -40
    assert marked.last_price == 90


def test_allocation_errors():
    state = LedgerState.open(["A", "B"])
    fill = Fill(1, 1, 100, 4)
    with pytest.raises(AllocationError, match="sum"):
        apply_fill(state, fill, AllocationVector(1, {"A": 3, "B": 0}))
    with pytest.raises(AllocationError, match="sign"):
        apply_fill(state, fill, AllocationVector(1, {"A": 5, "B": -1}))
    with pytest.raises(AllocationError, match="seq"):
        apply_fill(state, fill, AllocationVector(2, {"A": 4, "B": 0}))
    with pytest.raises(AllocationError, match="unknown"):
        apply_fill(state, fill, AllocationVector(1, {"A": 4, "C": 0}))
    with pytest.raises(AllocationError):
        apply_fill(state, fill)


def test_check_fills_ordering():
    with pytest.raises(LedgerError):
        check_fills([Fill(2, 1, 100, 1), Fill(1, 1, 100, 1)])
    with pytest.raises(LedgerError):
        check_fills([Fill(1, 2, 100, 1), Fill(2, 1, 100, 1)])
    with pytest.raises(LedgerError):
        fund_trajectory([])


def test_replay_length_mismatch(sample_fills, sample_accounts, load_allocations):
    with pytest.raises(LedgerError):
        replay(sample_fills, load_allocations("trial1")[:-1], sample_accounts)


def test_closed_book_equals_cash_flow(sample_fills):
    traj = fund_trajectory(sample_fills)
    assert traj.final.fund.net_position == 0
    assert traj.final.fund.cum_pnl == cash_flow((f.price, f.qty) for f in sample_fills)


fills_strategy = st.lists(
    st.tuples(st.integers(1, 20000), st.integers(-30, 30).filter(bool), st.booleans()),
    min_size=1, max_size=15)


def _build(raw):
    fills, day = [], 1
    for seq, (price, qty, new_day) in enumerate(raw, 1):
        day += new_day
        fills.append(Fill(seq, day, price, qty))
    return fills


@given(fills_strategy, st.data())
def test_ledger_matches_cash_oracle(raw, data):
    fills = _build(raw)
    ids = ["A", "B", "C"]
    parts = []
    for f in fills:
        a = data.draw(st.integers(0, abs(f.qty)))
        b = data.draw(st.integers(0, abs(f.qty) - a))
        s = 1 if f.qty > 0 else -1
        parts.append({"A": s * a, "B": s * b, "C": f.qty - s * (a + b)})
    accounts = make_accounts({i: 1 for i in ids})
    traj = replay(fills, [AllocationVector(f.seq, p) for f, p in zip(fills, parts)], accounts)
    accts, fund = oracles.cash_mark(fills, parts, ids)
    for a in ids:
        assert (traj.positions[a], traj.cum_pnl[a]) == accts[a]
    assert (traj.final.fund.net_position, traj.final.fund.cum_pnl) == fund
    assert sum(traj.cum_pnl.values()) == traj.final.fund.cum_pnl
    assert [r.fund.cum_pnl for r in fund_trajectory(fills).rows] == oracles.fund_cum_series(fills)
