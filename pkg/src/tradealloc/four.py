"""Fair optimal unbiased rounding (FOUR).

For every fill, start from the proportional rounding and pick, within an L-inf
radius ``k`` of it, the sum-preserving sign-admissible integer allocation that
minimizes cross-account divergence.

Divergence of account i is measured against the fund after normalizing by its
allocation factor alpha_i:

* P&L gap       D_i = PnL - PnL_i / alpha_i
* position gap  E_i = np - np_i / alpha_i

Marking at the fill price leaves D independent of the allocation being chosen,
so candidates are ranked by:

* ``proportional`` mode: sum w_i E_i^2 after the allocation, then the projected
  P&L gap sum w_i (D_i + E_i h)^2 for a probe price move h, then L1 distance to
  the fractional targets, then the allocation vector itself (ascending).
* ``corrective`` mode: the projected P&L gap first, then the same tiebreaks.

Every term is a convex function of a single account's quantity, so the best
candidate is found exactly by single-unit transfers between accounts; see
:func:`_descend`. :func:`candidates` and :func:`score` are the literal
enumerate-and-rank route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Mapping, Optional, Sequence

from .ledger import (
    MINOR_UNITS,
    Account,
    AllocationVector,
    Fill,
    LedgerState,
    check_fills,
    mark,
    to_major,
)
from .methods import Book, MethodResult
from .rounding import ResidualPolicy, allocate_fill_proportional, size_profile

MODES = ("proportional", "corrective")

# trading days per refresh; None refreshes on every fill
FREQUENCY_DAYS = {"per-fill": None, "weekly": 5, "monthly": 21, "quarterly": 63}

FLOAT_RTOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    k: int = 2
    mode: str = "proportional"
    probe: Optional[Decimal] = None
    nmax: int = 12
    max_iterations: Optional[int] = None
    weights: bool = False
    weight_frequency: str = "per-fill"

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.probe is not None and Decimal(str(self.probe)) <= 0:
            raise ValueError("probe must be positive")
        if self.nmax < 1:
            raise ValueError("nmax must be positive")
        if self.weight_frequency not in FREQUENCY_DAYS:
            raise ValueError(f"weight frequency must be one of {list(FREQUENCY_DAYS)}")


@dataclass(frozen=True)
class DivergenceState:
    """Normalized gaps per account. Money in currency units, exact."""

    pnl_gaps: Mapping[str, Fraction]
    position_gaps: Mapping[str, Fraction]
    q: Fraction
    fund_return: Fraction
    account_returns: Mapping[str, Fraction]
    total_aum: Fraction

    @property
    def q_return(self) -> Fraction:
        """Q in return form, sum (r - r_i)^2."""
        return self.q / self.total_aum ** 2

    @property
    def abs_return_gap(self) -> Fraction:
        return sum(abs(self.fund_return - r) for r in self.account_returns.values())


def divergence(state: LedgerState, accounts: Sequence[Account]) -> DivergenceState:
    fund_pnl = to_major(state.fund.cum_pnl)
    fund_np = state.fund.net_position
    total = sum(Fraction(a.aum) for a in accounts)
    d, e, r = {}, {}, {}
    for a in accounts:
        s = state.accounts[a.id]
        pnl = to_major(s.cum_pnl)
        d[a.id] = fund_pnl - pnl / a.alpha
        e[a.id] = fund_np - s.net_position / a.alpha
        r[a.id] = pnl / Fraction(a.aum)
    q = sum(x * x for x in d.values())
    return DivergenceState(d, e, q, fund_pnl / total, r, total)


@dataclass(frozen=True)
class ReinforcementWeights:
    deltas: Mapping[str, float]
    weights: Mapping[str, float]
    frequency: str = "per-fill"


def softmax(values: Sequence[float]) -> list[float]:
    top = max(values)
    ex = [math.exp(v - top) for v in values]
    total = math.fsum(ex)
    return [x / total for x in ex]


def reinforcement_weights(state: LedgerState, accounts: Sequence[Account],
                          frequency: str = "per-fill") -> ReinforcementWeights:
    """Softmax of each account's absolute return gap to the fund."""
    div = divergence(state, accounts)
    deltas = {a.id: float(abs(div.fund_return - div.account_returns[a.id])) for a in accounts}
    w = softmax(list(deltas.values()))
    return ReinforcementWeights(deltas, dict(zip(deltas, w)), frequency)


class WeightSchedule:
    """Holds reinforcement weights constant between refreshes.

    Calendar frequencies refresh on the first fill of a new block of trading
    days (5 per week, 21 per month, 63 per quarter).
    """

    def __init__(self, accounts: Sequence[Account], frequency: str = "per-fill"):
        if frequency not in FREQUENCY_DAYS:
            raise ValueError(f"unknown weight frequency {frequency!r}")
        self.accounts = list(accounts)
        self.frequency = frequency
        self._bucket = None
        self.current: Optional[ReinforcementWeights] = None

    def weights_for(self, fill: Fill, marked: LedgerState) -> ReinforcementWeights:
        days = FREQUENCY_DAYS[self.frequency]
        bucket = None if days is None else (fill.day - 1) // days
        if self.current is None or days is None or bucket != self._bucket:
            self._bucket = bucket
            self.current = reinforcement_weights(marked, self.accounts, self.frequency)
        return self.current


def _probe_minor(fill: Fill, state: LedgerState, config: SearchConfig) -> Fraction:
    if config.probe is not None:
        return Fraction(Decimal(str(config.probe))) * MINOR_UNITS
    if state.last_price is not None and state.last_price != fill.price:
        return Fraction(abs(fill.price - state.last_price))
    return Fraction(fill.price, 100)


def _bounds(base: Sequence[int], qty: int, k: int) -> tuple[list[int], list[int]]:
    if qty > 0:
        return [max(b - k, 0) for b in base], [b + k for b in base]
    return [b - k for b in base], [min(b + k, 0) for b in base]


def _enumerate(lo, hi, total):
    n = len(lo)
    # suffix sums bound what the remaining accounts can absorb
    slo = [0] * (n + 1)
    shi = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        slo[i] = slo[i + 1] + lo[i]
        shi[i] = shi[i + 1] + hi[i]
    out = []
    vec = [0] * n

    def rec(i, rest):
        if i == n:
            if rest == 0:
                out.append(tuple(vec))
            return
        for x in range(max(lo[i], rest - shi[i + 1]), min(hi[i], rest - slo[i + 1]) + 1):
            vec[i] = x
            rec(i + 1, rest - x)

    rec(0, total)
    return out


def candidates(fill: Fill, base: AllocationVector,
               config: SearchConfig = SearchConfig()) -> list[AllocationVector]:
    """Admissible allocations within ``config.k`` of ``base``.

    Above ``config.nmax`` accounts only the single-unit transfer
    neighborhood of ``base`` is returned.
    """
    ids = list(base.parts)
    b = [base.parts[a] for a in ids]
    lo, hi = _bounds(b, fill.qty, config.k)
    if len(ids) <= config.nmax:
        vecs = _enumerate(lo, hi, fill.qty)
    else:
        vecs = {tuple(b)}
        for i in range(len(b)):
            for j in range(len(b)):
                if i != j and b[i] - 1 >= lo[i] and b[j] + 1 <= hi[j]:
                    v = list(b)
                    v[i] -= 1
                    v[j] += 1
                    vecs.add(tuple(v))
        vecs = sorted(vecs)
    return [AllocationVector(fill.seq, dict(zip(ids, v))) for v in vecs]


def score(candidate: AllocationVector, fill: Fill, state: LedgerState,
          accounts: Sequence[Account], config: SearchConfig = SearchConfig(),
          weights: Optional[ReinforcementWeights] = None) -> tuple:
    """Ranking key of ``candidate`` for ``fill`` given the pre-fill ``state``.

    Exact rationals unless ``weights`` are supplied. Smaller is better.
    """
    marked = mark(state, fill.price)
    div = divergence(marked, accounts)
    np_after = marked.fund.net_position + fill.qty
    h = _probe_minor(fill, state, config) / MINOR_UNITS
    gap = Fraction(0)
    projected = Fraction(0)
    l1 = Fraction(0)
    for a in accounts:
        w = 1 if weights is None else weights.weights[a.id]
        v = candidate.parts[a.id]
        e = np_after - (marked.accounts[a.id].net_position + v) / a.alpha
        gap += w * e * e
        projected += w * (div.pnl_gaps[a.id] + e * h) ** 2
        l1 += abs(v - a.alpha * fill.qty)
    vec = tuple(candidate.parts[a.id] for a in accounts)
    if config.mode == "corrective":
        return (projected, l1, vec)
    return (gap, projected, l1, vec)


@lru_cache(maxsize=256)
def _cofactors(sizes: tuple[int, ...]) -> list[int]:
    """Squared cofactors bringing every 1/size^2 to a common scale."""
    common = 1
    for s in sizes:
        common = lcm(common, s)
    return [(common // s) ** 2 for s in sizes]


def _cost_function(fill: Fill, marked: LedgerState, accounts: Sequence[Account],
                   config: SearchConfig, probe: Fraction,
                   weights: Optional[ReinforcementWeights]):
    """Per-account cost tuple, a monotone rescaling of the :func:`score` terms.

    Exact integers without weights, floats with them.
    """
    prof = size_profile([a.alpha for a in accounts])
    sizes, total, cof = prof.sizes, prof.den, _cofactors(prof.sizes)
    qty = fill.qty
    np_after = marked.fund.net_position + qty
    fund_pnl = marked.fund.cum_pnl
    held = [marked.accounts[a.id].net_position for a in accounts]
    pnl_term = [fund_pnl * s - marked.accounts[a.id].cum_pnl * total
                for a, s in zip(accounts, sizes)]
    hn, hd = probe.numerator, probe.denominator
    corrective = config.mode == "corrective"

    if weights is None:
        def cost(i, v):
            s = sizes[i]
            x = np_after * s - (held[i] + v) * total
            y = pnl_term[i] * hd + x * hn
            t = abs(total * v - s * qty)
            if corrective:
                return (y * y * cof[i], t)
            return (x * x * cof[i], y * y * cof[i], t)
        return cost

    w = [weights.weights[a.id] for a in accounts]

    def cost(i, v):
        s = sizes[i]
        x = np_after * s - (held[i] + v) * total
        y = (pnl_term[i] * hd + x * hn) / (s * hd)
        t = abs(total * v - s * qty) / total
        if corrective:
            return (w[i] * y * y, t)
        return (w[i] * (x / s) ** 2, w[i] * y * y, t)
    return cost


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _sign(delta, scale, exact) -> int:
    """Lexicographic sign; float components within tolerance count as zero."""
    for m, d in enumerate(delta):
        if not exact and abs(d) <= FLOAT_RTOL * scale[m]:
            continue
        if d:
            return -1 if d < 0 else 1
    return 0


def _descend(cost, v: list[int], lo: Sequence[int], hi: Sequence[int],
             exact: bool, max_iter: Optional[int]) -> list[int]:
    """Minimize sum_i cost(i, v_i) subject to a fixed sum and box bounds.

    Steepest single-unit transfers until none improves. For costs convex in
    each coordinate that point is a global minimum. Zero-cost transfers from
    an earlier to a later account then pick the smallest optimal vector.
    """
    n = len(v)
    cur = [cost(i, v[i]) for i in range(n)]

    def up(i):
        return _sub(cost(i, v[i] + 1), cur[i]) if v[i] < hi[i] else None

    def down(i):
        return _sub(cost(i, v[i] - 1), cur[i]) if v[i] > lo[i] else None

    ups = [up(i) for i in range(n)]
    downs = [down(i) for i in range(n)]

    def scale():
        if exact:
            return ()
        return [sum(abs(c[m]) for c in cur) for m in range(len(cur[0]))]

    def move(i, j):
        v[i] -= 1
        v[j] += 1
        for x in (i, j):
            cur[x] = cost(x, v[x])
            ups[x] = up(x)
            downs[x] = down(x)

    steps = 0
    while max_iter is None or steps < max_iter:
        best_up = sorted((u, j) for j, u in enumerate(ups) if u is not None)[:2]
        best_down = sorted((d, i) for i, d in enumerate(downs) if d is not None)[:2]
        best = None
        for d, i in best_down:
            for u, j in best_up:
                if i != j:
                    total = _add(u, d)
                    if best is None or total < best[0]:
                        best = (total, i, j)
        if best is None or _sign(best[0], scale(), exact) >= 0:
            break
        move(best[1], best[2])
        steps += 1

    moved = True
    while moved and (max_iter is None or steps < max_iter):
        moved = False
        sc = scale()
        for i in range(n):
            if downs[i] is None:
                continue
            for j in range(i + 1, n):
                if ups[j] is not None and _sign(_add(ups[j], downs[i]), sc, exact) == 0:
                    move(i, j)
                    steps += 1
                    moved = True
                    break
            if moved:
                break
    return v


def allocate_fill_four(fill: Fill, state: LedgerState, accounts: Sequence[Account],
                       config: SearchConfig = SearchConfig(),
                       weights: Optional[ReinforcementWeights] = None,
                       policy: Optional[ResidualPolicy] = None) -> AllocationVector:
    """Best admissible allocation of ``fill`` given the pre-fill ``state``."""
    if len(accounts) == 1:
        return AllocationVector(fill.seq, {accounts[0].id: fill.qty})
    base = allocate_fill_proportional(fill, accounts, policy)
    if config.k == 0:
        return base
    ids = [a.id for a in accounts]
    v = [base.parts[a] for a in ids]
    lo, hi = _bounds(v, fill.qty, config.k)
    marked = mark(state, fill.price)
    cost = _cost_function(fill, marked, accounts, config,
                          _probe_minor(fill, state, config), weights)
    n = len(ids)
    max_iter = None if n <= config.nmax else (config.max_iterations or n * n)
    v = _descend(cost, v, lo, hi, weights is None, max_iter)
    return AllocationVector(fill.seq, dict(zip(ids, v)))


def run_four(fills: Sequence[Fill], accounts: Sequence[Account],
             config: SearchConfig = SearchConfig(),
             policy: Optional[ResidualPolicy] = None,
             record: bool = True) -> MethodResult:
    check_fills(fills)
    book = Book(accounts, record)
    schedule = WeightSchedule(accounts, config.weight_frequency) if config.weights else None
    for fill in fills:
        weights = None
        if schedule is not None:
            weights = schedule.weights_for(fill, mark(book.state, fill.price))
        book.book(fill, allocate_fill_four(fill, book.state, accounts, config, weights, policy))
    result = book.result("four")
    result.extras["config"] = config
    return result
