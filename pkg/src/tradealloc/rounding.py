"""Sum-preserving integer rounding of proportional allocation targets.

Each target is rounded half away from zero. If the rounded parts miss the
total, the parts with the largest rounding error in the needed direction are
moved by one unit (largest-remainder rule); equal errors are ordered by a
residual policy.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Mapping, Optional, Sequence, Union

from .ledger import Account, AllocationVector, Fill


@dataclass(frozen=True)
class FractionalTarget:
    quantity: int
    targets: Mapping[str, Fraction]

    def __post_init__(self):
        if sum(self.targets.values()) != self.quantity:
            raise ValueError("targets do not sum to the quantity")


def fractional_targets(quantity: int, accounts: Sequence[Account]) -> FractionalTarget:
    return FractionalTarget(quantity, {a.id: a.alpha * quantity for a in accounts})


class ResidualPolicy:
    """Decides which accounts absorb the +/-1 adjustments on ties.

    ``order`` returns account indices, highest priority first. The highest
    priority account keeps a round-up and receives a needed extra unit.
    """

    name = "policy"

    def order(self, alphas: Sequence[Fraction], day: Optional[int] = None) -> list[int]:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True)
class SizeProfile:
    """Allocation factors as integers ``sizes[i] / den`` plus the size ranking."""

    alphas: tuple[Fraction, ...]
    sizes: tuple[int, ...]
    den: int
    by_size: tuple[int, ...]


@lru_cache(maxsize=256)
def _profile(key: tuple[tuple[int, int], ...]) -> SizeProfile:
    alphas = tuple(Fraction(n, d) for n, d in key)
    den = 1
    for a in alphas:
        den = lcm(den, a.denominator)
    order = tuple(sorted(range(len(alphas)), key=lambda i: (-alphas[i], i)))
    return SizeProfile(alphas, tuple(int(a * den) for a in alphas), den, order)


def size_profile(alphas: Sequence[Fraction]) -> SizeProfile:
    return _profile(tuple((a.numerator, a.denominator) for a in alphas))


def _by_size(alphas: Sequence[Fraction]) -> list[int]:
    return list(size_profile(alphas).by_size)


class LargestAccount(ResidualPolicy):
    name = "largest"

    def order(self, alphas, day=None):
        return _by_size(alphas)


_CYCLE_DAYS = {"day": 1, "week": 5}


class Rotation(ResidualPolicy):
    """Rotate first priority through the accounts, largest first.

    ``cycle`` is ``"fill"`` (advance on every call), ``"day"``, ``"week"`` or a
    number of trading days.
    """

    name = "rotation"

    def __init__(self, cycle: Union[str, int] = "day"):
        if cycle != "fill" and not isinstance(cycle, int) and cycle not in _CYCLE_DAYS:
            raise ValueError(f"unknown rotation cycle {cycle!r}")
        if isinstance(cycle, int) and cycle < 1:
            raise ValueError("rotation cycle must be at least one day")
        self.cycle = cycle
        self.cursor = -1
        self._bucket = None

    def _advance(self, day):
        if self.cycle == "fill" or day is None:
            self.cursor += 1
            return
        days = self.cycle if isinstance(self.cycle, int) else _CYCLE_DAYS[self.cycle]
        bucket = (day - 1) // days
        if bucket != self._bucket:
            self._bucket = bucket
            self.cursor += 1

    def order(self, alphas, day=None):
        self._advance(day)
        base = _by_size(alphas)
        k = self.cursor % len(base)
        return base[k:] + base[:k]

    def describe(self):
        return {"name": self.name, "cycle": self.cycle}


class RandomOrder(ResidualPolicy):
    """A fresh seeded random priority order on every call."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._rng = random.Random(self.seed)

    def order(self, alphas, day=None):
        idx = list(range(len(alphas)))
        self._rng.shuffle(idx)
        return idx

    def describe(self):
        return {"name": self.name, "seed": self.seed}


def make_policy(name: str = "largest", cycle: Union[str, int] = "day",
                seed: int = 0) -> ResidualPolicy:
    if name == "largest":
        return LargestAccount()
    if name == "rotation":
        return Rotation(cycle)
    if name == "random":
        return RandomOrder(seed)
    raise ValueError(f"unknown residual policy {name!r}")


def round_scaled(nums: Sequence[int], den: int, total: int, order: Sequence[int]) -> list[int]:
    """Round ``nums[i] / den`` (summing to ``total``) to integers with the same sum.

    All numerators must share the sign of ``total``; no part crosses zero.
    """
    sign = -1 if total < 0 else 1
    mags = [n * sign for n in nums]
    rounded = [(2 * m + den) // (2 * den) for m in mags]
    excess = sum(rounded) - total * sign
    if excess:
        rank = {i: r for r, i in enumerate(order)}
        # shortfall of each part in units of 1/den; negative when rounded up
        short = [m - r * den for m, r in zip(mags, rounded)]
        if excess > 0:
            # most over-rounded first; on ties the lowest priority gives back
            pick = sorted((i for i in range(len(mags)) if short[i] < 0),
                          key=lambda i: (short[i], -rank[i]))
            for i in pick[:excess]:
                rounded[i] -= 1
        else:
            pick = sorted((i for i in range(len(mags)) if short[i] > 0),
                          key=lambda i: (-short[i], rank[i]))
            for i in pick[:-excess]:
                rounded[i] += 1
    return [r * sign for r in rounded]


def round_values(values: Sequence[Fraction], total: int, order: Sequence[int]) -> list[int]:
    den = 1
    for v in values:
        den = lcm(den, Fraction(v).denominator)
    return round_scaled([int(v * den) for v in values], den, total, order)


def round_sum_preserving(targets: FractionalTarget,
                         policy: Optional[ResidualPolicy] = None,
                         alphas: Optional[Sequence[Fraction]] = None,
                         day: Optional[int] = None) -> dict[str, int]:
    """Round a :class:`FractionalTarget` to integers preserving its sum.

    ``alphas`` (defaulting to the targets' proportions) rank accounts for the
    residual policy.
    """
    policy = policy or LargestAccount()
    ids = list(targets.targets)
    values = [targets.targets[a] for a in ids]
    if alphas is None:
        alphas = [v / targets.quantity for v in values] if targets.quantity else [Fraction(1)] * len(ids)
    parts = round_values(values, targets.quantity, policy.order(alphas, day))
    return dict(zip(ids, parts))


def allocate_fill_proportional(fill: Fill, accounts: Sequence[Account],
                               policy: Optional[ResidualPolicy] = None) -> AllocationVector:
    policy = policy or LargestAccount()
    prof = size_profile([a.alpha for a in accounts])
    parts = round_scaled([s * fill.qty for s in prof.sizes], prof.den, fill.qty,
                         policy.order(prof.alphas, fill.day))
    return AllocationVector(fill.seq, {a.id: p for a, p in zip(accounts, parts)})
