"""Seeded Monte Carlo comparison of allocation methods on synthetic blotters.

Each scenario draws its own account AUMs, an integer-tick price random walk
and signed fill quantities from ``numpy.random.default_rng([seed, index])``,
so any scenario can be regenerated on its own. Every method runs on the same
scenario; terminal divergence is measured on marked-to-market P&L.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml
from scipy.stats import binomtest

from ..four import divergence
from ..ledger import Account, AccountState, Fill, LedgerState, make_accounts, to_minor
from ..methods import MethodResult
from .config import Config, config_to_dict
from .io import InputError
from .report import METHODS, check_identities, run_method

QUANTILES = (0.5, 0.9, 0.99)
AUM_DISTRIBUTIONS = ("log-skewed", "uniform")


@dataclass(frozen=True)
class SimSpec:
    scenarios: int = 500
    fills: int = 200
    accounts: int = 10
    aum: str = "log-skewed"
    aum_min: int = 100_000
    aum_max: int = 10_000_000
    start_price: str = "100"
    tick: str = "0.25"
    max_step_ticks: int = 4
    qty_min: int = 1
    qty_max: int = 50
    fills_per_day: int = 10
    flatten: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.scenarios < 1:
            raise ValueError("scenarios must be at least 1")
        if self.fills < 1 or self.accounts < 1 or self.fills_per_day < 1:
            raise ValueError("fills, accounts and fills_per_day must be positive")
        if self.aum not in AUM_DISTRIBUTIONS:
            raise ValueError(f"aum must be one of {AUM_DISTRIBUTIONS}")
        if not 1000 <= self.aum_min <= self.aum_max:
            raise ValueError("need 1000 <= aum_min <= aum_max")
        if not 1 <= self.qty_min <= self.qty_max:
            raise ValueError("need 1 <= qty_min <= qty_max")
        if self.max_step_ticks < 0:
            raise ValueError("max_step_ticks must be non-negative")
        if to_minor(self.tick) <= 0 or to_minor(self.start_price) <= 0:
            raise ValueError("tick and start_price must be positive")

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "SimSpec":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown simulation keys {sorted(unknown)}")
        for key in ("start_price", "tick"):
            if key in data:
                data[key] = str(data[key])
        return cls(**data)


def load_spec(path=None, **overrides) -> SimSpec:
    """Read a YAML spec; keyword overrides that are not None take precedence."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise InputError(str(exc.strerror or exc), path) from None
        except yaml.YAMLError as exc:
            raise InputError(f"invalid simulation spec: {exc}", path) from None
    if not isinstance(data, dict):
        raise InputError("simulation spec must be a mapping", path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimSpec.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc), path) from None


def generate_scenario(spec: SimSpec, index: int) -> tuple[list[Fill], list[Account]]:
    rng = np.random.default_rng([spec.seed, index])
    if spec.aum == "uniform":
        raw = rng.uniform(spec.aum_min, spec.aum_max, spec.accounts)
    else:
        raw = np.exp(rng.uniform(math.log(spec.aum_min), math.log(spec.aum_max), spec.accounts))
    aums = [max(1000, int(round(x / 1000)) * 1000) for x in raw]
    accounts = make_accounts([(f"A{i + 1:02d}", a) for i, a in enumerate(aums)])

    tick = to_minor(spec.tick)
    steps = rng.integers(-spec.max_step_ticks, spec.max_step_ticks + 1, spec.fills)
    sizes = rng.integers(spec.qty_min, spec.qty_max + 1, spec.fills)
    signs = rng.choice((-1, 1), spec.fills)

    price = to_minor(spec.start_price)
    qtys = [int(s * q) for s, q in zip(signs, sizes)]
    if spec.flatten and spec.fills > 1:
        net = sum(qtys[:-1])
        if net == 0:
            qtys[-2] += 1 if qtys[-2] > 0 else -1
            net = sum(qtys[:-1])
        qtys[-1] = -net
    fills = []
    for i in range(spec.fills):
        if i:
            price = max(tick, price + int(steps[i]) * tick)
        fills.append(Fill(i + 1, i // spec.fills_per_day + 1, price, qtys[i]))
    return fills, accounts


def terminal_state(result: MethodResult) -> LedgerState:
    return LedgerState(
        AccountState(result.fund_position, result.fund_cum_pnl),
        {a: AccountState(result.positions[a], result.cum_pnl[a]) for a in result.account_ids},
    )


@dataclass(frozen=True)
class ScenarioOutcome:
    index: int
    gaps: dict[str, float]
    qs: dict[str, float]
    violations: tuple[str, ...] = ()


def run_scenario(spec: SimSpec, config: Config, index: int) -> ScenarioOutcome:
    fills, accounts = generate_scenario(spec, index)
    gaps, qs, violations = {}, {}, []
    fund = None
    for m in METHODS:
        result = run_method(m, fills, accounts, config, record=False)
        try:
            check_identities(result)
        except AssertionError as exc:
            violations.append(str(exc))
        if fund is None:
            fund = (result.fund_position, result.fund_cum_pnl)
        elif fund != (result.fund_position, result.fund_cum_pnl):
            violations.append(f"{m}: fund differs across methods")
        div = divergence(terminal_state(result), accounts)
        gaps[m] = float(div.abs_return_gap)
        qs[m] = float(div.q_return)
    return ScenarioOutcome(index, gaps, qs, tuple(violations))


def _stats(values: Sequence[float]) -> dict[str, str]:
    arr = np.asarray(values, dtype=float)
    out = {"mean": arr.mean(), "max": arr.max()}
    for q in QUANTILES:
        out[f"q{round(q * 100):02d}"] = np.quantile(arr, q)
    return {k: f"{float(v):.6e}" for k, v in out.items()}


def sign_test(ours: Sequence[float], theirs: Sequence[float]) -> dict:
    """One-sided paired sign test that ``ours`` tends to be smaller."""
    wins = sum(a < b for a, b in zip(ours, theirs))
    losses = sum(a > b for a, b in zip(ours, theirs))
    n = wins + losses
    p = binomtest(wins, n, 0.5, alternative="greater").pvalue if n else 1.0
    return {"wins": wins, "losses": losses, "ties": len(ours) - n, "p_value": f"{p:.6e}"}


@dataclass
class SimReport:
    kind: str
    spec: dict
    config: dict
    methods: dict[str, dict]
    sign_tests: dict[str, dict]
    violations: list[str] = field(default_factory=list)

    def mean_gap(self, method: str) -> float:
        return float(self.methods[method]["abs_return_gap"]["mean"])


def simulate(spec: SimSpec, config: Config = Config(), jobs: int = 1) -> SimReport:
    """Run every scenario under every method and aggregate per-method statistics."""
    indices = range(spec.scenarios)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            outcomes = list(pool.map(run_scenario, [spec] * spec.scenarios,
                                     [config] * spec.scenarios, indices, chunksize=8))
    else:
        outcomes = [run_scenario(spec, config, i) for i in indices]
    gaps = {m: [o.gaps[m] for o in outcomes] for m in METHODS}
    qs = {m: [o.qs[m] for o in outcomes] for m in METHODS}
    methods = {m: {"abs_return_gap": _stats(gaps[m]), "q": _stats(qs[m])} for m in METHODS}
    tests = {m: sign_test(gaps["four"], gaps[m]) for m in METHODS if m != "four"}
    violations = [f"scenario {o.index}: {v}" for o in outcomes for v in o.violations]
    return SimReport("simulation", asdict(spec), config_to_dict(config), methods, tests, violations)
