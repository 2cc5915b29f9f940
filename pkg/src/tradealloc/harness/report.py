"""Method dispatch, comparison reports and their JSON/CSV rendering.

Reports hold already-rendered text values: currency at 2 decimals, average
prices at 4 decimals (both rounded half away from zero from the exact
values) and divergence Q in scientific notation. A JSON report therefore
loads back into an equal report.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from ..four import divergence, run_four
from ..ledger import Account, AllocationVector, Exact, Fill, LedgerState, MINOR_UNITS
from ..methods import MethodResult, result_from_allocations, run_aps, run_hpha, run_simple_rounding
from .config import Config, config_to_dict

METHODS = ("simple", "hpha", "aps", "four")
FORMATS = ("json", "csv")


def run_method(name: str, fills: Sequence[Fill], accounts: Sequence[Account],
               config: Config = Config(), record: bool = True) -> MethodResult:
    policy = config.make_policy()
    if name == "simple":
        return run_simple_rounding(fills, accounts, policy, record)
    if name == "hpha":
        return run_hpha(fills, accounts, policy, record)
    if name == "aps":
        return run_aps(fills, accounts, policy, record)
    if name == "four":
        return run_four(fills, accounts, config.four, policy, record)
    raise ValueError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")


def _fixed(value: Fraction, places: int) -> str:
    scale = 10 ** places
    scaled = abs(value) * scale
    n = int(scaled + Fraction(1, 2))
    sign = "-" if value < 0 and n else ""
    whole, frac = divmod(n, scale)
    return f"{sign}{whole}.{frac:0{places}d}"


def money(minor: Exact) -> str:
    """Render minor units as currency with 2 decimals."""
    return _fixed(Fraction(minor) / MINOR_UNITS, 2)


def average(minor: Fraction) -> str:
    """Render an average price (minor units) with 4 decimals."""
    return _fixed(Fraction(minor) / MINOR_UNITS, 4)


def sci(value) -> str:
    return f"{float(value):.6e}"


def q_trajectory(result: MethodResult, accounts: Sequence[Account]) -> list[Fraction]:
    """Return-form divergence after every recorded step."""
    return [divergence(LedgerState(r.fund, r.accounts, r.price), accounts).q_return
            for r in result.trajectory.rows]


def check_identities(result: MethodResult) -> None:
    """Raise if account totals differ from the fund totals."""
    if sum(result.positions.values()) != result.fund_position:
        raise AssertionError(f"{result.method}: positions do not sum to the fund")
    if sum(result.cum_pnl.values()) != result.fund_cum_pnl:
        raise AssertionError(f"{result.method}: marked P&L does not sum to the fund")
    if sum(result.cash_pnl.values()) != result.fund_cash_pnl:
        raise AssertionError(f"{result.method}: cash P&L does not sum to the fund")


@dataclass
class MethodRow:
    method: str
    variant: str
    fund_position: int
    fund_cum_pnl: str
    fund_cash_pnl: str
    positions: dict[str, int]
    cum_pnl: dict[str, str]
    cash_pnl: dict[str, str]
    terminal_q: str
    q_trajectory: list[str]


def method_row(result: MethodResult, accounts: Sequence[Account], variant: str = "") -> MethodRow:
    check_identities(result)
    qs = q_trajectory(result, accounts)
    ids = result.account_ids
    return MethodRow(
        result.method, variant, result.fund_position,
        money(result.fund_cum_pnl), money(result.fund_cash_pnl),
        {a: result.positions[a] for a in ids},
        {a: money(result.cum_pnl[a]) for a in ids},
        {a: money(result.cash_pnl[a]) for a in ids},
        sci(qs[-1] if qs else 0), [sci(q) for q in qs],
    )


def _account_rows(accounts: Sequence[Account]) -> list[dict]:
    return [{"id": a.id, "aum": str(a.aum), "alpha": f"{float(a.alpha):.6f}"}
            for a in accounts]


@dataclass
class ComparisonReport:
    kind: str
    config: dict
    accounts: list[dict]
    methods: list[MethodRow]


def compare(fills: Sequence[Fill], accounts: Sequence[Account], config: Config = Config(),
            replays: Optional[Mapping[str, Sequence[AllocationVector]]] = None
            ) -> ComparisonReport:
    """Run every method, plus one ``replay`` row per supplied allocation set."""
    rows = [method_row(run_method(m, fills, accounts, config), accounts) for m in METHODS]
    for name, allocs in (replays or {}).items():
        result = result_from_allocations("replay", fills, accounts, allocs)
        rows.append(method_row(result, accounts, name))
    return ComparisonReport("comparison", config_to_dict(config), _account_rows(accounts), rows)


@dataclass
class RunReport:
    kind: str
    config: dict
    accounts: list[dict]
    summary: MethodRow
    steps: list[dict] = field(default_factory=list)
    batches: list[dict] = field(default_factory=list)


def run_report(result: MethodResult, accounts: Sequence[Account], config: Config,
               variant: str = "") -> RunReport:
    summary = method_row(result, accounts, variant)
    steps = []
    for row, q in zip(result.trajectory.rows, summary.q_trajectory):
        steps.append({
            "seq": row.seq, "day": row.day, "price": money(row.price), "qty": row.qty,
            "fund_position": row.fund.net_position, "fund_cum_pnl": money(row.fund.cum_pnl),
            "parts": {a: row.parts.get(a, 0) for a in result.account_ids},
            "positions": {a: row.accounts[a].net_position for a in result.account_ids},
            "cum_pnl": {a: money(row.accounts[a].cum_pnl) for a in result.account_ids},
            "q": q,
        })
    batches = [{"day": b.day, "side": b.side, "quantity": b.quantity,
                "price": average(b.price), "parts": dict(b.parts)}
               for b in result.allocations if hasattr(b, "side")]
    return RunReport("run", config_to_dict(config), _account_rows(accounts),
                     summary, steps, batches)


def _dumps(report) -> str:
    return json.dumps(asdict(report), indent=2) + "\n"


def _comparison_csv(report: ComparisonReport) -> list[list]:
    ids = [a["id"] for a in report.accounts]
    header = ["method", "variant"]
    for a in ids:
        header += [f"np_{a}", f"cum_{a}", f"cash_{a}"]
    header += ["fund_np", "fund_cum", "fund_cash", "terminal_q"]
    out = [header]
    for r in report.methods:
        line = [r.method, r.variant]
        for a in ids:
            line += [r.positions[a], r.cum_pnl[a], r.cash_pnl[a]]
        line += [r.fund_position, r.fund_cum_pnl, r.fund_cash_pnl, r.terminal_q]
        out.append(line)
    return out


def _run_csv(report: RunReport) -> list[list]:
    ids = [a["id"] for a in report.accounts]
    header = ["seq", "day", "price", "qty", "fund_np", "fund_cum"]
    for a in ids:
        header += [f"q_{a}", f"np_{a}", f"cum_{a}"]
    header.append("Q")
    out = [header]
    for s in report.steps:
        line = [s["seq"], s["day"], s["price"], s["qty"], s["fund_position"], s["fund_cum_pnl"]]
        for a in ids:
            line += [s["parts"][a], s["positions"][a], s["cum_pnl"][a]]
        line.append(s["q"])
        out.append(line)
    return out


def _simulation_csv(report) -> list[list]:
    stats = ["mean", "max", "q50", "q90", "q99"]
    out = [["method", "metric", *stats, "wins", "losses", "ties", "p_value"]]
    for m, metrics in report.methods.items():
        test = report.sign_tests.get(m, {})
        for metric, values in metrics.items():
            out.append([m, metric, *(values[k] for k in stats),
                        *(test.get(k, "") for k in ("wins", "losses", "ties", "p_value"))])
    return out


_CSV = {"comparison": _comparison_csv, "run": _run_csv, "simulation": _simulation_csv}


def emit_report(report, path=None, fmt: str = "json") -> str:
    """Render ``report`` and write it to ``path`` when given; returns the text."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if fmt == "json":
        text = _dumps(report)
    else:
        rows = _CSV[report.kind](report)
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _row(data: dict) -> MethodRow:
    return MethodRow(**{f.name: data[f.name] for f in fields(MethodRow)})


def report_from_dict(data: dict):
    if data.get("kind") == "comparison":
        return ComparisonReport("comparison", data["config"], data["accounts"],
                                [_row(m) for m in data["methods"]])
    if data.get("kind") == "run":
        return RunReport("run", data["config"], data["accounts"], _row(data["summary"]),
                         data["steps"], data["batches"])
    if data.get("kind") == "simulation":
        from .simulate import SimReport
        return SimReport(**data)
    raise ValueError(f"unknown report kind {data.get('kind')!r}")


def load_report(path):
    return report_from_dict(json.loads(Path(path).read_text()))
