"""Acceptance criteria 1-10. Each test carries a ``criterion`` marker; the
terminal summary prints one PASS/FAIL line per criterion."""

import json
import os
import random
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

import oracles
from tradealloc import (
    LedgerState,
    SearchConfig,
    allocate_fill_four,
    allocate_fill_proportional,
    apply_fill,
    divergence,
    fund_trajectory,
    make_accounts,
    mark,
    reinforcement_weights,
    replay,
    replay_aps,
    run_aps,
    run_four,
    run_hpha,
    run_simple_rounding,
    score,
)
from tradealloc.harness.report import money
from tradealloc.harness.simulate import SimSpec, simulate
from tradealloc.ledger import Fill

GOLDEN = json.loads((Path(__file__).parent / "data" / "sample_golden.json").read_text())
IDS = ("A", "B")


def best_time(fn, repeat=20):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def rendered(values):
    return [money(values[a]) for a in IDS]


@pytest.mark.criterion(1, "fund ledger trajectory, corrected 7th row, exact, < 1 ms")
def test_fund_ledger_golden(sample_fills):
    traj = fund_trajectory(sample_fills)
    expected = GOLDEN["fund"]
    assert [r.fund.net_position for r in traj.rows] == expected["net_position"]
    assert [r.fund.last_bucket_pnl for r in traj.rows] == [
        None if b is None else b * 100 for b in expected["bucket_pnl"]]
    assert [r.fund.cum_pnl for r in traj.rows] == [c * 100 for c in expected["cum_pnl"]]
    assert traj.rows[6].fund.last_bucket_pnl == 6000 and traj.rows[6].fund.cum_pnl == 52000
    assert traj.final.fund.net_position == 0 and traj.final.fund.cum_pnl == 100000
    assert all(type(r.fund.cum_pnl) is int for r in traj.rows)
    assert oracles.fund_cum_series(sample_fills) == [r.fund.cum_pnl for r in traj.rows]
    assert best_time(lambda: fund_trajectory(sample_fills)) < 1e-3


@pytest.mark.criterion(2, "simple rounding: cum (960, 40), positions (-2, +2)")
def test_simple_rounding_golden(sample_fills, sample_accounts):
    res = run_simple_rounding(sample_fills, sample_accounts)
    got = [[a.parts["A"], a.parts["B"]] for a in res.allocations]
    assert got == GOLDEN["simple"]["allocations"]
    assert [res.positions[a] for a in IDS] == [-2, 2]
    assert [res.cum_pnl[a] for a in IDS] == [96000, 4000]
    parts = [dict(a.parts) for a in res.allocations]
    accts, fund = oracles.cash_mark(sample_fills, parts, IDS)
    assert accts == {"A": (-2, 96000), "B": (2, 4000)} and fund == (0, 100000)


@pytest.mark.criterion(3, "replays: (860, 140) flat and (900, 100) flat")
def test_replay_golden(sample_fills, sample_accounts, load_allocations):
    for name, cum in (("trial1", [86000, 14000]), ("trial2", [90000, 10000])):
        traj = replay(sample_fills, load_allocations(name), sample_accounts)
        assert [traj.cum_pnl[a] for a in IDS] == cum
        assert [traj.positions[a] for a in IDS] == [0, 0]
        assert traj.final.fund.cum_pnl == 100000
        parts = [dict(a.parts) for a in load_allocations(name)]
        accts, _ = oracles.cash_mark(sample_fills, parts, IDS)
        assert [accts[a] for a in IDS] == [(0, cum[0]), (0, cum[1])]


@pytest.mark.criterion(4, "HPHA: (1010, -10), positions (-1, +1)")
def test_hpha_golden(sample_fills, sample_accounts):
    res = run_hpha(sample_fills, sample_accounts)
    assert [res.cash_pnl[a] for a in IDS] == [101000, -1000]
    assert [res.positions[a] for a in IDS] == GOLDEN["hpha"]["positions"]
    assert rendered(res.cum_pnl) == GOLDEN["hpha"]["cum_pnl"]
    parts = [dict(a.parts) for a in res.allocations]
    accts, _ = oracles.cash_mark(sample_fills, parts, IDS)
    assert [accts[a][1] for a in IDS] == [93000, 7000]


@pytest.mark.criterion(5, "APS: exact averages, (1011.48, -11.48) within 0.01")
def test_aps_golden(sample_fills, sample_accounts):
    res = run_aps(sample_fills, sample_accounts)
    averages = {f"{b.day}/{b.side}": b.price / 100 for b in res.allocations}
    assert averages == {k: Fraction(v) for k, v in GOLDEN["aps"]["averages"].items()}
    assert averages["1/sell"] == Fraction(2000, 14) and averages["2/sell"] == Fraction(1340, 12)
    parts = {f"{b.day}/{b.side}": [b.parts[a] for a in IDS] for b in res.allocations}
    assert parts == GOLDEN["aps"]["side_parts"]
    expected = [Fraction(101148, 100), Fraction(-1148, 100)]
    for a, want in zip(IDS, expected):
        assert abs(Fraction(res.cash_pnl[a]) / 100 - want) <= Fraction(1, 100)
    assert rendered(res.cash_pnl) == GOLDEN["aps"]["cash_pnl"]
    assert [res.positions[a] for a in IDS] == [-1, 1]
    assert sum(res.cash_pnl.values()) == 100000


@pytest.mark.criterion(6, "FOUR k=2: full allocation sequence, (900, 100) flat, < 10 ms")
def test_four_golden(sample_fills, sample_accounts):
    res = run_four(sample_fills, sample_accounts, SearchConfig(k=2, mode="proportional"))
    got = [[a.parts["A"], a.parts["B"]] for a in res.allocations]
    assert got == GOLDEN["four"]["allocations"]
    assert [res.cum_pnl[a] for a in IDS] == [90000, 10000]
    assert [res.positions[a] for a in IDS] == [0, 0]
    elapsed = best_time(lambda: run_four(sample_fills, sample_accounts, record=False))
    assert elapsed < 10e-3


@pytest.mark.criterion(7, "exhaustive search: minimum terminal Q = 0, FOUR attains it, < 60 s")
def test_brute_force_oracle(sample_fills, sample_accounts):
    t = time.perf_counter()
    q_min, sequences, _ = oracles.enumerate_sequences_min_q(sample_fills, Fraction(1, 10))
    elapsed = time.perf_counter() - t
    assert sequences == 9 * 3 * 5 * 11 * 5 * 5 * 5 * 17
    assert q_min == 0
    q_dp, _ = oracles.min_terminal_q_two_accounts(sample_fills, Fraction(1, 10))
    assert q_dp == 0
    res = run_four(sample_fills, sample_accounts)
    assert divergence(res.trajectory.final, sample_accounts).q == 0
    assert elapsed < 60


def _random_blotter(rng, n_accounts):
    accounts = make_accounts([(f"a{i}", rng.randint(1, 200) * 1000) for i in range(n_accounts)])
    fills, price, day = [], rng.randint(2000, 20000), 1
    for seq in range(1, rng.randint(1, 10) + 1):
        price = max(1, price + rng.randint(-500, 500))
        day += rng.random() < 0.3
        qty = rng.choice((-1, 1)) * rng.randint(1, 40)
        fills.append(Fill(seq, day, price, qty))
    return fills, accounts


def _not_worse(a, b, rtol=1e-9):
    """Lexicographic a <= b; float components equal within ``rtol``."""
    for x, y in zip(a, b):
        if isinstance(x, float) or isinstance(y, float):
            if abs(x - y) <= rtol * max(abs(x), abs(y)):
                continue
        if x != y:
            return x < y
    return True


@pytest.mark.criterion(8, "1000 random blotters: sum, sign, identities, dominance; zero violations")
def test_property_suite():
    rng = random.Random(20240601)
    violations = []
    for case in range(1000):
        n = rng.randint(2, 10)
        k = rng.randint(0, 3)
        mode = "corrective" if case % 5 == 4 else "proportional"
        weighted = case % 7 == 6
        config = SearchConfig(k=k, mode=mode)
        fills, accounts = _random_blotter(rng, n)
        state = LedgerState.open(a.id for a in accounts)
        for fill in fills:
            weights = reinforcement_weights(mark(state, fill.price), accounts) if weighted else None
            base = allocate_fill_proportional(fill, accounts)
            chosen = allocate_fill_four(fill, state, accounts, config, weights)
            parts = chosen.parts
            if sum(parts.values()) != fill.qty:
                violations.append((case, fill.seq, "sum"))
            if any(v * fill.qty < 0 for v in parts.values()):
                violations.append((case, fill.seq, "sign"))
            if any(abs(parts[a] - base.parts[a]) > k for a in parts):
                violations.append((case, fill.seq, "radius"))
            s_chosen = score(chosen, fill, state, accounts, config, weights)
            s_base = score(base, fill, state, accounts, config, weights)
            if not _not_worse(s_chosen, s_base):
                violations.append((case, fill.seq, "dominance"))
            state = apply_fill(state, fill, chosen)
            accts = state.accounts.values()
            if sum(s.net_position for s in accts) != state.fund.net_position:
                violations.append((case, fill.seq, "position identity"))
            if sum(s.cum_pnl for s in accts) != state.fund.cum_pnl:
                violations.append((case, fill.seq, "pnl identity"))
    assert violations == []


@pytest.mark.criterion(9, "Monte Carlo 500x(10 accounts, 200 fills): FOUR lowest mean gap, p < 0.01, < 60 s")
def test_monte_carlo_comparison():
    spec = SimSpec(scenarios=500, fills=200, accounts=10, seed=7)
    t = time.perf_counter()
    report = simulate(spec)
    elapsed = time.perf_counter() - t
    print(f"simulation took {elapsed:.1f} s")
    assert report.violations == []
    four = report.mean_gap("four")
    for other in ("simple", "hpha", "aps"):
        assert four < report.mean_gap(other), other
        assert float(report.sign_tests[other]["p_value"]) < 0.01, other
    assert elapsed < 60


def _cli(args, cwd, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    proc = subprocess.run([sys.executable, "-m", "tradealloc.harness.cli", *args],
                          cwd=cwd, env=env, capture_output=True)
    assert proc.returncode == 0, proc.stderr.decode()
    return proc.stdout


@pytest.mark.criterion(10, "every CLI command is byte-identical across repeated seeded runs")
def test_cli_determinism(data_dir, tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text("scenarios: 12\nfills: 40\naccounts: 5\n")
    inputs = ["--fills", str(data_dir / "sample_fills.csv"),
              "--accounts", str(data_dir / "sample_accounts.csv")]
    alloc = str(data_dir / "allocations" / "trial1.csv")
    commands = [["run", *inputs, "--method", m] for m in ("simple", "hpha", "aps", "four")]
    commands += [
        ["run", *inputs, "--method", "four", "--format", "csv"],
        ["replay", *inputs, "--allocations", alloc],
        ["replay", *inputs, "--allocations", alloc, "--format", "csv"],
        ["compare", *inputs, "--replay", f"trial1={alloc}"],
        ["compare", *inputs, "--replay", f"trial1={alloc}", "--format", "csv"],
        ["simulate", "--spec", str(spec), "--seed", "3"],
        ["simulate", "--spec", str(spec), "--seed", "3", "--format", "csv"],
    ]
    for i, cmd in enumerate(commands):
        outputs = []
        for run, hashseed in enumerate((0, 4242)):
            out = tmp_path / f"out{i}_{run}"
            stdout = _cli([*cmd, "--out", str(out)], tmp_path, hashseed)
            assert stdout == b""
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1], cmd
        assert outputs[0]
