"""CSV readers and writers for blotters, accounts and allocation files.

Schemas (header row required):

* fills        ``seq,day,price,qty`` with price in currency units
* accounts     ``account_id,aum``
* allocations  ``seq,account_id,qty``; missing (seq, account) pairs are zero
"""

from __future__ import annotations

import csv
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ..ledger import (
    MINOR_UNITS,
    Account,
    AllocationVector,
    Fill,
    LedgerError,
    make_accounts,
    to_minor,
)


class InputError(ValueError):
    def __init__(self, message: str, path=None, line: Optional[int] = None,
                 field: Optional[str] = None):
        where = "".join([f"{path}" if path else "",
                         f":{line}" if line is not None else "",
                         f" [{field}]" if field else ""])
        super().__init__(f"{where}: {message}" if where else message)
        self.message = message
        self.path = str(path) if path else None
        self.line = line
        self.field = field

    def record(self) -> dict:
        return {"error": "input", "message": self.message, "path": self.path,
                "line": self.line, "field": self.field}


def _rows(path, columns: Sequence[str]):
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise InputError(str(exc.strerror or exc), path) from exc
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise InputError("empty file", path)
        header = [h.strip() for h in reader.fieldnames]
        if sorted(header) != sorted(columns):
            raise InputError(f"expected columns {','.join(columns)}, got {','.join(header)}",
                             path, 1)
        reader.fieldnames = header
        rows = []
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise InputError("wrong number of fields", path, reader.line_num)
            rows.append((reader.line_num, {k: v.strip() for k, v in row.items()}))
    if not rows:
        raise InputError("no data rows", path)
    return path, rows


def _int(value: str, path, line, field) -> int:
    try:
        return int(value)
    except ValueError:
        raise InputError(f"not an integer: {value!r}", path, line, field) from None


def _decimal(value: str, path, line, field) -> Decimal:
    try:
        d = Decimal(value)
    except ArithmeticError:
        raise InputError(f"not a decimal: {value!r}", path, line, field) from None
    if not d.is_finite():
        raise InputError(f"not a finite decimal: {value!r}", path, line, field)
    return d


def parse_blotter(path) -> list[Fill]:
    path, rows = _rows(path, ("seq", "day", "price", "qty"))
    fills: list[Fill] = []
    for line, row in rows:
        seq = _int(row["seq"], path, line, "seq")
        day = _int(row["day"], path, line, "day")
        price = _decimal(row["price"], path, line, "price")
        qty = _int(row["qty"], path, line, "qty")
        if qty == 0:
            raise InputError("quantity must be nonzero", path, line, "qty")
        if price <= 0:
            raise InputError("price must be positive", path, line, "price")
        if day < 1:
            raise InputError("day must be positive", path, line, "day")
        try:
            minor = to_minor(price)
        except ValueError as exc:
            raise InputError(str(exc), path, line, "price") from None
        if fills and seq <= fills[-1].seq:
            raise InputError("seq must be strictly increasing", path, line, "seq")
        if fills and day < fills[-1].day:
            raise InputError("day must not decrease", path, line, "day")
        fills.append(Fill(seq, day, minor, qty))
    return fills


def parse_accounts(path) -> list[Account]:
    path, rows = _rows(path, ("account_id", "aum"))
    pairs = []
    seen = set()
    for line, row in rows:
        acct = row["account_id"]
        if not acct:
            raise InputError("empty account id", path, line, "account_id")
        if acct in seen:
            raise InputError(f"duplicate account id {acct!r}", path, line, "account_id")
        seen.add(acct)
        aum = _decimal(row["aum"], path, line, "aum")
        if aum <= 0:
            raise InputError("aum must be positive", path, line, "aum")
        pairs.append((acct, aum))
    return make_accounts(pairs)


def parse_allocations(path, fills: Sequence[Fill],
                      accounts: Sequence[Account]) -> list[AllocationVector]:
    """One allocation vector per fill, validated against that fill."""
    path, rows = _rows(path, ("seq", "account_id", "qty"))
    ids = [a.id for a in accounts]
    by_seq = {f.seq: f for f in fills}
    parts: dict[int, dict[str, int]] = {f.seq: dict.fromkeys(ids, 0) for f in fills}
    seen = set()
    for line, row in rows:
        seq = _int(row["seq"], path, line, "seq")
        if seq not in by_seq:
            raise InputError(f"unknown fill seq {seq}", path, line, "seq")
        acct = row["account_id"]
        if acct not in parts[seq]:
            raise InputError(f"unknown account {acct!r}", path, line, "account_id")
        if (seq, acct) in seen:
            raise InputError("duplicate (seq, account_id)", path, line)
        seen.add((seq, acct))
        parts[seq][acct] = _int(row["qty"], path, line, "qty")
    allocs = []
    for f in fills:
        alloc = AllocationVector(f.seq, parts[f.seq])
        try:
            alloc.validate(f)
        except LedgerError as exc:
            raise InputError(str(exc), path, None, "qty") from None
        allocs.append(alloc)
    return allocs


def _price_text(minor: int) -> str:
    return str(Decimal(minor) / MINOR_UNITS)


def write_blotter(path, fills: Iterable[Fill]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seq", "day", "price", "qty"])
        for f in fills:
            w.writerow([f.seq, f.day, _price_text(f.price), f.qty])


def write_accounts(path, accounts: Iterable[Account]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account_id", "aum"])
        for a in accounts:
            w.writerow([a.id, a.aum])


def write_allocations(path, allocations: Iterable[AllocationVector]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seq", "account_id", "qty"])
        for alloc in allocations:
            for acct, q in alloc.parts.items():
                w.writerow([alloc.fill_seq, acct, q])
