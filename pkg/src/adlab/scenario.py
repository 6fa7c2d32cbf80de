"""Scenario files and tabular results.

A scenario is a JSON document::

    {
      "gammas": [1.0, 0.6, ...],
      "bidders": [{"id": 1, "value": 26, "relevance": 1.0}, ...],
      "bids": [{"id": 1, "bid": 25}, ...],          # optional
      "reserve": 0.0,                                # optional
      "fork": {"l": 3, "L": 2, "f": 0.8},            # optional
      "mediator": {"m_ids": [1, 2], "share": 0.5,    # optional
                   "strategy": "top", "slide_score": 12}
    }

Bid tie ranks follow the order of the ``bids`` list.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .auction import AuctionError, Bidder, BidProfile, SlotCurve
from .capacity import ForkError, ForkSpec

FIXTURES = ("table1", "lemma_l1", "lemma_l2", "example1", "example2")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    curve: SlotCurve
    bidders: tuple[Bidder, ...]
    profile: BidProfile | None = None
    reserve: float = 0.0
    fork: ForkSpec | None = None
    mediator: dict | None = None

    def sorted_bidders(self) -> list[Bidder]:
        """Bidders by decreasing score ``e v`` (stable for equal scores)."""
        return sorted(self.bidders, key=lambda b: -b.score)

    def require_bids(self) -> BidProfile:
        if self.profile is None:
            raise ScenarioError("bids: required for this command but missing")
        return self.profile


def _get(obj: dict, key: str, where: str, kind=None, required=True):
    if key not in obj:
        if required:
            raise ScenarioError(f"{where}.{key}: missing")
        return None
    val = obj[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise ScenarioError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, "
                            f"got {type(val).__name__}")
    return val


_NUM = (int, float)


def parse_scenario(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("top level: expected an object")
    gammas = _get(doc, "gammas", "$", list)
    if not gammas or not all(isinstance(g, _NUM) and not isinstance(g, bool) for g in gammas):
        raise ScenarioError("$.gammas: expected a non-empty list of numbers")
    try:
        curve = SlotCurve(tuple(gammas))
    except AuctionError as exc:
        raise ScenarioError(f"$.gammas: {exc}") from None

    raw = _get(doc, "bidders", "$", list)
    if not raw:
        raise ScenarioError("$.bidders: expected a non-empty list")
    bidders, ids = [], set()
    for k, b in enumerate(raw):
        where = f"$.bidders[{k}]"
        if not isinstance(b, dict):
            raise ScenarioError(f"{where}: expected an object")
        bid_id = _get(b, "id", where, (int, str))
        if bid_id in ids:
            raise ScenarioError(f"{where}.id: duplicate id {bid_id!r}")
        ids.add(bid_id)
        rel = _get(b, "relevance", where, _NUM, required=False)
        try:
            bidders.append(Bidder(bid_id, float(_get(b, "value", where, _NUM)),
                                  1.0 if rel is None else float(rel)))
        except AuctionError as exc:
            raise ScenarioError(f"{where}: {exc}") from None

    profile = None
    if "bids" in doc:
        items = []
        seen = set()
        for k, b in enumerate(_get(doc, "bids", "$", list)):
            where = f"$.bids[{k}]"
            if not isinstance(b, dict):
                raise ScenarioError(f"{where}: expected an object")
            bid_id = _get(b, "id", where, (int, str))
            if bid_id not in ids:
                raise ScenarioError(f"{where}.id: unknown bidder {bid_id!r}")
            if bid_id in seen:
                raise ScenarioError(f"{where}.id: duplicate bid for {bid_id!r}")
            seen.add(bid_id)
            amount = float(_get(b, "bid", where, _NUM))
            if amount < 0:
                raise ScenarioError(f"{where}.bid: negative bid {amount}")
            items.append((bid_id, amount))
        if seen != ids:
            missing = sorted(map(str, ids - seen))
            raise ScenarioError(f"$.bids: no bid for bidders {missing}")
        profile = BidProfile.from_bids(items)

    reserve = float(_get(doc, "reserve", "$", _NUM, required=False) or 0.0)

    fork = None
    if "fork" in doc:
        fk = _get(doc, "fork", "$", dict)
        try:
            fork = ForkSpec(int(_get(fk, "l", "$.fork", int)), int(_get(fk, "L", "$.fork", int)),
                            float(_get(fk, "f", "$.fork", _NUM)))
            fork.validate(curve)
        except ForkError as exc:
            raise ScenarioError(f"$.fork: {exc}") from None

    mediator = None
    if "mediator" in doc:
        md = _get(doc, "mediator", "$", dict)
        m_ids = _get(md, "m_ids", "$.mediator", list)
        unknown = [i for i in m_ids if i not in ids]
        if unknown:
            raise ScenarioError(f"$.mediator.m_ids: unknown bidders {unknown}")
        mediator = {
            "m_ids": list(m_ids),
            "share": float(_get(md, "share", "$.mediator", _NUM, required=False) or 0.5),
            "strategy": _get(md, "strategy", "$.mediator", str, required=False) or "top",
            "slide_score": _get(md, "slide_score", "$.mediator", _NUM, required=False),
        }
    return Scenario(curve, tuple(bidders), profile, reserve, fork, mediator)


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(doc)


def fixture_path(name: str) -> Path:
    """Path of a bundled scenario (``table1``, ``lemma_l1``, ...)."""
    if name not in FIXTURES:
        raise ScenarioError(f"unknown fixture {name!r}; expected one of {FIXTURES}")
    return Path(str(resources.files("adlab") / "data" / f"{name}.json"))


def load_fixture(name: str) -> Scenario:
    return load_scenario(fixture_path(name))


# --- result tables -----------------------------------------------------------

def format_cell(v, exact: bool = False) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if exact else format(v, ".6g")
    return str(v)


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    title: str | None = None

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(list(row))

    def to_csv(self, exact: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([format_cell(c, exact) for c in row])
        return buf.getvalue()

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]


def render(tables: list[ResultTable], fmt: str = "csv", exact: bool = False) -> str:
    if fmt == "json":
        doc = {t.title or f"table{k}": t.records() for k, t in enumerate(tables)}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    return "\n".join(t.to_csv(exact) for t in tables)
