"""Capacity market between operators: orders, McAfee clearing, clearinghouse.

Loads here are counted in integer *units* of ``delta_l`` (normalized load).
An operator that offloads traffic buys capacity (bids); an operator that
hosts traffic sells capacity (asks).  Order values are energy per second (W).
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .energy import CostCurve

logger = logging.getLogger(__name__)

BID = "bid"
ASK = "ask"
WELFARE_TIE = 1e-9
ORACLE_LIMIT = 1_000_000


@dataclass(frozen=True)
class Order:
    owner: int
    side: str
    unit_index: int
    value: float
    total_offload_marker: bool = False


def bid_key(o: Order):
    return (-o.value, o.owner, o.unit_index)


def ask_key(o: Order):
    return (o.value, o.owner, o.unit_index)


@dataclass(frozen=True)
class MnoState:
    id: int
    load: float
    cost_curve: CostCurve
    awake: bool = True
    e_tr: float = 0.0

    def __post_init__(self):
        if self.load < 0 or self.load > 1 + 1e-9:
            raise ValueError(f"MNO {self.id}: load {self.load} outside [0, 1]")
        if not self.awake and self.load > 0:
            raise ValueError(f"MNO {self.id}: asleep operator must carry zero load")
        if self.e_tr < 0:
            raise ValueError(f"MNO {self.id}: e_tr must be non-negative")


class _Units:
    """Unit-indexed view of a cost curve at trading granularity ``delta_l``."""

    def __init__(self, curve: CostCurve, delta_l: float | None):
        if delta_l is None:
            step = 1
        else:
            step = round(delta_l / curve.delta_l)
            if step < 1 or abs(step * curve.delta_l - delta_l) > 1e-9:
                raise ValueError(f"delta_l={delta_l} is not a multiple of the curve grid "
                                 f"{curve.delta_l}")
        self.curve = curve
        self.step = step
        self.delta_l = step * curve.delta_l
        self.capacity = curve.n_units // step

    def energy(self, units: int) -> float:
        return self.curve.at_units(units * self.step)

    def snap(self, load: float, owner=None) -> int:
        units = round(load / self.delta_l)
        if abs(units * self.delta_l - load) > 1e-9:
            logger.warning("MNO %s: load %.6g snapped to grid value %.6g", owner, load,
                           units * self.delta_l)
        return min(max(units, 0), self.capacity)


def _units_of(state: MnoState, delta_l: float | None):
    view = _Units(state.cost_curve, delta_l)
    return view, view.snap(state.load, state.id)


def _bids_at(owner: int, view: _Units, units: int, e_tr: float) -> list[Order]:
    bids = []
    for m in range(1, units + 1):
        hi = view.energy(units - m + 1)
        last = m == units
        lo = view.curve.P_sleep if last else view.energy(units - m)
        bids.append(Order(owner, BID, m, hi - lo - e_tr, last))
    return bids


def _asks_at(owner: int, view: _Units, units: int, e_tr: float) -> list[Order]:
    return [Order(owner, ASK, n, view.energy(units + n) - view.energy(units + n - 1) + e_tr)
            for n in range(1, view.capacity - units + 1)]


def generate_bids(state: MnoState, delta_l: float | None = None) -> list[Order]:
    """Marginal energy savings from offloading successive units, top of the load first.

    The final unit also releases the idle-to-sleep power difference, so the
    bids add up to ``e_tot(L) - P_sleep - M * e_tr``; it carries the
    total-offload marker.
    """
    if not state.awake:
        raise ValueError(f"MNO {state.id} is asleep")
    view, units = _units_of(state, delta_l)
    return _bids_at(state.id, view, units, state.e_tr)


def generate_asks(state: MnoState, delta_l: float | None = None) -> list[Order]:
    """Marginal energy cost (plus ``e_tr``) of hosting each extra unit up to capacity."""
    if not state.awake:
        raise ValueError(f"MNO {state.id} is asleep")
    view, units = _units_of(state, delta_l)
    return _asks_at(state.id, view, units, state.e_tr)


@dataclass(frozen=True)
class MatchResult:
    """Outcome of one McAfee clearing.

    Winning buyers each pay ``buyer_price`` per unit and winning sellers each
    receive ``seller_price``; the two coincide unless the reduced-trade rule
    fired.
    """

    trade_count: int
    buyer_price: float | None
    seller_price: float | None
    winning_bids: tuple = ()
    winning_asks: tuple = ()
    reduced: bool = False

    @property
    def trade_price(self) -> float | None:
        return self.buyer_price if not self.reduced else None

    @property
    def auctioneer_surplus(self) -> float:
        if not self.trade_count:
            return 0.0
        return self.trade_count * (self.buyer_price - self.seller_price)

    @property
    def gains(self) -> float:
        """Sum of winning bid values minus winning ask values."""
        return math.fsum(o.value for o in self.winning_bids) - math.fsum(
            o.value for o in self.winning_asks)


NO_TRADE = MatchResult(0, None, None)


def pmd_match(bids: Iterable[Order], asks: Iterable[Order]) -> MatchResult:
    """McAfee double auction over single-unit orders.

    With bids sorted descending and asks ascending, ``j`` is the last index
    where the bid still covers the ask.  The candidate price is the midpoint
    of the first excluded pair; if it separates pair ``j`` all ``j`` units
    trade there, otherwise ``j - 1`` units trade with buyers paying ``b_j``
    and sellers receiving ``a_j``.
    """
    b = sorted(bids, key=bid_key)
    a = sorted(asks, key=ask_key)
    j = 0
    while j < min(len(b), len(a)) and b[j].value >= a[j].value:
        j += 1
    if j == 0:
        return NO_TRADE
    bj, aj = b[j - 1].value, a[j - 1].value
    if j < len(b) and j < len(a):
        price = 0.5 * (b[j].value + a[j].value)
        if bj >= price >= aj:
            return MatchResult(j, price, price, tuple(b[:j]), tuple(a[:j]))
    if j == 1:
        return MatchResult(0, None, None, reduced=True)
    return MatchResult(j - 1, bj, aj, tuple(b[:j - 1]), tuple(a[:j - 1]), reduced=True)


def orders_to_csv(orders: Iterable[Order]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["owner", "side", "unit_index", "value_watts", "total_offload_marker"])
    for o in orders:
        w.writerow([o.owner, o.side, o.unit_index, repr(float(o.value)),
                    int(o.total_offload_marker)])
    return buf.getvalue()


def orders_from_csv(text: str) -> list[Order]:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for r in rows:
        if r["side"] not in (BID, ASK):
            raise ValueError(f"unknown order side {r['side']!r}")
        out.append(Order(int(r["owner"]), r["side"], int(r["unit_index"]),
                         float(r["value_watts"]), r["total_offload_marker"] in ("1", "true", "True")))
    return out


@dataclass
class MarketOutcome:
    allocation: dict
    sleeping: frozenset
    welfare: float
    post_loads: dict
    payments: dict
    savings_pct: float
    baseline_energy: float = 0.0
    post_energy: float = 0.0
    transfer_energy: float = 0.0
    delta_l: float = 0.0
    matches: tuple = field(default=(), repr=False)

    @property
    def trade_units(self) -> int:
        return sum(v for v in self.allocation.values() if v > 0)

    @property
    def trade_price(self) -> float | None:
        """Uniform price of the PMD stage, if it traded at one."""
        for m in self.matches:
            if m.trade_count and not m.reduced:
                return m.trade_price
        return None

    @property
    def buyers(self) -> list:
        return sorted(i for i, v in self.allocation.items() if v > 0)

    @property
    def sellers(self) -> list:
        return sorted(i for i, v in self.allocation.items() if v < 0)


def savings(baseline_energy: float, outcome: MarketOutcome) -> float:
    """Energy saved as a percentage of the no-trade baseline.

    Transfer energy counts against the saving, so this equals the welfare
    share of the baseline.
    """
    if not baseline_energy > 0:
        raise ValueError("baseline energy must be positive")
    post = outcome.post_energy + outcome.transfer_energy
    return 100.0 * (baseline_energy - post) / baseline_energy


class _Market:
    """Per-round unit bookkeeping shared by the clearinghouse and the oracle."""

    def __init__(self, mnos: Sequence[MnoState], delta_l: float | None):
        ids = [m.id for m in mnos]
        if len(set(ids)) != len(ids):
            raise ValueError("MNO ids must be unique")
        self.mnos = {m.id: m for m in mnos}
        self.view = {}
        self.units = {}
        for m in mnos:
            v, u = _units_of(m, delta_l)
            self.view[m.id], self.units[m.id] = v, (u if m.awake else 0)
        steps = {v.delta_l for v in self.view.values()}
        if len(steps) > 1:
            raise ValueError("all operators must trade the same unit size")
        self.delta_l = steps.pop()
        self.awake = sorted(m.id for m in mnos if m.awake)

    def energy(self, i, units, asleep=False) -> float:
        v = self.view[i]
        return v.curve.P_sleep if asleep else v.energy(units)

    def baseline(self) -> float:
        return math.fsum(self.energy(i, self.units[i], not self.mnos[i].awake)
                         for i in self.mnos)

    def bid_total(self, i, m) -> float:
        """Cumulative bid of ``i`` for offloading ``m`` units (all units = sleep)."""
        u = self.units[i]
        rest = self.energy(i, u - m, asleep=(m == u))
        return self.energy(i, u) - rest - m * self.mnos[i].e_tr

    def ask_total(self, i, n, start=None) -> float:
        u = self.units[i] if start is None else start
        return self.energy(i, u + n) - self.energy(i, u) + n * self.mnos[i].e_tr

    def outcome(self, allocation: dict, sleeping, payments: dict, matches=()) -> MarketOutcome:
        post_units = {i: self.units[i] - allocation.get(i, 0) for i in self.mnos}
        for i in sleeping:
            if post_units[i] != 0:
                raise AssertionError(f"sleeping MNO {i} left with load")
        asleep = set(sleeping) | {i for i in self.mnos if not self.mnos[i].awake}
        base = self.baseline()
        post = math.fsum(self.energy(i, post_units[i], i in asleep) for i in self.mnos)
        units = sum(v for v in allocation.values() if v > 0)
        if units != -sum(v for v in allocation.values() if v < 0):
            raise AssertionError("units bought and sold differ")
        transfer = math.fsum(self.mnos[i].e_tr * abs(v) for i, v in allocation.items())
        welfare = base - post - transfer
        return MarketOutcome(
            allocation={i: allocation.get(i, 0) for i in sorted(self.mnos)},
            sleeping=frozenset(sleeping),
            welfare=welfare,
            post_loads={i: post_units[i] * self.delta_l for i in sorted(self.mnos)},
            payments={i: payments.get(i, 0.0) for i in sorted(self.mnos)},
            savings_pct=100.0 * welfare / base if base > 0 else 0.0,
            baseline_energy=base,
            post_energy=post,
            transfer_energy=transfer,
            delta_l=self.delta_l,
            matches=tuple(matches),
        )


def _pmd_stage(mk: _Market, participants, ask_only, start_units):
    bids, asks = [], []
    for i in participants:
        v, u, e_tr = mk.view[i], start_units[i], mk.mnos[i].e_tr
        if i not in ask_only:
            bids += [o for o in _bids_at(i, v, u, e_tr) if not o.total_offload_marker]
        asks += _asks_at(i, v, u, e_tr)
    return pmd_match(bids, asks)


def _apply_match(res: MatchResult, allocation: dict, payments: dict):
    for o in res.winning_bids:
        allocation[o.owner] = allocation.get(o.owner, 0) + 1
        payments[o.owner] = payments.get(o.owner, 0.0) + res.buyer_price
    for o in res.winning_asks:
        allocation[o.owner] = allocation.get(o.owner, 0) - 1
        payments[o.owner] = payments.get(o.owner, 0.0) - res.seller_price


def _check_exclusive(allocation_parts: Iterable[dict]):
    sign = {}
    for part in allocation_parts:
        for i, v in part.items():
            if v == 0:
                continue
            s = 1 if v > 0 else -1
            if sign.setdefault(i, s) != s:
                raise AssertionError(f"MNO {i} both buys and sells")


def _total_offload(mk: _Market, offloaders: tuple):
    """Phase one: hand every unit of ``offloaders`` to the cheapest complement asks.

    Returns ``None`` when the complement lacks capacity or the offloaders'
    total-offload value does not exceed the cost of those asks.
    """
    rest = [i for i in mk.awake if i not in offloaders]
    need = sum(mk.units[i] for i in offloaders)
    asks = sorted((o for i in rest for o in _asks_at(i, mk.view[i], mk.units[i], mk.mnos[i].e_tr)),
                  key=ask_key)
    if len(asks) < need:
        return None
    chosen = asks[:need]
    value = math.fsum(mk.bid_total(i, mk.units[i]) for i in offloaders)
    cost = math.fsum(o.value for o in chosen)
    if not value > cost:
        return None
    # Price the bundle at the midpoint of value and cost.  Each seller unit
    # receives its ask plus an equal part of half the surplus; offloaders pay
    # the same fraction (V + C) / 2V of their own value, so no one loses.
    if need:
        share, fraction = 0.5 * (value - cost) / need, 0.5 * (value + cost) / value
    else:  # idle operators switching off move nothing and owe nothing
        share = fraction = 0.0
    allocation, payments = {}, {}
    for a in chosen:
        allocation[a.owner] = allocation.get(a.owner, 0) - 1
        payments[a.owner] = payments.get(a.owner, 0.0) - (a.value + share)
    for i in offloaders:
        allocation[i] = mk.units[i]
        payments[i] = fraction * mk.bid_total(i, mk.units[i])
    return allocation, payments, rest


def _candidate_key(outcome: MarketOutcome):
    return (-outcome.welfare, len(outcome.sleeping), sorted(outcome.sleeping))


def _better(new: MarketOutcome, best: MarketOutcome | None) -> bool:
    if best is None or new.welfare > best.welfare + WELFARE_TIE:
        return True
    if new.welfare < best.welfare - WELFARE_TIE:
        return False
    return _candidate_key(new)[1:] < _candidate_key(best)[1:]


def clearinghouse_round(mnos: Sequence[MnoState], delta_l: float | None = None) -> MarketOutcome:
    """Clear one round: total-offload candidates first, then McAfee on the rest.

    Every nonempty proper subset of awake operators is tried as the set that
    offloads completely and sleeps.  Survivors re-bid at their post-transfer
    loads (phase-one sellers only ask) and the remaining orders clear through
    :func:`pmd_match`.  The plain McAfee outcome without any sleeping operator
    is also evaluated; the highest-welfare outcome wins, ties going to fewer
    sleeping operators and then the lexicographically smallest set.
    """
    mk = _Market(mnos, delta_l)
    if len(mk.awake) < 2:
        return mk.outcome({}, (), {})

    alloc, pay = {}, {}
    plain = _pmd_stage(mk, mk.awake, (), mk.units)
    _apply_match(plain, alloc, pay)
    _check_exclusive([alloc])
    best = mk.outcome(alloc, (), pay, (plain,))

    for size in range(1, len(mk.awake)):
        for offloaders in itertools.combinations(mk.awake, size):
            phase1 = _total_offload(mk, offloaders)
            if phase1 is None:
                continue
            alloc1, pay1, rest = phase1
            sellers = {i for i, v in alloc1.items() if v < 0}
            start = {i: mk.units[i] - alloc1.get(i, 0) for i in rest}
            res = _pmd_stage(mk, rest, sellers, start)
            alloc2, pay2 = {}, {}
            _apply_match(res, alloc2, pay2)
            _check_exclusive([alloc1, alloc2])
            alloc = {i: alloc1.get(i, 0) + alloc2.get(i, 0) for i in set(alloc1) | set(alloc2)}
            pay = {i: pay1.get(i, 0.0) + pay2.get(i, 0.0) for i in set(pay1) | set(pay2)}
            cand = mk.outcome(alloc, offloaders, pay, (res,))
            if _better(cand, best):
                best = cand
    return best


def welfare_oracle(mnos: Sequence[MnoState], delta_l: float | None = None,
                   unit_cap: int = ORACLE_LIMIT) -> MarketOutcome:
    """Exhaustive welfare maximum over buyer-xor-seller unit assignments.

    Each awake operator either stays put, offloads ``m`` units (all of them
    meaning it sleeps), or hosts ``n`` extra units; units bought must equal
    units sold and at least one operator stays awake.
    """
    mk = _Market(mnos, delta_l)
    options = []
    for i in mk.awake:
        u, cap = mk.units[i], mk.view[i].capacity
        opts = [(0, 0.0, False)]
        opts += [(m, mk.bid_total(i, m), m == u) for m in range(1, u)]
        opts.append((u, mk.bid_total(i, u), True))
        opts += [(-n, -mk.ask_total(i, n), False) for n in range(1, cap - u + 1)]
        options.append(opts)
    size = math.prod(len(o) for o in options)
    if size > unit_cap:
        raise ValueError(f"instance has {size} assignments, above the cap of {unit_cap}")

    best = None  # (welfare, sleeping, combo)
    for combo in itertools.product(*options):
        if sum(c[0] for c in combo) != 0:
            continue
        sleeping = tuple(i for i, c in zip(mk.awake, combo) if c[2])
        if len(sleeping) == len(mk.awake):
            continue
        w = math.fsum(c[1] for c in combo)
        if best is None or w > best[0] + WELFARE_TIE or (
                w >= best[0] - WELFARE_TIE
                and (len(sleeping), sleeping) < (len(best[1]), best[1])):
            best = (w, sleeping, combo)
    _, sleeping, combo = best
    alloc = {i: c[0] for i, c in zip(mk.awake, combo) if c[0]}
    return mk.outcome(alloc, sleeping, {})
