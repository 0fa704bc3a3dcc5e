"""Independent reference routines and random instance generators.

These back the ``selftest`` command and the test-suite.  The McAfee reference
here scans every candidate trade count instead of walking the sorted books,
and it shares nothing with :func:`mnomarket.market.pmd_match` except the
order type.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import CostCurve
from .market import (ASK, BID, MatchResult, MnoState, Order, generate_asks, generate_bids,
                     pmd_match)


def pmd_scan_reference(bids, asks) -> MatchResult:
    bids = list(bids)
    asks = list(asks)
    # Selection sort with explicit comparisons so ordering does not reuse
    # the production sort keys.
    def before_bid(x, y):
        if x.value != y.value:
            return x.value > y.value
        if x.owner != y.owner:
            return x.owner < y.owner
        return x.unit_index < y.unit_index

    def before_ask(x, y):
        if x.value != y.value:
            return x.value < y.value
        if x.owner != y.owner:
            return x.owner < y.owner
        return x.unit_index < y.unit_index

    def ordered(items, before):
        items = items[:]
        out = []
        while items:
            k = 0
            for i in range(1, len(items)):
                if before(items[i], items[k]):
                    k = i
            out.append(items.pop(k))
        return out

    b = ordered(bids, before_bid)
    a = ordered(asks, before_ask)
    n = min(len(b), len(a))
    covering = [k for k in range(1, n + 1) if b[k - 1].value >= a[k - 1].value]
    j = max(covering) if covering else 0
    if j == 0:
        return MatchResult(0, None, None)
    has_next = j + 1 <= len(b) and j + 1 <= len(a)
    if has_next:
        p = (b[j].value + a[j].value) / 2.0
        if a[j - 1].value <= p <= b[j - 1].value:
            return MatchResult(j, p, p, tuple(b[:j]), tuple(a[:j]))
    if j - 1 == 0:
        return MatchResult(0, None, None, reduced=True)
    return MatchResult(j - 1, b[j - 1].value, a[j - 1].value, tuple(b[: j - 1]),
                       tuple(a[: j - 1]), reduced=True)


def random_convex_curve(rng: np.random.Generator, n_units: int, idle: float | None = None,
                        p_sleep: float = 0.0, quantum: float | None = None) -> CostCurve:
    """Strictly convex, increasing energy table on ``n_units + 1`` points.

    ``quantum`` rounds the marginal costs to a grid, which provokes ties.
    """
    idle = float(rng.uniform(20.0, 80.0)) if idle is None else idle
    first = rng.uniform(0.1, 3.0)
    steps = np.cumsum(np.r_[first, rng.uniform(0.05, 4.0, n_units - 1)])
    if quantum:
        steps = np.maximum(np.round(steps / quantum), 1) * quantum
        steps = steps + np.arange(n_units) * quantum  # restore strict growth
    energy = np.r_[idle, idle + np.cumsum(steps)]
    grid = np.arange(n_units + 1) / n_units
    return CostCurve(delta_l=1.0 / n_units, load_grid=grid, energy=energy, P_sleep=p_sleep)


def random_book(rng: np.random.Generator, max_orders: int = 10, quantum=None):
    """Bids and asks from a few operators sharing convex-curve shaped values."""
    owners = int(rng.integers(1, 5))
    bids, asks = [], []
    for owner in range(owners):
        n = int(rng.integers(3, 12))
        curve = random_convex_curve(rng, n, quantum=quantum)
        units = int(rng.integers(0, n + 1))
        e_tr = float(rng.choice([0.0, rng.uniform(0.0, 1.0)]))
        st = MnoState(owner, units / n, curve, e_tr=e_tr)
        bids += [o for o in generate_bids(st) if not o.total_offload_marker]
        asks += generate_asks(st)
    rng.shuffle(bids)
    rng.shuffle(asks)
    nb = int(rng.integers(0, max_orders + 1))
    na = int(rng.integers(0, max_orders + 1))
    return bids[:nb], asks[:na]


def random_market(rng: np.random.Generator, n_mnos=(2, 3), max_units: int = 6):
    """Small operator set with private convex curves for oracle comparisons."""
    m = int(rng.integers(n_mnos[0], n_mnos[1] + 1))
    n = int(rng.integers(2, max_units + 1))
    idle = float(rng.uniform(5.0, 60.0))
    states = []
    for i in range(m):
        curve = random_convex_curve(rng, n, idle=idle)
        units = int(rng.integers(0, n + 1))
        e_tr = float(rng.choice([0.0, rng.uniform(0.0, 0.5)]))
        states.append(MnoState(i, units / n, curve, e_tr=e_tr))
    return states


def order_utility(order: Order, true_value: float, result: MatchResult) -> float:
    """Utility of a single-unit trader under ``result``, at its true value."""
    key = (order.owner, order.side, order.unit_index)
    if order.side == BID:
        if any((o.owner, o.side, o.unit_index) == key for o in result.winning_bids):
            return true_value - result.buyer_price
    else:
        if any((o.owner, o.side, o.unit_index) == key for o in result.winning_asks):
            return result.seller_price - true_value
    return 0.0


@dataclass
class ProbeReport:
    probes: int = 0
    strict_gains: int = 0
    ties: int = 0
    worst_gain: float = 0.0


def misreport_probe(bids, asks, step: float, reach: int = 3, tol: float = 1e-12,
                    report: ProbeReport | None = None) -> ProbeReport:
    """Shift each order's value by ``k * step`` (0 < |k| <= reach) and compare utilities.

    Each order is treated as an independent single-unit trader.
    """
    report = ProbeReport() if report is None else report
    truthful = pmd_match(bids, asks)
    books = {BID: list(bids), ASK: list(asks)}
    for side, book in books.items():
        for idx, order in enumerate(book):
            base = order_utility(order, order.value, truthful)
            for k in range(-reach, reach + 1):
                if k == 0:
                    continue
                lie = Order(order.owner, order.side, order.unit_index,
                            order.value + k * step, order.total_offload_marker)
                changed = book[:idx] + [lie] + book[idx + 1:]
                res = pmd_match(changed, asks) if side == BID else pmd_match(bids, changed)
                gain = order_utility(lie, order.value, res) - base
                report.probes += 1
                if gain > tol:
                    report.strict_gains += 1
                    report.worst_gain = max(report.worst_gain, gain)
                elif gain > -tol and res != truthful:
                    report.ties += 1
    return report
