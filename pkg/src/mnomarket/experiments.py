"""Experiment drivers: cost curve, equal-load sweep, scenarios, repeated rounds."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .estimators import EnergyMarket
from .market import MarketOutcome

logger = logging.getLogger(__name__)

SWEEP_HEADER = ["setting", "baseline_watts", "post_trade_watts", "savings_pct", "sleeping",
                "trade_units", "trade_price_watts"]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if x == 0:
        x = 0.0  # no negative zero in output
    return f"{x:.6g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    return buf.getvalue()


@dataclass
class SweepRow:
    setting: str
    baseline_energy: float
    post_energy: float
    savings_pct: float
    sleeping: int
    trade_units: int
    trade_price: float | None

    @classmethod
    def from_outcome(cls, setting: str, o: MarketOutcome) -> "SweepRow":
        return cls(setting, o.baseline_energy, o.post_energy + o.transfer_energy,
                   o.savings_pct, len(o.sleeping), o.trade_units, o.trade_price)

    def as_list(self):
        return [self.setting, self.baseline_energy, self.post_energy, self.savings_pct,
                self.sleeping, self.trade_units, self.trade_price]


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    outcomes: list = field(default_factory=list, repr=False)

    def to_csv(self) -> str:
        return _csv(SWEEP_HEADER, [r.as_list() for r in self.rows])

    @property
    def savings(self) -> np.ndarray:
        return np.array([r.savings_pct for r in self.rows])


def _label(loads) -> str:
    return ";".join(fmt(x) for x in loads)


def market_for(config: ExperimentConfig) -> EnergyMarket:
    return EnergyMarket(cost_model=config.cost_model(), delta_l=config.delta_l,
                        e_tr=config.e_tr).fit()


def run_cost_curve(config: ExperimentConfig) -> str:
    """CSV of energy and forward marginal energy on the ``delta_l`` grid."""
    curve = config.cost_model().fit().curve_
    marginal = np.r_[np.diff(curve.energy), np.nan]
    if np.any(np.diff(curve.energy) <= 0):
        raise ArithmeticError("cost curve is not strictly increasing")
    if np.any(np.diff(curve.energy, 2) < -1e-9):
        raise ArithmeticError("cost curve is not convex on the load grid")
    rows = [(x, e, None if math.isnan(d) else d)
            for x, e, d in zip(curve.load_grid, curve.energy, marginal)]
    return _csv(["load_normalized", "energy_watts", "marginal_watts"], rows)


def sweep_loads(config: ExperimentConfig) -> np.ndarray:
    n = round(1.0 / config.delta_l)
    lo = config.delta_l if config.sweep_min is None else config.sweep_min
    k_lo = math.ceil(lo * n - 1e-9)
    k_hi = math.floor(config.sweep_max * n + 1e-9)
    return np.arange(k_lo, k_hi + 1) / n


def run_equal_load_sweep(config: ExperimentConfig, market: EnergyMarket | None = None
                         ) -> SweepResult:
    """All operators share one load; one clearing round per grid load."""
    if not 2 <= config.mno_count <= 5:
        raise ValueError("equal-load sweep supports 2 to 5 operators")
    market = market_for(config) if market is None else market
    result = SweepResult()
    for load in sweep_loads(config):
        loads = [float(load)] * config.mno_count
        o = market.clear(loads)
        result.rows.append(SweepRow.from_outcome(fmt(load), o))
        result.outcomes.append(o)
    return result


def run_scenario(config: ExperimentConfig, market: EnergyMarket | None = None):
    """Single round at ``config.loads``; returns the summary row result and the outcome."""
    if len(config.loads) != config.mno_count:
        raise ValueError("scenario needs one load per operator")
    market = market_for(config) if market is None else market
    o = market.clear(list(config.loads))
    return SweepResult([SweepRow.from_outcome(_label(config.loads), o)], [o]), o


def outcome_csv(outcome: MarketOutcome, entering) -> str:
    rows = []
    for i in sorted(outcome.allocation):
        rows.append([str(i), entering[i], outcome.post_loads[i], outcome.allocation[i],
                     str(int(i in outcome.sleeping)), outcome.payments[i]])
    return _csv(["mno", "entering_load", "post_load", "allocation_units", "sleeping",
                 "payment_watts"], rows)


def sinusoidal_trace(n_mnos: int, rounds: int, mean: float = 0.5, amplitude: float = 0.4):
    """Daily-like load profile per operator, phases staggered across operators."""
    t = np.arange(rounds) / rounds
    phases = np.arange(n_mnos) * (0.5 / n_mnos)
    return mean + amplitude * np.sin(2 * np.pi * (t[:, None] + phases[None, :]))


def _rebalance(entering: np.ndarray, carried: np.ndarray, capacity: int):
    """Fix negative or over-capacity entering loads by moving hosted units back.

    ``carried`` is each network's load minus its own demand; moving one unit
    from a host (carried > 0) to its origin (carried < 0) keeps the total.
    """
    while True:
        neg = np.flatnonzero(entering < 0)
        over = np.flatnonzero(entering > capacity)
        if not len(neg) and not len(over):
            return entering, carried
        if len(neg):
            i = neg[0]
            hosts = np.flatnonzero(carried > 0)
            if not len(hosts):  # pragma: no cover - sum(carried) == 0 guarantees a host
                raise RuntimeError("no host to return units from")
            j = hosts[np.argmax(carried[hosts])]
        else:
            j = over[0]
            origins = np.flatnonzero((carried < 0) & (entering < capacity))
            if not len(origins):
                raise ValueError("load trace exceeds total feasible capacity")
            i = origins[np.argmin(carried[origins])]
        entering[j] -= 1
        carried[j] -= 1
        entering[i] += 1
        carried[i] += 1


def run_rounds(config: ExperimentConfig, trace, market: EnergyMarket | None = None
               ) -> SweepResult:
    """Repeated clearing along a per-round demand trace.

    Offloaded traffic stays with its host between rounds: each round enters
    with last round's post-trade loads, shifted by the change in every
    operator's own demand.  Operators asleep from the previous round enter
    awake at whatever load they hold and may go back to sleep.
    """
    market = market_for(config) if market is None else market
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[1] < 2:
        raise ValueError("trace must be (rounds, operators) with at least two operators")
    n = round(1.0 / market.delta_l)
    demand = np.rint(np.clip(trace, 0.0, 1.0) * n).astype(int)
    carried = np.zeros(trace.shape[1], dtype=int)
    result = SweepResult()
    for t in range(len(demand)):
        entering, carried = _rebalance(demand[t] + carried, carried.copy(), n)
        loads = entering / n
        o = market.clear(loads)
        post = np.array([round(o.post_loads[i] * n) for i in range(len(loads))])
        carried = carried + (post - entering)
        row = SweepRow.from_outcome(f"{t}:" + _label(loads), o)
        result.rows.append(row)
        result.outcomes.append(o)
    return result


def read_trace_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]  # header
    return np.array([[float(v) for v in r] for r in rows])
