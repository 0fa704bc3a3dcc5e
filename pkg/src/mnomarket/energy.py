"""Base-station energy as a function of offered load.

A BS is an M/G/1 processor-sharing server.  Its activity (busy fraction) is
``sum_u lambda_u S_u / r_u`` and the rates ``r_u`` depend on the activity of
the interfering cells, so the activity is found by successive substitution
starting from fully active interferers.  Energy per second is then

    e_tot = (P_PA + P_c - P_idle) * activity + P_idle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .geometry import HexLayout, build_layout, user_grid, wrapped_distance
from .radio import LinkBudget, RadioParams, dbm_to_watt

FEASIBLE_ACTIVITY = 0.999


class ConvergenceError(RuntimeError):
    """Activity iteration did not settle; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: float):
        super().__init__(message)
        self.last = last


class InfeasibleLoadError(ValueError):
    pass


@dataclass(frozen=True)
class PowerParams:
    eta_max: float = 0.8
    p_max_pa: float = dbm_to_watt(53.0)
    p_max_avg: float = dbm_to_watt(46.0)
    P_c: float = 58.6
    P_idle: float = 58.6
    P_sleep: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta_max <= 1:
            raise ValueError(f"eta_max must lie in (0, 1], got {self.eta_max}")
        if self.p_max_avg > self.p_max_pa * (1 + 1e-12):
            raise ValueError("p_max_avg cannot exceed p_max_pa")
        if min(self.p_max_pa, self.p_max_avg, self.P_c, self.P_idle, self.P_sleep) < 0:
            raise ValueError("powers must be non-negative")
        if self.P_sleep > self.P_idle:
            raise ValueError("P_sleep cannot exceed P_idle")


def pa_input_power(p: float, params: PowerParams) -> float:
    """Input power of a traditional PA delivering mean output ``p`` (watts)."""
    if not 0 < p <= params.p_max_avg * (1 + 1e-12):
        raise ValueError(f"transmit power {p} W outside (0, {params.p_max_avg}] W")
    return math.sqrt(p * params.p_max_pa) / params.eta_max


@dataclass(frozen=True)
class TrafficModel:
    """Homogeneous traffic: every location offers the same ``lambda_u * S_u``."""

    packet_size: float = 1e5  # bits
    n_locations: int = 64

    def arrival_rate(self, offered_bits: float) -> float:
        """Per-location packet rate for a total offered load in bit/s."""
        if offered_bits < 0:
            raise ValueError("offered load must be non-negative")
        return offered_bits / self.n_locations / self.packet_size


@dataclass(frozen=True)
class ActivityResult:
    activity: float
    iterations: int
    history: tuple
    feasible: bool
    interferer_activity: float = 0.0  # activity that produced the final rates


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """One operator's network: layout, radio and power parameters, traffic."""

    radio: RadioParams = field(default_factory=RadioParams)
    power: PowerParams = field(default_factory=PowerParams)
    traffic: TrafficModel = field(default_factory=TrafficModel)
    cell_radius: float = 1.0
    tol: float = 1e-4
    max_iter: int = 100
    energy_tol: float = 1e-10  # tabulated energies must resolve curvature

    @cached_property
    def layout(self) -> HexLayout:
        return build_layout(self.cell_radius)

    @cached_property
    def link_budget(self) -> LinkBudget:
        lay = self.layout
        pts = user_grid(lay, 0).points
        centers = lay.cell_centers
        serving = wrapped_distance(lay, pts, centers[0])
        interf = wrapped_distance(lay, pts[:, None, :], centers[None, 1:, :])
        return LinkBudget(serving, interf, self.radio)

    @cached_property
    def pa_power(self) -> float:
        return pa_input_power(self.radio.tx_power, self.power)

    @cached_property
    def dynamic_power(self) -> float:
        return self.pa_power + self.power.P_c - self.power.P_idle

    @cached_property
    def capacity_bits(self) -> float:
        """Feasible offered load in bit/s (the normalization unit)."""
        return feasible_load(self)

    def busy_time(self, offered_bits: float, activity: float) -> float:
        """``sum_u lambda_u S_u / r_u`` with interferers at ``activity``."""
        rates = self.link_budget.rates(activity)
        per_loc = offered_bits / self.traffic.n_locations
        if per_loc == 0:
            return 0.0
        return float(np.sum(per_loc / rates))


def _distance_to_fixed_point(history) -> float:
    """Error bound for the last iterate of a contraction.

    The step alone understates the error when the map is almost tangent to
    the identity (the contraction ratio ``q`` is close to one); the geometric
    tail ``step * q / (1 - q)`` does not.
    """
    step = abs(history[-1] - history[-2])
    if len(history) < 3:
        return step if step == 0 else math.inf
    prev = abs(history[-2] - history[-3])
    if prev == 0:
        return step
    q = step / prev
    if q >= 1:
        return math.inf
    return max(step, step * q / (1 - q))


def activity_fixed_point(offered_bits: float, model: NetworkModel, tol: float | None = None,
                         max_iter: int | None = None, polish: bool = True) -> ActivityResult:
    """Self-consistent BS activity for an absolute offered load (bit/s).

    Interferers start fully active and the activity is updated by successive
    substitution.  Iterates above one are clipped to one when used as
    interferer activity; a fixed point at or above one is reported as
    infeasible rather than raised.

    Close to the feasible load the map is nearly tangent to the identity and
    substitution crawls.  With ``polish`` the last iterate, which bounds the
    fixed point from above, brackets a Brent solve instead of raising.
    """
    tol = model.tol if tol is None else tol
    max_iter = model.max_iter if max_iter is None else max_iter
    if offered_bits < 0:
        raise ValueError("offered load must be non-negative")
    if offered_bits == 0:
        return ActivityResult(0.0, 0, (1.0, 0.0), True, 1.0)
    rho = 1.0
    history = [rho]
    for it in range(1, max_iter + 1):
        new = model.busy_time(offered_bits, min(rho, 1.0))
        history.append(new)
        if new >= 1.0 and rho >= 1.0:
            return ActivityResult(new, it, tuple(history), False, 1.0)
        if _distance_to_fixed_point(history) <= tol:
            return ActivityResult(new, it, tuple(history), new < 1.0, min(rho, 1.0))
        rho = new
    if not polish:
        raise ConvergenceError(f"activity did not converge in {max_iter} iterations", rho)

    def residual(r):
        return model.busy_time(offered_bits, r) - r

    root = brentq(residual, 0.0, rho, xtol=tol * 1e-4, rtol=1e-12)
    new = model.busy_time(offered_bits, root)
    history.append(new)
    return ActivityResult(new, max_iter, tuple(history), new < 1.0, root)


def feasible_load(model: NetworkModel, target: float = FEASIBLE_ACTIVITY,
                  rel_tol: float = 1e-9) -> float:
    """Largest offered load (bit/s) whose converged activity stays <= ``target``.

    Bisection on the offered load, using the fixed point at a tolerance two
    orders tighter than the model's.
    """
    if model.radio.bandwidth <= 0:
        return 0.0
    tight = min(model.tol, 1e-6)

    def ok(bits):
        res = activity_fixed_point(bits, model, tol=tight, max_iter=10_000)
        return res.activity <= target

    # The interference-free rate sum brackets the answer from above.
    hi = target / model.busy_time(1.0, 0.0)
    lo = target / model.busy_time(1.0, 1.0)
    if not ok(lo):  # pragma: no cover - busy_time is monotone in activity
        raise RuntimeError("lower bracket infeasible")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def activity(load: float, model: NetworkModel, tol: float | None = None) -> ActivityResult:
    """Activity at a load normalized to the feasible load."""
    return activity_fixed_point(load * model.capacity_bits, model, tol=tol)


def total_energy(load: float | None, model: NetworkModel, awake: bool = True) -> float:
    """Energy per second (W) for serving a normalized load.

    ``awake=False`` (or ``load=None``) is the sleep state.
    """
    if not awake or load is None:
        return model.power.P_sleep
    if load < 0 or load > 1 + 1e-9:
        raise InfeasibleLoadError(f"normalized load {load} outside [0, 1]")
    res = activity(load, model, tol=model.energy_tol)
    if not res.feasible:
        raise InfeasibleLoadError(f"load {load} drives activity to {res.activity:.4f}")
    return model.dynamic_power * res.activity + model.power.P_idle


def total_energy_per_location(load: float, model: NetworkModel) -> float:
    """Same quantity summed location by location from the converged rates."""
    res = activity(load, model, tol=model.energy_tol)
    rates = model.link_budget.rates(res.interferer_activity)
    lam = model.traffic.arrival_rate(load * model.capacity_bits)
    S = model.traffic.packet_size
    x = S / rates
    busy = lam * x
    return float(np.sum(lam * (model.pa_power + model.power.P_c) * x)
                 + (1.0 - np.sum(busy)) * model.power.P_idle)


@dataclass(frozen=True)
class CostCurve:
    """Energy (W) tabulated on a load grid ``0, dl, 2 dl, ..., 1``."""

    delta_l: float
    load_grid: np.ndarray = field(repr=False)
    energy: np.ndarray = field(repr=False)
    P_sleep: float = 0.0

    @property
    def P_idle(self) -> float:
        return float(self.energy[0])

    @property
    def n_units(self) -> int:
        return len(self.load_grid) - 1

    def at_units(self, units: int) -> float:
        """Energy at ``units * delta_l`` (awake)."""
        if not 0 <= units <= self.n_units:
            raise InfeasibleLoadError(f"{units} units outside 0..{self.n_units}")
        return float(self.energy[units])

    @property
    def marginal(self) -> np.ndarray:
        return np.diff(self.energy)


_CURVE_CACHE: dict = {}


def _model_key(model: NetworkModel):
    return (model.radio, model.power, model.traffic, model.cell_radius, model.energy_tol,
            model.max_iter)


def build_cost_curve(model: NetworkModel, delta_l: float = 0.05) -> CostCurve:
    """Tabulate ``total_energy`` on the ``delta_l`` grid; memoized on model parameters."""
    if not delta_l > 0:
        raise ValueError("delta_l must be positive")
    n = round(1.0 / delta_l)
    if abs(n * delta_l - 1.0) > 1e-9:
        raise ValueError(f"delta_l={delta_l} does not divide the feasible load")
    key = (_model_key(model), n)
    if key in _CURVE_CACHE:
        return _CURVE_CACHE[key]
    grid = np.arange(n + 1) / n
    energy = np.array([total_energy(float(x), model) for x in grid])
    grid.setflags(write=False)
    energy.setflags(write=False)
    curve = CostCurve(delta_l=1.0 / n, load_grid=grid, energy=energy,
                      P_sleep=model.power.P_sleep)
    _CURVE_CACHE[key] = curve
    return curve
