"""scikit-learn style front ends.

``EnergyCostCurve`` fits the physical model once and maps loads to energy.
``EnergyMarket`` clears load vectors through the clearinghouse and predicts
the percentage of energy saved.  Both expose ``get_params``/``set_params``
and ``clone`` cleanly, so they drop into grid searches over parameters.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone

from ._validation import check_delta_l, check_is_fitted, check_load_column, check_loads
from .energy import NetworkModel, PowerParams, TrafficModel, build_cost_curve
from .market import MnoState, clearinghouse_round, welfare_oracle
from .radio import RadioParams, dbm_to_watt


class EnergyCostCurve(TransformerMixin, BaseEstimator):
    """Energy consumption (W) of one operator versus normalized offered load.

    Parameters
    ----------
    cell_radius : float
        Cell radius in km.
    p_max_pa_dbm, tx_power_dbm : float
        PA maximum output power and mean BS transmit power, in dBm.
    eta_max : float
        PA efficiency at maximum output.
    pathloss_exponent, shadow_sigma_db, bandwidth_hz, noise_dbm, outage_target
        Radio parameters.
    gain_offset_db : float
        Path gain at 1 km.
    P_c, P_idle, P_sleep : float
        Static powers in W.
    delta_l : float
        Grid spacing of the tabulated curve.

    Attributes
    ----------
    model_ : NetworkModel
    curve_ : CostCurve
    feasible_load_bits_ : float
        Offered load (bit/s) that maps to normalized load 1.
    """

    def __init__(self, cell_radius=1.0, p_max_pa_dbm=53.0, tx_power_dbm=46.0, eta_max=0.8,
                 pathloss_exponent=3.6, shadow_sigma_db=5.5, bandwidth_hz=20e6,
                 noise_dbm=-106.0, outage_target=0.10, gain_offset_db=0.0,
                 P_c=58.6, P_idle=58.6, P_sleep=0.0, delta_l=0.05):
        self.cell_radius = cell_radius
        self.p_max_pa_dbm = p_max_pa_dbm
        self.tx_power_dbm = tx_power_dbm
        self.eta_max = eta_max
        self.pathloss_exponent = pathloss_exponent
        self.shadow_sigma_db = shadow_sigma_db
        self.bandwidth_hz = bandwidth_hz
        self.noise_dbm = noise_dbm
        self.outage_target = outage_target
        self.gain_offset_db = gain_offset_db
        self.P_c = P_c
        self.P_idle = P_idle
        self.P_sleep = P_sleep
        self.delta_l = delta_l

    def _network_model(self) -> NetworkModel:
        radio = RadioParams(
            pathloss_exponent=self.pathloss_exponent,
            shadow_sigma=self.shadow_sigma_db,
            bandwidth=self.bandwidth_hz,
            noise_power=dbm_to_watt(self.noise_dbm),
            tx_power=dbm_to_watt(self.tx_power_dbm),
            outage_target=self.outage_target,
            gain_offset_db=self.gain_offset_db,
        )
        power = PowerParams(
            eta_max=self.eta_max,
            p_max_pa=dbm_to_watt(self.p_max_pa_dbm),
            p_max_avg=dbm_to_watt(self.tx_power_dbm),
            P_c=self.P_c,
            P_idle=self.P_idle,
            P_sleep=self.P_sleep,
        )
        return NetworkModel(radio=radio, power=power, traffic=TrafficModel(),
                            cell_radius=self.cell_radius)

    def fit(self, X=None, y=None):
        delta_l = check_delta_l(self.delta_l)
        self.model_ = self._network_model()
        self.feasible_load_bits_ = self.model_.capacity_bits
        if not self.feasible_load_bits_ > 0:
            raise ValueError("model has no feasible load (zero bandwidth?)")
        self.curve_ = build_cost_curve(self.model_, delta_l)
        return self

    def transform(self, X):
        """Energy (W) at each load, interpolated linearly between grid points."""
        check_is_fitted(self, "curve_")
        loads = check_load_column(X)
        return np.interp(loads, self.curve_.load_grid, self.curve_.energy)[:, None]

    def predict(self, X):
        return self.transform(X)[:, 0]


class EnergyMarket(BaseEstimator):
    """Capacity-trading clearinghouse over operators with a shared cost curve.

    ``fit`` builds (or reuses) the cost curve; ``predict`` maps rows of
    per-operator loads to the percentage of energy saved by one round.

    Parameters
    ----------
    cost_model : EnergyCostCurve, optional
        Cloned on fit.  Defaults to the reference network.
    delta_l : float
        Tradable unit of normalized load.
    e_tr : float
        Per-unit transfer energy (W) charged to each side of a trade.
    solver : {"clearinghouse", "oracle"}
        ``"oracle"`` replaces the mechanism by exhaustive welfare search.
    """

    def __init__(self, cost_model=None, delta_l=0.05, e_tr=0.0, solver="clearinghouse"):
        self.cost_model = cost_model
        self.delta_l = delta_l
        self.e_tr = e_tr
        self.solver = solver

    def fit(self, X=None, y=None):
        if self.solver not in ("clearinghouse", "oracle"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.e_tr < 0:
            raise ValueError("e_tr must be non-negative")
        delta_l = check_delta_l(self.delta_l)
        base = EnergyCostCurve() if self.cost_model is None else self.cost_model
        cost = clone(base).set_params(delta_l=delta_l)
        self.cost_model_ = cost.fit()
        self.curve_ = self.cost_model_.curve_
        if X is not None:
            self.n_features_in_ = check_loads(X).shape[1]
        return self

    def states(self, loads) -> list:
        check_is_fitted(self, "curve_")
        row = check_loads(loads)
        if row.shape[0] != 1:
            raise ValueError("states() takes a single load vector")
        return [MnoState(i, float(x), self.curve_, e_tr=float(self.e_tr))
                for i, x in enumerate(row[0])]

    def clear(self, loads):
        """Full :class:`MarketOutcome` for one load vector."""
        states = self.states(loads)
        if self.solver == "oracle":
            return welfare_oracle(states)
        return clearinghouse_round(states)

    def predict(self, X):
        check_is_fitted(self, "curve_")
        X = check_loads(X, getattr(self, "n_features_in_", None))
        return np.array([self.clear(row).savings_pct for row in X])
