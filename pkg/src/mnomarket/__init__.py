"""Energy-saving capacity market between mobile network operators."""
from .config import ExperimentConfig, parse_config
from .energy import (CostCurve, NetworkModel, PowerParams, activity_fixed_point,
                     build_cost_curve, feasible_load, pa_input_power, total_energy)
from .estimators import EnergyCostCurve, EnergyMarket
from .geometry import HexLayout, build_layout, user_grid, wrapped_distance
from .market import (MarketOutcome, MatchResult, MnoState, Order, clearinghouse_round,
                     generate_asks, generate_bids, pmd_match, savings, welfare_oracle)
from .radio import LognormalDist, RadioParams, aggregate_interference, rate_at_outage

__version__ = "0.1.0"
