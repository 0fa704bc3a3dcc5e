"""Link rates under log-normal shadowing and activity-weighted interference.

All arithmetic is in watts and km.  Shadowing is modeled in the dB domain
(normal with standard deviation ``shadow_sigma``); sums of shadowed powers are
approximated by a single log-normal that matches the first two moments
(Fenton-Wilkinson).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

BETA = math.log(10.0) / 10.0  # dB -> natural log
MIN_RATE = 1e3  # bit/s floor for degenerate deep-shadow corners


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer parameters; powers in watts."""

    pathloss_exponent: float = 3.6
    shadow_sigma: float = 5.5  # dB
    bandwidth: float = 20e6  # Hz
    noise_power: float = dbm_to_watt(-106.0)
    tx_power: float = dbm_to_watt(46.0)
    outage_target: float = 0.10
    gain_offset_db: float = 0.0  # path gain at 1 km

    def __post_init__(self):
        if not self.pathloss_exponent > 2:
            raise ValueError(f"pathloss_exponent must exceed 2, got {self.pathloss_exponent}")
        if self.shadow_sigma < 0:
            raise ValueError(f"shadow_sigma must be non-negative, got {self.shadow_sigma}")
        if not 0 < self.outage_target < 1:
            raise ValueError(f"outage_target must lie in (0, 1), got {self.outage_target}")
        if self.bandwidth < 0 or self.noise_power < 0 or self.tx_power <= 0:
            raise ValueError("bandwidth and noise_power must be >= 0, tx_power > 0")


@dataclass(frozen=True)
class LognormalDist:
    """Log-normal power whose dB value is ``N(mu_db, sigma_db**2)``."""

    mu_db: float
    sigma_db: float

    def __post_init__(self):
        if self.sigma_db < 0:
            raise ValueError(f"sigma_db must be non-negative, got {self.sigma_db}")

    @classmethod
    def from_moments(cls, mean: float, second_moment: float) -> "LognormalDist":
        if mean <= 0:
            raise ValueError(f"mean must be positive, got {mean}")
        ratio = max(second_moment / mean / mean, 1.0)  # avoid mean**2 underflow
        s2 = math.log(ratio)
        mu = math.log(mean) - s2 / 2.0
        return cls(mu_db=mu / BETA, sigma_db=math.sqrt(s2) / BETA)

    def quantile_db(self, q: float) -> float:
        return self.mu_db + norm.ppf(q) * self.sigma_db


def lognormal_moments(dist: LognormalDist) -> tuple[float, float]:
    """Linear-domain mean and second moment."""
    mu, s = BETA * dist.mu_db, BETA * dist.sigma_db
    return math.exp(mu + s * s / 2.0), math.exp(2.0 * mu + 2.0 * s * s)


def path_gain(d, alpha: float, offset_db: float = 0.0):
    """Distance-power law ``(d / 1 km) ** -alpha`` scaled by ``offset_db``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path_gain requires positive distance")
    g = d ** (-alpha) * 10.0 ** (offset_db / 10.0)
    return float(g) if g.ndim == 0 else g


def interference_moments(gains, activities, params: RadioParams):
    """Mean and second moment of the Bernoulli-thinned shadowed interference.

    ``gains`` has shape ``(..., n_interferers)``; ``activities`` broadcasts
    against it.  Each interferer is present with probability equal to its
    activity, independently of its shadowing.
    """
    gains = np.asarray(gains, dtype=float)
    rho = np.broadcast_to(np.asarray(activities, dtype=float), gains.shape)
    s = BETA * params.shadow_sigma
    m1 = math.exp(s * s / 2.0)
    m2 = math.exp(2.0 * s * s)
    power = params.tx_power * gains
    mean_k = rho * power * m1
    second_k = rho * power * power * m2
    mean = mean_k.sum(axis=-1)
    var = (second_k - mean_k * mean_k).sum(axis=-1)
    return mean, var + mean * mean


def aggregate_interference(interferers, params: RadioParams) -> LognormalDist | None:
    """Fenton-Wilkinson fit of the interference from ``(distance_km, activity)`` pairs.

    Returns ``None`` when no interferer is ever active.
    """
    pairs = [(float(d), float(a)) for d, a in interferers]
    for _, a in pairs:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"activity must lie in [0, 1], got {a}")
    pairs = [(d, a) for d, a in pairs if a > 0]
    if not pairs:
        return None
    d, a = np.array(pairs).T
    g = path_gain(d, params.pathloss_exponent, params.gain_offset_db)
    mean, second = interference_moments(g, a, params)
    return LognormalDist.from_moments(float(mean), float(second))


def _outage_sinr_db(signal_mu_db, i_mean, i_second, params: RadioParams):
    """10th-percentile (outage-target) SINR in dB, vectorized."""
    mean = i_mean + params.noise_power
    ratio = np.maximum(i_second + 2.0 * i_mean * params.noise_power
                       + params.noise_power ** 2, mean * mean) / (mean * mean)
    s2 = np.log(ratio)
    in_mu_db = (np.log(mean) - s2 / 2.0) / BETA
    in_sigma_db = np.sqrt(s2) / BETA
    spread = np.sqrt(params.shadow_sigma ** 2 + in_sigma_db ** 2)
    return signal_mu_db - in_mu_db + norm.ppf(params.outage_target) * spread


def shannon_rate(sinr_db, bandwidth: float):
    sinr = 10.0 ** (np.asarray(sinr_db, dtype=float) / 10.0)
    r = bandwidth * np.log2(1.0 + sinr)
    return np.maximum(r, MIN_RATE) if bandwidth > 0 else np.zeros_like(r)


def rate_at_outage(serving_distance: float, interference: LognormalDist | None,
                   params: RadioParams) -> float:
    """Shannon rate at the outage-target SINR quantile.

    The serving signal has median ``tx_power * path_gain``; noise is added to
    the interference mean before the interference-plus-noise log-normal is
    refitted.  SINR in dB is then a difference of independent normals.
    """
    if not serving_distance > 0:
        raise ValueError("serving_distance must be positive")
    g = path_gain(serving_distance, params.pathloss_exponent, params.gain_offset_db)
    sig_db = 10.0 * math.log10(params.tx_power * g)
    if interference is None:
        i_mean = i_second = 0.0
    else:
        i_mean, i_second = lognormal_moments(interference)
    if i_mean + params.noise_power <= 0:
        raise ValueError("interference-plus-noise power must be positive")
    sinr_db = _outage_sinr_db(sig_db, i_mean, i_second, params)
    return float(shannon_rate(sinr_db, params.bandwidth))


class LinkBudget:
    """Precomputed serving/interfering gains for one cell's user grid.

    ``rates(activity)`` evaluates every location's outage rate when all
    interferers share one activity level, which is the symmetric-network
    case used by the energy model.
    """

    def __init__(self, serving_distance: np.ndarray, interferer_distance: np.ndarray,
                 params: RadioParams):
        self.params = params
        self.serving_distance = np.asarray(serving_distance, dtype=float)
        self.interferer_distance = np.asarray(interferer_distance, dtype=float)
        a, off = params.pathloss_exponent, params.gain_offset_db
        self._sig_db = 10.0 * np.log10(params.tx_power * path_gain(self.serving_distance, a, off))
        self._gains = path_gain(self.interferer_distance, a, off)

    def rates(self, activity) -> np.ndarray:
        rho = np.clip(np.asarray(activity, dtype=float), 0.0, 1.0)
        mean, second = interference_moments(self._gains, rho, self.params)
        sinr_db = _outage_sinr_db(self._sig_db, mean, second, self.params)
        return shannon_rate(sinr_db, self.params.bandwidth)
