"""Experiment configuration: ``key = value`` text with optional units.

Example::

    # reference network values unless overridden
    cell_radius = 1 km
    tx_power    = 46 dBm
    mno_count   = 5
    loads       = 90%, 90%, 85%, 65%, 60%
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace

from .estimators import EnergyCostCurve


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _watt_to_dbm(w: float) -> float:
    if w <= 0:
        raise ConfigError("power must be positive to express in dBm")
    return 10.0 * math.log10(w) + 30.0


# Canonical unit first; converters map an accepted unit into the canonical one.
_DBM = {"dbm": lambda v: v, "w": _watt_to_dbm, "mw": lambda v: _watt_to_dbm(v / 1e3)}
_WATT = {"w": lambda v: v, "mw": lambda v: v / 1e3, "dbm": lambda v: 10 ** ((v - 30) / 10)}
_FRACTION = {"": lambda v: v, "%": lambda v: v / 100.0}
_PLAIN = {"": lambda v: v}

_UNITS = {
    "cell_radius": {"km": lambda v: v, "m": lambda v: v / 1e3, "": lambda v: v},
    "p_max_pa": _DBM,
    "tx_power": _DBM,
    "eta_max": _FRACTION,
    "pathloss_exponent": _PLAIN,
    "shadow_sigma": {"db": lambda v: v, "": lambda v: v},
    "bandwidth": {"hz": lambda v: v, "khz": lambda v: v * 1e3, "mhz": lambda v: v * 1e6,
                  "ghz": lambda v: v * 1e9, "": lambda v: v},
    "noise_power": {"dbm": lambda v: v, "": lambda v: v},
    "outage_target": _FRACTION,
    "gain_offset": {"db": lambda v: v, "": lambda v: v},
    "p_c": _WATT,
    "p_idle": _WATT,
    "p_sleep": _WATT,
    "delta_l": _FRACTION,
    "e_tr": _WATT,
    "sweep_min": _FRACTION,
    "sweep_max": _FRACTION,
    "loads": _FRACTION,
}
_INTS = {"mno_count", "rounds"}
_LISTS = {"loads"}
_STRINGS = {"output_path"}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z%]*)\s*$")


@dataclass(frozen=True)
class ExperimentConfig:
    cell_radius: float = 1.0
    p_max_pa: float = 53.0  # dBm
    tx_power: float = 46.0  # dBm
    eta_max: float = 0.8
    pathloss_exponent: float = 3.6
    shadow_sigma: float = 5.5  # dB
    bandwidth: float = 20e6  # Hz
    noise_power: float = -106.0  # dBm
    outage_target: float = 0.10
    gain_offset: float = 0.0  # dB
    p_c: float = 58.6  # W
    p_idle: float = 58.6
    p_sleep: float = 0.0
    mno_count: int = 2
    delta_l: float = 0.05
    e_tr: float = 0.0
    loads: tuple = ()
    sweep_min: float | None = None
    sweep_max: float = 1.0
    rounds: int = 24
    output_path: str | None = None

    def validate(self) -> "ExperimentConfig":
        checks = [
            ("cell_radius", self.cell_radius > 0, "must be positive"),
            ("eta_max", 0 < self.eta_max <= 1, "must lie in (0, 1]"),
            ("tx_power", self.tx_power <= self.p_max_pa, "must not exceed p_max_pa"),
            ("pathloss_exponent", self.pathloss_exponent > 2, "must exceed 2"),
            ("shadow_sigma", self.shadow_sigma >= 0, "must be non-negative"),
            ("bandwidth", self.bandwidth > 0, "must be positive"),
            ("outage_target", 0 < self.outage_target < 1, "must lie in (0, 1)"),
            ("p_c", self.p_c >= 0, "must be non-negative"),
            ("p_idle", self.p_idle >= 0, "must be non-negative"),
            ("p_sleep", 0 <= self.p_sleep <= self.p_idle, "must lie in [0, p_idle]"),
            ("mno_count", self.mno_count >= 2, "must be at least 2"),
            ("delta_l", 0 < self.delta_l <= 1
             and abs(round(1 / self.delta_l) * self.delta_l - 1) < 1e-9,
             "must be 1/n for a positive integer n"),
            ("e_tr", self.e_tr >= 0, "must be non-negative"),
            ("sweep_max", 0 < self.sweep_max <= 1, "must lie in (0, 1]"),
            ("rounds", self.rounds >= 1, "must be positive"),
        ]
        if self.sweep_min is not None:
            checks.append(("sweep_min", 0 <= self.sweep_min <= self.sweep_max,
                           "must lie in [0, sweep_max]"))
        if self.loads:
            checks.append(("loads", len(self.loads) == self.mno_count,
                           f"needs {self.mno_count} entries (mno_count)"))
            checks.append(("loads", all(0 <= x <= 1 for x in self.loads),
                           "entries must lie in [0, 1]"))
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{key}: {msg} (got {getattr(self, key)!r})")
        return self

    def cost_model(self) -> EnergyCostCurve:
        return EnergyCostCurve(
            cell_radius=self.cell_radius, p_max_pa_dbm=self.p_max_pa,
            tx_power_dbm=self.tx_power, eta_max=self.eta_max,
            pathloss_exponent=self.pathloss_exponent, shadow_sigma_db=self.shadow_sigma,
            bandwidth_hz=self.bandwidth, noise_dbm=self.noise_power,
            outage_target=self.outage_target, gain_offset_db=self.gain_offset,
            P_c=self.p_c, P_idle=self.p_idle, P_sleep=self.p_sleep, delta_l=self.delta_l)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "loads" in kw and "mno_count" not in kw:
            kw["mno_count"] = len(kw["loads"])
        return replace(self, **kw).validate()


_KEYS = {f.name for f in fields(ExperimentConfig)}


def _parse_number(key: str, raw: str) -> float:
    m = _NUMBER.match(raw)
    if not m:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r} as a number")
    value, unit = float(m.group(1)), m.group(2).lower()
    conv = _UNITS.get(key, _PLAIN)
    if unit not in conv:
        accepted = ", ".join(u or "(none)" for u in conv)
        raise ConfigError(f"{key}: unit {m.group(2)!r} not accepted (expected {accepted})")
    return conv[unit](value)


def _parse_value(key: str, raw: str):
    if key in _STRINGS:
        return raw.strip()
    if key in _INTS:
        v = _parse_number(key, raw)
        if v != int(v):
            raise ConfigError(f"{key}: expected an integer, got {raw.strip()!r}")
        return int(v)
    if key in _LISTS:
        parts = raw.split(",") if "," in raw else raw.split()
        return tuple(_parse_number(key, p) for p in parts if p.strip())
    return _parse_number(key, raw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; omitted keys keep the reference defaults."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in _KEYS:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in values:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        values[key] = _parse_value(key, raw)
    if "loads" in values and "mno_count" not in values:
        values["mno_count"] = len(values["loads"])
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
