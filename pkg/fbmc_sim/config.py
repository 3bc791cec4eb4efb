"""
Scenario Configuration
======================

Scalars that steer a study run: forecast uncertainty, capacity-calculation
parameters, contingency counts and the congestion-management penalties.

Resolution order (later wins):
1. dataclass defaults below
2. ``config.json`` in the grid directory
3. the study manifest JSON
4. command-line flags
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

from .errors import GridDataError

DEFAULT_HORIZON = 168
THREADS_ENV = "FBMC_SIM_THREADS"


class Setup(str, Enum):
    """Hybrid coupling setup."""

    SHC = "shc"
    AHC = "ahc"


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty terms of the congestion-management objective (EUR/MWh)."""

    curtailment_d0: float = 1500.0
    curtailment_market: float = 0.0
    rd_base_fb: float = 100.0
    rd_base_non_fb: float = 500.0
    rd_markup: float = 1.2

    @classmethod
    def from_dict(cls, data):
        return cls(**_known_keys(cls, data, "penalties"))


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    sigma_fb: float = 0.2
    sigma_nonfb: float = 0.3
    hours: tuple = tuple(range(1, DEFAULT_HORIZON + 1))
    threshold: float = 0.05
    minram_factor: float = 0.7
    core_floor: float = 0.2
    floor_ahc: bool = True
    frm_default: float = 0.05
    contingencies_mc: int = 5
    contingencies_cm: int = 2
    penalties: PenaltyConfig = field(default_factory=PenaltyConfig)
    ntc_overrides: dict = field(default_factory=dict)
    vbz_bounds: dict = field(default_factory=dict)
    balance_slack_penalty: float = None
    domain_hours: tuple = ()
    domain_vbz_mode: str = "zero"

    def __post_init__(self):
        if self.sigma_fb < 0 or self.sigma_nonfb < 0:
            raise GridDataError("forecast sigmas must be >= 0")
        if not self.hours:
            raise GridDataError("scenario needs at least one hour")
        if min(self.hours) < 1:
            raise GridDataError("hours are 1-indexed")
        if not 0 < self.threshold < 1:
            raise GridDataError(f"threshold {self.threshold} outside (0, 1)")
        if not 0 < self.core_floor < self.minram_factor <= 1:
            raise GridDataError(
                f"need 0 < core_floor ({self.core_floor}) < minram_factor "
                f"({self.minram_factor}) <= 1"
            )
        if self.contingencies_mc < 0 or self.contingencies_cm < 0:
            raise GridDataError("contingency counts must be >= 0")
        if self.domain_vbz_mode not in ("zero", "forecast"):
            raise GridDataError(f"unknown domain_vbz_mode {self.domain_vbz_mode!r}")

    @classmethod
    def from_dict(cls, data, base=None):
        """
        Build a config from a (partial) JSON-like mapping.

        Args:
            data (dict): Keys matching the dataclass fields. ``hours`` may be an
                int (horizon length), a list of hours or ``{"start", "end"}``.
            base (ScenarioConfig): Values not present in ``data`` come from here.

        Returns:
            ScenarioConfig: The merged configuration.
        """
        base = base or cls()
        values = _known_keys(cls, data, "scenario config")
        if "hours" in values:
            values["hours"] = parse_hours(values["hours"])
        if "domain_hours" in values:
            values["domain_hours"] = tuple(int(h) for h in values["domain_hours"])
        if "penalties" in values:
            merged = {**asdict(base.penalties), **values["penalties"]}
            values["penalties"] = PenaltyConfig.from_dict(merged)
        if "vbz_bounds" in values:
            values["vbz_bounds"] = {
                str(k): (float(v[0]), float(v[1])) for k, v in values["vbz_bounds"].items()
            }
        if "ntc_overrides" in values:
            values["ntc_overrides"] = {str(k): float(v) for k, v in values["ntc_overrides"].items()}
        return replace(base, **values)

    @classmethod
    def from_file(cls, path, base=None):
        path = Path(path)
        if not path.exists():
            return base or cls()
        with open(path, "r") as f:
            return cls.from_dict(json.load(f), base=base)

    def to_dict(self):
        data = asdict(self)
        data["hours"] = list(self.hours)
        data["domain_hours"] = list(self.domain_hours)
        data["vbz_bounds"] = {k: list(v) for k, v in self.vbz_bounds.items()}
        return data

    def resolved_domain_hours(self):
        """Hours for the domain plots; four evenly spread hours by default."""
        if self.domain_hours:
            return tuple(h for h in self.domain_hours if h in self.hours)
        hours = sorted(self.hours)
        step = max(len(hours) // 4, 1)
        return tuple(hours[i] for i in range(0, len(hours), step))[:4]


def parse_hours(value):
    if isinstance(value, int):
        return tuple(range(1, value + 1))
    if isinstance(value, dict):
        return tuple(range(int(value["start"]), int(value["end"]) + 1))
    return tuple(int(h) for h in value)


def max_workers():
    """Worker cap for per-hour solves, from ``FBMC_SIM_THREADS``."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(int(raw), 1)
        except ValueError:
            raise GridDataError(f"{THREADS_ENV}={raw!r} is not an integer")
    return min(4, os.cpu_count() or 1)


def _known_keys(cls, data, what):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise GridDataError(f"unknown {what} keys: {', '.join(unknown)}")
    return dict(data)
