"""Tunable constants for every tester.

Each algorithm in this package is specified up to unnamed big-O constants.
:class:`Config` collects all of them in a single flat table so that
experiments can override any value from a ``key = value`` file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a configuration value is missing, unknown or out of range."""


@dataclass(frozen=True)
class Config:
    """Named constants used by the testers.

    Repetition counts are always ``ceil(multiplier * formula)`` where the
    formula is the growth rate stated for the corresponding procedure.
    Logarithms are natural logarithms unless a field says otherwise.
    """

    # dist-core
    cond_cache_size: int = 64

    # primitives
    compare_reps_mult: float = 200.0
    geometric_cap_mult: float = 30.0
    geometric_exact_draws: int = 64

    # tolerant uniformity
    const_approx_R_mult: float = 3.0
    const_approx_window: tuple[float, float] = (0.98, 1.02)
    const_approx_gamma: float = 0.01
    const_approx_threshold_div: float = 250.0
    oracle_gamma: float = 0.01
    oracle_low: float = 0.45
    oracle_high: float = 2.2
    single_element_K_mult: float = 4.0
    given_good_K_mult: float = 4.0
    gamma1_accept_mult: float = 1.1
    gamma1_min_mult: float = 1.0
    close_terms_T_offset: int = 1
    close_terms_C_mult: float = 4.0
    close_terms_Cprime_mult: float = 4.0
    close_terms_beta_div: float = 400.0
    z_estimate_gamma_div: float = 20.0
    z_estimate_floor_mult: float = 40.0
    unif_scan_K_mult: float = 4.0
    unif_scan_low: float = 0.78
    unif_scan_high: float = 1.27
    C_tu: float = 3.0

    # tolerant identity
    tid_log_power: int = 2
    est1_R_mult: float = 1.0
    est2_R_mult: float = 1e-3
    est2_const_approx_R_mult: float = 0.05
    est2_window: tuple[float, float] = (0.98, 1.02)
    est3_R_mult: float = 1.0
    est3_T_mult: float = 0.05
    est3_low: float = 0.06
    est3_high: float = 18.0
    pd_T_offset: int = 1
    pd_S_mult: float = 1.0
    pd_singleton_K_mult: float = 1.0
    tid_mass_K_mult: float = 0.05
    C_pd: float = 4.0
    C_ti: float = 4.0

    # monotonicity
    mono_alpha_div: float = 4.0
    dist_to_flat_samples_mult: float = 1.0
    dist_to_flat_inner_div: float = 8.0
    expo_tau_floor_mult: float = 1.0
    expo_product_floor_mult: float = 1.0
    expo_R_mult: float = 1.0

    # paircond identity
    vv_mult: float = 0.5
    vv_null_sims: int = 10_000
    vv_quantile: float = 0.9
    pcond_alpha_floor_mult: float = 1.0
    pcond_product_floor_mult: float = 1.0
    pcond_R_mult: float = 1.0
    pcond_reps_mult: float = 16.0
    pcond_reject_frac: float = 2.0 / 3.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                lo, hi = value
                if not 0 < lo < hi:
                    raise ConfigError(f"{f.name} must satisfy 0 < low < high, got {value}")
            elif isinstance(value, (int, float)) and not isinstance(value, bool):
                if f.name in ("close_terms_T_offset", "pd_T_offset"):
                    if value < 0:
                        raise ConfigError(f"{f.name} must be non-negative, got {value}")
                elif value <= 0:
                    raise ConfigError(f"{f.name} must be positive, got {value}")
        if not 0 < self.oracle_low < 1 < self.oracle_high:
            raise ConfigError("oracle cut points must satisfy 0 < low < 1 < high")
        if not 0 < self.vv_quantile < 1:
            raise ConfigError("vv_quantile must lie in (0, 1)")
        if not 0 < self.pcond_reject_frac <= 1:
            raise ConfigError("pcond_reject_frac must lie in (0, 1]")

    def replace(self, **changes: Any) -> "Config":
        """Return a copy with some fields changed."""
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "Config":
        """Build a config from a mapping of field names to values.

        String values are coerced to the type of the default value.
        """
        known = {f.name: f for f in fields(cls)}
        defaults = cls()
        parsed: dict[str, Any] = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = _coerce(key, raw, getattr(defaults, key))
        return cls(**parsed)

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        """Read a flat ``key = value`` file; ``#`` starts a comment."""
        values: dict[str, str] = {}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            values[key] = raw
        return cls.from_mapping(values)


def _coerce(key: str, raw: Any, default: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, tuple):
            parts = raw.strip("()[] ").split(",")
            return tuple(float(p) for p in parts)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from exc


DEFAULT_CONFIG = Config()
