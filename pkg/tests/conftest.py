"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from condsense import OracleHandle, make_distribution

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def handle_for(weights, seed: int = 0, cfg=None) -> OracleHandle:
    """Oracle handle over the normalized ``weights``."""
    return OracleHandle(make_distribution(np.asarray(weights, dtype=np.float64)), seed=seed, cfg=cfg)


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def rate(outcomes) -> float:
    """Fraction of truthy outcomes."""
    outcomes = list(outcomes)
    return sum(bool(o) for o in outcomes) / len(outcomes)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion_line():
    """Record the PASS/FAIL line of an acceptance criterion.

    Lines are printed as they are produced and repeated, in order, in the
    terminal summary so that they survive output capture.
    """

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _CRITERIA[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
