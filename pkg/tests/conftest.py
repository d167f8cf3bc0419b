import numpy as np
import pytest

from ternary_mmc.energy import ModelParams, PhasePair
from ternary_mmc.grid import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return ModelParams()


def admissible(grid, rng, spread=0.08, lo=0.15, hi=0.35):
    c1, c2 = rng.uniform(lo, hi, 2)
    return PhasePair(c1 + spread * rng.uniform(-1, 1, grid.shape),
                     c2 + spread * rng.uniform(-1, 1, grid.shape))


def mean_zero(rng, shape):
    v = rng.standard_normal(shape)
    return v - v.mean()


def constant_pair(grid, c1, c2):
    return PhasePair(np.full(grid.shape, c1), np.full(grid.shape, c2))


def grid(n=16, length=64.0):
    return Grid(n, length)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Print and collect one PASS/FAIL line per acceptance criterion."""
    def report(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
