from __future__ import annotations

from pathlib import Path

import pytest

from hjmlevy.measures import LevyMeasureSpec, VolatilitySpec, validate

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "hjmlevy" / "configs"


@pytest.fixture
def unit_vol() -> VolatilitySpec:
    return VolatilitySpec.constant(1.0)


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


def measure(kind: str, **kw):
    spec = getattr(LevyMeasureSpec, kind)(**kw)
    return validate(spec, VolatilitySpec.constant(1.0))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
