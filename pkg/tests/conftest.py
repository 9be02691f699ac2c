from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from shadowlab.groups import default_generators, parse_presentation

settings.register_profile(
    "shadowlab",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("shadowlab")


@pytest.fixture(scope="session")
def families():
    return [parse_presentation(t) for t in ("F(2)", "Z^2", "Heis", "BS(1,2)", "BS(1,3)")]


@pytest.fixture
def bs2():
    spec = parse_presentation("BS(1,2)")
    return spec, default_generators(spec)
