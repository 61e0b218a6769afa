import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from campaignfx.series import DailySeries

settings.register_profile(
    "ci",
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("ci")


def make_series(values, venue_id="v0", origin_day=0) -> DailySeries:
    return DailySeries(
        venue_id=venue_id,
        origin_day=origin_day,
        values=np.asarray(values, dtype=float),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
