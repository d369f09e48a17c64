import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

LOGISTIC_BETA_TRUE = (1.0, -0.8, 0.6, 0.4, -0.3)


@pytest.fixture(scope="session")
def logistic_data():
    from dapmh.models import simulate_logistic

    return simulate_logistic(1000, 5, LOGISTIC_BETA_TRUE, seed=1)


@pytest.fixture(scope="session")
def mixture_data():
    from dapmh.models import simulate_mixture

    return simulate_mixture(1000, 3)


def criterion_line(num: int, passed: bool, text: str) -> None:
    """One pass/fail line per acceptance criterion, printed eagerly."""
    status = "PASS" if passed else "FAIL"
    print(f"\n[criterion {num:>2}] {status}: {text}", flush=True)
