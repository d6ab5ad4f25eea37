import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bridgefuse import synth
from bridgefuse.records import FeaturePoint, Modality

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    print_blob=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def small_spec():
    """A 10 x 6 ft deck with one defect; quick enough for per-test use."""
    return synth.SyntheticSpec(
        deck_extent=(0.0, 10.0, 0.0, 6.0),
        defects=((3.0, 7.0, 1.5, 4.5),),
    )


@pytest.fixture(scope="session")
def small_bundle(small_spec):
    return synth.generate_synthetic_bundle(small_spec, 7)


def fp(x, y, v, mod=Modality.IE):
    return FeaturePoint(float(x), float(y), float(v), mod)
