import numpy as np
import pytest

from hypomimiacoach.exercises import load_exercise_catalog
from hypomimiacoach.frames import CANONICAL_AUS, AUFrame


@pytest.fixture(scope="session")
def catalog():
    return load_exercise_catalog()


def make_frame(t_ms: int, base: float = 0.05, **aus: float) -> AUFrame:
    """A full-schema frame with every AU at `base` except the overrides."""
    intensities = {au: base for au in CANONICAL_AUS}
    for code, value in aus.items():
        intensities[code] = value
    return AUFrame(t_ms=t_ms, intensities=intensities)


@pytest.fixture
def frame_factory():
    return make_frame


def random_params(rng: np.random.Generator, D=8, F=4, C1=4, C2=4, scale=0.5):
    """A random parameter tuple in kernel order for small-model tests."""
    return (
        rng.standard_normal((8, D, F)) * scale,
        rng.standard_normal((8, F)) * 0.1,
        rng.standard_normal((F, F)) * scale,
        rng.standard_normal((F, F)) * scale,
        rng.standard_normal((3, F, C1)) * scale,
        rng.standard_normal(C1) * 0.1,
        rng.standard_normal((3, C1, C2)) * scale,
        rng.standard_normal(C2) * 0.1,
        rng.standard_normal((C2, 2)) * scale,
        rng.standard_normal(2) * 0.1,
    )
