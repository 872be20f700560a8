import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def _sample(name):
    from skimage import data as skdata
    return getattr(skdata, name)()[..., :3].transpose(2, 0, 1).astype(np.float64)


@pytest.fixture(scope="session")
def natural_images():
    """Four bundled photographs as (3, H, W) float64, even-cropped."""
    out = {}
    for name in ("astronaut", "coffee", "chelsea", "rocket"):
        x = _sample(name)
        h, w = x.shape[1:]
        out[name] = x[:, : h - h % 2, : w - w % 2]
    return out


@pytest.fixture(scope="session")
def natural_crop(natural_images):
    """96x96 textured crop of the astronaut image."""
    return natural_images["astronaut"][:, 100:196, 180:276].copy()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, printed after the run
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, text = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")
