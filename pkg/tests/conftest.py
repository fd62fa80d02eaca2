import numpy as np
import pytest

from fracgrad.grid import GridSpec, box_masks, field_from_function
from fracgrad.selfcheck import band_limited, gaussian_bump  # noqa: F401  (shared helpers)

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spec1():
    return GridSpec(1, 128)


@pytest.fixture
def spec2():
    return GridSpec(2, 32)


def standard_masks(spec):
    """The nested geometry used throughout: Ω=(1/4,3/4), Ω₂=(5/16,11/16), Ω₁=(3/8,5/8) per axis."""
    return box_masks(
        spec,
        [[0.25, 0.75]] * spec.d,
        [[0.3125, 0.6875]] * spec.d,
        [[0.375, 0.625]] * spec.d,
    )


def sine_exterior(spec):
    return field_from_function(spec, lambda *x: np.sin(2 * np.pi * x[0] / spec.L))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
