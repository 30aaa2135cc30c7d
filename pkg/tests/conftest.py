import numpy as np
import pytest

from hdadapt.data import SynthSpec, generate_synthetic

SMALL_DIM = 1024


@pytest.fixture(scope="session")
def small_corpus():
    """4 domains x 3 classes x 15 segments, short enough for fast unit tests."""
    return generate_synthetic(SynthSpec(n_domains=4, n_classes=3, n_sensors=2, n_timesteps=16,
                                        samples_per_class=15, shift=1.0, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
