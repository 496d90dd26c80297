import json
import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")

ORACLE_PATH = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(ORACLE_PATH.read_text())


def small_fraction(rng: random.Random, den: int = 64) -> Fraction:
    return Fraction(rng.randint(-den, den), den * rng.randint(1, 8))


def random_rational_state(rng: random.Random, N: int, n_cut: int, nonzero: int = 6,
                          complex_kind: bool = False):
    """Small polynomial data: the first ``nonzero`` coefficients random, the rest zero."""
    from flatjet.scalars import GaussianRational

    comps = []
    for _ in range(N):
        seq = []
        for n in range(n_cut + 1):
            if n >= nonzero:
                seq.append(Fraction(0))
            elif complex_kind:
                seq.append(GaussianRational(small_fraction(rng) / 10, small_fraction(rng) / 10))
            else:
                seq.append(small_fraction(rng) / 10)
        comps.append(seq)
    return comps


@pytest.fixture(scope="session")
def kdv_target():
    from flatjet.jets import kdv_project_to_compat

    return kdv_project_to_compat([Fraction(1, 10000)], 14)


@pytest.fixture(scope="session")
def kdv_synthesis(kdv_target):
    from flatjet.model import make_preset, zero_state
    from flatjet.synth import synthesize

    spec = make_preset("kdv")
    Y0 = zero_state(1, len(kdv_target.components[0]) - 1)
    return synthesize(spec, Y0, kdv_target, T=1.0, n_max=12, k_max=24)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
