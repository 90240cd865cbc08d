import math

import numpy as np
import pytest

from mmgident.datagen import GroundTruth, ManeuverScript, WindScript, generate_maneuver
from mmgident.params import FixedModelConfig, ground_truth


@pytest.fixture(scope="session")
def truth():
    return GroundTruth.default()


@pytest.fixture(scope="session")
def theta():
    return ground_truth()


@pytest.fixture(scope="session")
def cfg():
    return FixedModelConfig()


@pytest.fixture(scope="session")
def short_set(truth):
    """Three short windy trajectories covering forward, turning and astern work."""
    wind = WindScript(seed=3)
    return [
        generate_maneuver(ManeuverScript("random", 150.0, init=(0, 0, 0, 0.3, 0, 0), seed=5),
                          wind, truth, "R"),
        generate_maneuver(ManeuverScript("turning", 120.0, delta=math.radians(-20), np_rps=10.0,
                                         course_keeping=30.0), wind.with_(seed=4), truth, "T"),
        generate_maneuver(ManeuverScript("berthing", 100.0, init=(0, 0, 0, 0.25, 0, 0),
                                         np_rps=6.0, reverse_np=20.0, approach_time=30,
                                         turn_time=20), wind.with_(seed=6, mean_speed=0.3),
                          truth, "B-S"),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Record and print a one-line PASS/FAIL verdict for an acceptance criterion."""
    def record(code, ok, detail):
        line = f"{code}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
