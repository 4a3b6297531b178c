from pathlib import Path

import numpy as np
import pytest

from rankcurve.poly import load_system_text

DATA = Path(__file__).resolve().parents[1] / "src" / "rankcurve" / "data"


def load(name):
    return load_system_text((DATA / f"{name}.sys").read_text())


@pytest.fixture
def system():
    return load


@pytest.fixture
def data_dir():
    return DATA


def curve_gap(x):
    """|x1^3 - x2|, the distance proxy for the cubic curve."""
    return abs(x[0] ** 3 - x[1])


CUBIC_WITNESSES = np.array([[-0.3639, -0.0840], [-0.8296, -0.5982], [0.0, -0.0364]])


def cubic_distance(x):
    """Euclidean distance from x to the curve x2 = x1^3.

    The closest parameter s solves 6 s^5 - 6 x2 s^2 + 2 s - 2 x1 = 0.
    """
    roots = np.roots([6.0, 0.0, 0.0, -6.0 * x[1], 2.0, -2.0 * x[0]])
    s = roots[np.abs(roots.imag) < 1e-9].real
    return float(np.min(np.hypot(s - x[0], s ** 3 - x[1])))
