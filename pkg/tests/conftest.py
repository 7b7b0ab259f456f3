import math

import pytest
from hypothesis import settings

from levcool.langevin import ModeSpec
from levcool.trap import MagnetSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

MASS = 23e-9
RADIUS = 100e-6
THICKNESS = 100e-6
MAGNETIZATION = 4.4e5


@pytest.fixture
def magnet():
    return MagnetSpec(mass=MASS, radius=RADIUS, thickness=THICKNESS, magnetization=MAGNETIZATION)


def z_mode(q=1e7, T=0.41, f=42.4):
    return ModeSpec("z", "translational", 2 * math.pi * f, MASS, q, T)


def beta_mode(q=2.1e6, T=0.41, f=178.8, inertia=7.8e-17):
    return ModeSpec("beta", "librational", 2 * math.pi * f, inertia, q, T)
