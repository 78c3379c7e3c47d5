"""
Shared fixtures for the lab tests
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.flux_models import make_flux
from core.profile import WaveParams, integrate_profile


@pytest.fixture(scope="session")
def burgers_params():
    return WaveParams(k=1.0, q=0.09, u0=1.0, u_i=0.5, flux=make_flux("burgers"))


@pytest.fixture(scope="session")
def burgers_profile(burgers_params):
    return integrate_profile(burgers_params)
