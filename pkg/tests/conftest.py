"""Shared fixtures: system parameters and two planned reference missions.

The nominal mission is the 2 m benchmark transport; the short mission uses
faster kinematic bounds over ~0.6 m so that closed-loop simulations stay
cheap inside unit tests.
"""

import numpy as np
import pytest

from hookquad.config import nominal_mission
from hookquad.model import SystemParams
from hookquad.planner import HyperParams, MissionSpec, plan_mission


def short_mission() -> MissionSpec:
    hyper = HyperParams(v_max=1.2, a_max=0.5, lambda_max=0.1, w=0.5)
    return MissionSpec(
        r0=np.array([-0.4, 0.0, 0.5]),
        v0=np.zeros(3),
        r_L_init=np.zeros(3),
        n_hook=np.array([1.0, 0.0, 0.0]),
        r_L_target=np.array([0.6, 0.0, 0.0]),
        target_yaw=0.0,
        r_F=np.array([1.2, 0.3, 0.6]),
        hyper=hyper,
    )


@pytest.fixture(scope="session")
def params():
    return SystemParams()


@pytest.fixture(scope="session")
def loaded():
    return SystemParams().with_payload(0.075)


@pytest.fixture(scope="session")
def nominal_spec():
    return nominal_mission()


@pytest.fixture(scope="session")
def nominal_plan(nominal_spec):
    return plan_mission(nominal_spec)


@pytest.fixture(scope="session")
def short_spec():
    return short_mission()


@pytest.fixture(scope="session")
def short_plan(short_spec):
    return plan_mission(short_spec)
