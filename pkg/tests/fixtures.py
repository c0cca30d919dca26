import numpy as np
import pytest

from YamabeLab.closed_forms import ExteriorBall, HalfSpace
from YamabeLab.conformal_core import Background
from YamabeLab.elliptic_solver import SolverParams, sample_oracle
from YamabeLab.exhaustion import (Annulus, GeometricLaw, Region,
                                  build_schedule, run_exhaustion)
from YamabeLab.grids import Ball, DomainSpec, Slab


ORIGIN4 = (0.0, 0.0, 0.0, 0.0)

SCENARIO_TEXT = """
name = "exterior"

[background]
kind = "flat"
n = 4

[[exclusions]]
shape = "ball"
center = [0.0, 0.0, 0.0, 0.0]
r0 = 1.0
q = 0.5

[schedule]
indices = 3
truncation = 4.0

[solver]
grid = 256

[normalization]
center = [0.0, 0.0, 0.0, 0.0]
inner = 1.0
outer = 2.0

[[probes]]
id = "core"
kind = "classify"
point = [0.0, 0.0, 0.0, 1.5]
rho = 0.5

[[probes]]
id = "edge"
kind = "segment"
point = [0.0, 0.0, 0.0, 0.0]
direction = [1.0, 0.0, 0.0, 0.0]
epsilon = 1.5

[[assertions]]
kind = "verdict"
probe_id = "core"
expect = "BoundedEvidence"

[[assertions]]
kind = "range"
column = "m_i"
min = 0.0
max = 1.0

[[oracles]]
kind = "ExteriorBall"
center = [0.0, 0.0, 0.0, 0.0]
radius = 1.0
points = [[2.0, 0.0, 0.0, 0.0], [0.0, 3.0, 0.0, 0.0]]
"""


@pytest.fixture
def params():
    return SolverParams(radial_grid=256, axisymmetric_grid=64)


@pytest.fixture
def ball_domain():
    return DomainSpec(Background('flat', 4), (Ball(ORIGIN4, 0.5),), truncation=4.0)


@pytest.fixture
def exterior_field(ball_domain, params):
    return sample_oracle(ball_domain, params, ExteriorBall(4, ORIGIN4, 0.5))


@pytest.fixture
def halfspace_field(params):
    dom = DomainSpec(Background('flat', 3), (Slab(),), truncation=4.0)
    return sample_oracle(dom, params, HalfSpace(3))


@pytest.fixture
def two_ball_domain():
    balls = (Ball((0.0, 0.0, -1.0), 0.3), Ball((0.0, 0.0, 1.0), 0.3))
    return DomainSpec(Background('flat', 3), balls, truncation=3.0)


@pytest.fixture
def radial_schedule():
    base = DomainSpec(Background('flat', 4), (Ball(ORIGIN4, 1.0),), truncation=4.0)
    return build_schedule(base, [GeometricLaw(1.0, 0.5)], 3)


@pytest.fixture(scope='module')
def radial_run():
    base = DomainSpec(Background('flat', 4), (Ball(ORIGIN4, 1.0),), truncation=4.0)
    schedule = build_schedule(base, [GeometricLaw(1.0, 0.5)], 3)
    regions = {'near': Region(ORIGIN4, 2.0),
               'far': Region(ORIGIN4, 1.5, complement=True)}
    return run_exhaustion(schedule, SolverParams(radial_grid=256),
                          annulus=Annulus(ORIGIN4, 1.0, 2.0), regions=regions, threads=2)


@pytest.fixture
def scenario_file(tmpdir):
    path = tmpdir.join('scenario.toml')
    path.write(SCENARIO_TEXT)
    return str(path)


def exterior_u(x, radius):
    """Closed-form ``u`` of the exterior ball in dimension 4."""
    x = np.asarray(x, dtype=float)
    return 2.0 * radius / (np.sum(x * x, axis=-1) - radius ** 2)
