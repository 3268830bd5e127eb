import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from regrasp.config import bundled, load_gripper, load_robot
from regrasp.geometry import load_mesh, shapes
from regrasp.graspplan import GripperModel

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (title, outcome); filled by the acceptance tests
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ACCEPTANCE[number] = (title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, outcome = ACCEPTANCE[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def unit_cube():
    return shapes.box((1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def cube_mesh():
    return load_mesh(bundled("cube.obj"))


@pytest.fixture(scope="session")
def cylinder_mesh():
    return load_mesh(bundled("cylinder.obj"))


@pytest.fixture(scope="session")
def bracket_mesh():
    return load_mesh(bundled("lbracket.obj"))


@pytest.fixture(scope="session")
def gripper():
    return GripperModel()


@pytest.fixture(scope="session")
def wide_gripper():
    return load_gripper(bundled("gripper_wide.yaml"))


@pytest.fixture(scope="session")
def arm6():
    return load_robot(bundled("arm6.yaml"))


@pytest.fixture(scope="session")
def arm7():
    return load_robot(bundled("arm7.yaml"))


@pytest.fixture(scope="session")
def cube_pipeline(cube_mesh, wide_gripper):
    """Grasps, placements and a 2 x 1 grid with 2 yaw angles for the bundled cube."""
    from types import SimpleNamespace

    from regrasp.graspplan import GraspParams, plan_free_grasps
    from regrasp.placement import placement_grips, stable_placements, tabletop_discretize

    grasps = plan_free_grasps(cube_mesh, wide_gripper, GraspParams(), 0)
    placements = stable_placements(cube_mesh)
    pgrips, next_id = {}, 0
    for p in placements:
        pgrips[p.id] = placement_grips(p, grasps, wide_gripper, first_id=next_id)
        next_id += len(pgrips[p.id])
    grid = [np.array([0.4, 0.0]), np.array([0.5, 0.05])]
    angles = [0.0, np.pi / 2]
    instances, grips = tabletop_discretize(placements, pgrips, grasps, grid, angles)
    return SimpleNamespace(
        grasps=grasps,
        placements=placements,
        placement_grips=pgrips,
        grid=grid,
        angles=angles,
        instances=instances,
        grips=grips,
    )


SMALL_CONFIG = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "small.yaml")


@pytest.fixture(scope="session")
def small_store(tmp_path_factory):
    """The small example workspace precomputed once through the command line."""
    from regrasp.cli import main

    path = tmp_path_factory.mktemp("small") / "small.db"
    assert main(["precompute", "-c", SMALL_CONFIG, "--store", str(path), "--quiet-timings"]) == 0
    return path
