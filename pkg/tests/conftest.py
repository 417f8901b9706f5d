import time

import numpy as np
import pytest

from dopplerinsar import forward as fw
from dopplerinsar import geometry as geo
from dopplerinsar import imaging as im

TARGET = np.array([-20.0, -31.0, 50.0])
DESK_WB = fw.WidebandConfig(n_freq=256, n_slow=512)
DESK_UNB = fw.UNBConfig(n_fast=256, n_slow=512)

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "tests": 0})
    if report.when == "call":
        entry["tests"] += 1
    if report.failed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["passed"] and e["tests"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {e['title']} ({e['tests']} checks)")


def wb_pair():
    return (geo.Trajectory.linear_pass(-7100.0, 3000.0, 100.0, 1000.0, name="wb1"),
            geo.Trajectory.linear_pass(-7100.0, 4000.0, 100.0, 1000.0, name="wb2"))


def unb_pair():
    return (geo.Trajectory.linear_pass(-7100.0, 2000.0, 100.0, 1000.0, name="unb1"),
            geo.Trajectory.linear_pass(-7100.0, 4000.0, 400.0, 1000.0, name="unb2"))


@pytest.fixture(scope="session")
def target_scene():
    return geo.Scene([geo.Scatterer(TARGET[:2], TARGET[2])])


@pytest.fixture(scope="session")
def paper_wb(target_scene):
    """Desk-scale wideband data and images of the reference geometry."""
    start = time.perf_counter()
    t1, t2 = wb_pair()
    d1 = fw.simulate_wideband(target_scene, t1, DESK_WB)
    d2 = fw.simulate_wideband(target_scene, t2, DESK_WB)
    images = (im.backproject_wideband(d1, t1), im.backproject_wideband(d2, t2))
    return {"traj": (t1, t2), "data": (d1, d2), "images": images,
            "seconds": time.perf_counter() - start}


@pytest.fixture(scope="session")
def paper_unb(target_scene):
    """Desk-scale UNB data and images of the reference geometry."""
    start = time.perf_counter()
    t1, t2 = unb_pair()
    d1 = fw.simulate_unb(target_scene, t1, DESK_UNB)
    d2 = fw.simulate_unb(target_scene, t2, DESK_UNB)
    images = (im.backproject_unb(d1, t1), im.backproject_unb(d2, t2))
    return {"traj": (t1, t2), "data": (d1, d2), "images": images,
            "seconds": time.perf_counter() - start}
