import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

SMALL_CONFIG = """\
[data]
source = synthetic
synth_total = 2500
synth_separation = 4.0

[split]
train_fraction = 0.2

[mlp]
max_epochs = 15

[rbf]
n_centers = 20

[run]
seed = 42
"""


@pytest.fixture
def small_config_path(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return path


# One summary line per acceptance criterion, whatever the outcome.
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance[report.nodeid] = (outcome, props["criterion"], props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for outcome, criterion, detail in _acceptance.values():
        line = f"{outcome}  {criterion}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
