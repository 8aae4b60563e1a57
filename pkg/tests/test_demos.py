"""Smoke checks: every demo script runs to completion and tells its story."""

import pathlib
import subprocess
import sys

import pytest

DEMO_DIR = pathlib.Path(__file__).resolve().parent.parent / "demos"

CASES = [
    ("projection_error.py", "LP metric vs exact metric"),
    ("worst_case_anatomy.py", "robustness for free"),
    ("shared_set_inconsistency.py", "all published values reproduced"),
    ("consumption_sweeps.py", "questionnaire sweep"),
]


@pytest.mark.parametrize("script,marker", CASES, ids=[c[0] for c in CASES])
def test_demo_runs_and_prints_its_conclusion(script, marker):
    proc = subprocess.run(
        [sys.executable, str(DEMO_DIR / script)],
        capture_output=True,
        text=True,
        timeout=180,
    )
    assert proc.returncode == 0, proc.stderr
    assert marker in proc.stdout
