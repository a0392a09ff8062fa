"""Shared fixtures: training data produced by the synthesis pipeline's CLI.

The trainer only knows the pipeline's file formats, so the fixture shells
out to the installed `gazesynth` package the same way a user would.
"""

import subprocess
import sys

import pytest


def _run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "gazesynth.cli", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"gazesynth {args[0]} failed:\n{proc.stdout}\n{proc.stderr}")
    return proc


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """20 synthesized samples (2 sources x 10 poses) with masks and labels."""
    root = tmp_path_factory.mktemp("gazedata")
    _run_cli("gen-synthetic", "--out", str(root / "src"), "--sources", "2", "--seed", "5")
    _run_cli(
        "synthesize",
        "--manifest", str(root / "src" / "manifest.jsonl"),
        "--out", str(root / "data"),
        "--poses", "10",
        "--sigma", "10",
        "--rejection-norm", "18",
        "--scene-dir", str(root / "src" / "scenes"),
        "--seed", "7",
    )
    return root / "data"
