"""Acceptance: every figure preset renders from real run directories produced
through the simulator's public CLI, and the plotted moving average matches a
hand computation exactly."""
import json
import subprocess
import sys

import numpy as np
import pytest

from plotkit import moving_average
from plotkit.cli import main as cli_main


def run_sim(config: dict, path) -> None:
    path.write_text(json.dumps(config))
    subprocess.run([sys.executable, "-m", "mecsim.cli", "run",
                    "--config", str(path)], check=True, capture_output=True)


@pytest.fixture(scope="module")
def run_dirs(tmp_path_factory):
    """Three tiny but real runs: a GA trace, a parameter sweep, a training
    trace. Together they carry every CSV the presets consume."""
    root = tmp_path_factory.mktemp("runs")
    small = {"N": 6, "F": 4, "I": 2, "K": 2}
    ga = {"pop_size": 8, "generations": 4}
    run_sim({"name": "t4", "kind": "ga_trace", "reps": 2, "seed": 0,
             "overrides": small, "ga": ga, "out_dir": str(root / "trace")},
            root / "c4.json")
    run_sim({"name": "tsw", "kind": "sweep", "sweep_field": "M",
             "grid": [2, 3], "schemes": ["RANDOM_CACHE", "POPULAR_CACHE"],
             "episodes": 2, "reps": 2, "seed": 0, "overrides": small,
             "ga": ga, "out_dir": str(root / "sweep")}, root / "csw.json")
    run_sim({"name": "ttr", "kind": "train_trace", "episodes": 3, "reps": 2,
             "seed": 0, "schemes": ["RANDOM_CACHE"], "overrides": small,
             "ga": ga, "out_dir": str(root / "train")}, root / "ctr.json")
    return root


def test_all_presets_render(run_dirs, tmp_path):
    src = {"fig4": "trace", "fig5": "sweep", "fig6": "sweep", "fig7": "sweep",
           "fig8": "sweep", "fig9": "sweep", "fig_train": "train"}
    failures = []
    for name, sub in src.items():
        code = cli_main(["--preset", name, "--in", str(run_dirs / sub),
                         "--out", str(tmp_path)])
        img = tmp_path / f"{name}.png"
        if code != 0 or not img.exists():
            failures.append(name)
    ok = not failures
    print(f"\n{'PASS' if ok else 'FAIL'}: plotkit preset rendering "
          f"({len(src) - len(failures)}/{len(src)} presets"
          + (f", failed: {', '.join(failures)}" if failures else "") + ")")
    assert ok


def test_moving_average_hand_computation():
    trace = [2.0, 4.0, 9.0, 1.0, 4.0]
    got = moving_average(trace, 10)
    # trailing partial means: 2/1, 6/2, 15/3, 16/4, 20/5
    expected = [2.0, 3.0, 5.0, 4.0, 4.0]
    ok = np.array_equal(got, expected)
    print(f"\n{'PASS' if ok else 'FAIL'}: moving-average hand computation "
          f"(window 10 on 5 points, got {got.tolist()})")
    assert ok
