import subprocess
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def run_script(name, *args):
    return subprocess.run([sys.executable, str(SCRIPTS / name), *map(str, args)],
                          capture_output=True, text=True, check=True).stdout


def test_rate_sweep(tmp_path):
    out = run_script("rate_sweep.py", "--out-dir", tmp_path, "--points", 5)
    assert (tmp_path / "rate_vs_eps.csv").read_text().count("\n") == 1 + 3 * 5
    assert "0.548516" in out


def test_capacity_cost_demo():
    out = run_script("capacity_cost_demo.py", "--points", 3)
    assert "0.36806421" in out


def test_outage_validation():
    out = run_script("outage_validation.py", "--n", 100, "--trials", 200, "--fractions", 1.0)
    assert len(out.strip().splitlines()) == 2


@pytest.mark.parametrize("name", ["outage_awgn.json", "exact_awgn.json", "surrogate_bsc.json",
                                  "sweep_eps.json", "sweep_variance.json"])
def test_example_configs_parse(name, tmp_path):
    cfg = SCRIPTS / "configs" / name
    if name.startswith("sweep"):
        cmd = ["sweep", str(cfg), "--output", str(tmp_path / "x.csv")]
    else:
        cmd = ["simulate", str(cfg), "--seed", "0"]
    proc = subprocess.run([sys.executable, "-m", "ehfbl", *cmd], capture_output=True, text=True,
                          timeout=120)
    assert proc.returncode == 0, proc.stderr
