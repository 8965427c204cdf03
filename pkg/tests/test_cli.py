import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ehfbl import bounds as B
from ehfbl.capacity import capacity_cost
from ehfbl.cli import SweepSpec, main, sweep_rows
from ehfbl.core import (AwgnEhConfig, EnergyProcess, SpecError, bsc, dumps, identity_channel,
                        make_energy_process)
from ehfbl.sim import SimConfig, run_experiment


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def bsc_file(tmp_path):
    path = tmp_path / "bsc.txt"
    path.write_text(bsc(0.1).to_text())
    return path


# --- bounds awgn -------------------------------------------------------------

def test_bounds_awgn_values(capsys):
    code, out, _ = run(capsys, "bounds", "awgn", "--n", 10000, "--eps", 0.1,
                       "--power", 1, "--second-moment", 1)
    assert code == 0
    d = json.loads(out)
    assert d["m"] == 7502
    assert round(d["log_m_lower"], 2) == 3130.70
    assert d["validity"]["overall"] is True


def test_bounds_awgn_matches_direct_calls(capsys):
    _, out, _ = run(capsys, "bounds", "awgn", "--n", 5000, "--eps", 0.05,
                    "--power-db", 3, "--variance", 100)
    d = json.loads(out)
    P = B.db_to_linear(3)
    report = B.awgn_report(5000, 0.05, P, EnergyProcess.from_moments(P, 100 + P**2))
    assert d["log_m_lower"] == report.log_m_lower
    assert d["rate_per_use"] == report.rate_per_use
    assert d["components"] == report.components
    assert d["a"] == report.a and d["m"] == report.m
    assert d["extra"]["lemma1_bound"] == report.extra["lemma1_bound"]


def test_bounds_awgn_explicit_a(capsys):
    code, out, _ = run(capsys, "bounds", "awgn", "--n", 10000, "--eps", 0.1, "--power", 1,
                       "--a", 12 * math.sqrt(2))
    assert code == 0 and json.loads(out)["m"] == 7502


def test_bounds_awgn_infeasible_exits_zero(capsys):
    code, out, _ = run(capsys, "bounds", "awgn", "--n", 5, "--eps", 0.001, "--power", 1,
                       "--second-moment", 1)
    d = json.loads(out)
    assert code == 0 and d["feasible"] is False and d["rate_per_use"] == 0


def test_missing_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "awgn", "--n", "100", "--power", "1", "--second-moment", "1"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("eps", ["1.5", "0", "nan-ish"])
def test_bad_eps_rejected(capsys, eps):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "awgn", "--n", "100", "--eps", eps, "--power", "1", "--second-moment", "1"])
    assert exc.value.code == 1


def test_second_moment_below_power_squared(capsys):
    code, _, err = run(capsys, "bounds", "awgn", "--n", 100, "--eps", 0.1, "--power", 2,
                       "--second-moment", 1)
    assert code == 1 and "P^2" in err


# --- bounds dmc --------------------------------------------------------------

def test_bounds_dmc_bsc(capsys, bsc_file):
    code, out, _ = run(capsys, "bounds", "dmc", "--channel", bsc_file, "--n", 10000,
                       "--eps", 0.1, "--power", 0.2, "--second-moment", 0.04)
    assert code == 0
    d = json.loads(out)
    assert abs(d["extra"]["capacity"] - 0.2479739434) < 1e-6
    cc = capacity_cost(bsc(0.1), 0.2)
    direct = B.dmc_report(10000, 0.1, bsc(0.1), EnergyProcess.from_moments(0.2, 0.04),
                          cc.capacity, cc.dispersion, 0.2)
    assert d["log_m_lower"] == direct.log_m_lower


def test_bounds_dmc_identity_dispersion(capsys, tmp_path):
    path = tmp_path / "id.json"
    path.write_text(dumps(identity_channel(2, [0.0, 1.0])))
    _, out, _ = run(capsys, "bounds", "dmc", "--channel", path, "--n", 1000, "--eps", 0.1,
                    "--power", 0.5, "--second-moment", 0.25)
    d = json.loads(out)
    assert d["extra"]["capacity"] == pytest.approx(math.log(2), abs=1e-9)
    assert d["extra"]["dispersion"] == 0.0
    assert d["components"]["chebyshev"] == 0.0


def test_bounds_dmc_malformed_row(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0.9 0.1\n0.1 0.8\n0 1\n")
    code, _, err = run(capsys, "bounds", "dmc", "--channel", path, "--n", 100, "--eps", 0.1,
                       "--power", 0.2, "--second-moment", 0.04)
    assert code == 2 and "row 1" in err


def test_bounds_dmc_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "bounds", "dmc", "--channel", tmp_path / "nope.txt", "--n", 100,
                     "--eps", 0.1, "--power", 0.2, "--second-moment", 0.04)
    assert code == 2


def test_bounds_dmc_power_out_of_range(capsys, bsc_file):
    code, _, _ = run(capsys, "bounds", "dmc", "--channel", bsc_file, "--n", 100, "--eps", 0.1,
                     "--power", 1.5, "--second-moment", 4)
    assert code == 2


# --- sweep -------------------------------------------------------------------

def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_sweep_single_point(capsys, tmp_path):
    spec = write_json(tmp_path / "s.json", {"n": [1000], "power": 1, "eps": 0.1, "second_moment": 1})
    code, out, _ = run(capsys, "sweep", spec, "--output", "-")
    rows = rows_of(out)
    assert code == 0 and len(rows) == 1
    assert int(rows[0]["m"]) == B.saving_phase_length(12 * math.sqrt(2), 1.0, 1000)


def test_sweep_file_output_matches_rows(capsys, tmp_path):
    out_path = tmp_path / "curve.csv"
    d = {"n_range": {"start": 1000, "stop": 10**5, "num": 5}, "power_db": 3,
         "eps": [0.1, 0.01], "variance": [1, 100], "output": str(out_path)}
    code, _, _ = run(capsys, "sweep", write_json(tmp_path / "s.json", d))
    assert code == 0
    rows = rows_of(out_path.read_text())
    direct = sweep_rows(SweepSpec.from_dict(d))
    assert len(rows) == len(direct) == 20
    for got, want in zip(rows, direct):
        assert int(got["n"]) == want["n"]
        assert float(got["eh_rate"]) == pytest.approx(want["eh_rate"], rel=1e-11, abs=1e-300)
        assert got["infeasible"] == str(int(want["infeasible"]))


def test_sweep_infeasible_rows_flagged(capsys, tmp_path):
    spec = write_json(tmp_path / "s.json", {"n": [1000, 2000], "power_db": 3, "eps": 0.001,
                                            "variance": 10**4})
    _, out, _ = run(capsys, "sweep", spec, "--output", "-")
    for row in rows_of(out):
        assert row["infeasible"] == "1" and float(row["eh_rate"]) == 0


def test_sweep_curve_selection(capsys, tmp_path):
    spec = write_json(tmp_path / "s.json", {"n": [100], "power": 1, "eps": 0.1,
                                            "second_moment": 1, "curves": "no_eh_rate"})
    _, out, _ = run(capsys, "sweep", spec, "--output", "-")
    assert "eh_rate" not in out.splitlines()[0].split(",")
    assert "no_eh_rate" in out.splitlines()[0]


@pytest.mark.parametrize("grid", [[1000, 1000], [2, 10], []])
def test_sweep_bad_grid(capsys, tmp_path, grid):
    spec = write_json(tmp_path / "s.json", {"n": grid, "power": 1, "eps": 0.1, "second_moment": 1})
    assert run(capsys, "sweep", spec)[0] == 2


def test_sweep_bad_json(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{not json")
    assert run(capsys, "sweep", path)[0] == 2


def test_sweep_unwritable_output(capsys, tmp_path):
    spec = write_json(tmp_path / "s.json", {"n": [100], "power": 1, "eps": 0.1, "second_moment": 1})
    assert run(capsys, "sweep", spec, "--output", tmp_path / "missing" / "x.csv")[0] == 2


def test_sweep_spec_validation():
    with pytest.raises(SpecError):
        SweepSpec([10, 5], 1.0, [0.1], [1.0])
    with pytest.raises(SpecError):
        SweepSpec([10], 1.0, [0.1], [1.0], curves=("rate",))


# --- capacity-cost -----------------------------------------------------------

def test_capacity_cost_bsc_monotone(capsys, bsc_file):
    code, out, _ = run(capsys, "capacity-cost", "--channel", bsc_file, "--grid", 0.1, 0.5, 5)
    rows = rows_of(out)
    assert code == 0 and [float(r["P"]) for r in rows] == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    caps = [float(r["capacity"]) for r in rows]
    assert np.all(np.diff(caps) >= 0)
    assert caps[1] == pytest.approx(0.2479739434, abs=1e-9)


def test_capacity_cost_infeasible_row(capsys, bsc_file):
    _, out, _ = run(capsys, "capacity-cost", "--channel", bsc_file, "--costs", -0.1, 0.3, 1.2)
    flags = [r["infeasible"] for r in rows_of(out)]
    assert flags == ["1", "0", "1"]


def test_capacity_cost_identity(capsys, tmp_path):
    path = tmp_path / "id.txt"
    path.write_text(identity_channel(2, [0.0, 1.0]).to_text())
    _, out, _ = run(capsys, "capacity-cost", "--channel", path, "--costs", 0.5)
    assert float(rows_of(out)[0]["capacity"]) == pytest.approx(math.log(2), abs=1e-11)


# --- simulate ----------------------------------------------------------------

def sim_config(tmp_path, **kw):
    sc = AwgnEhConfig.create(50, 0.5, make_energy_process("exponential", 1.0))
    cfg = SimConfig(sc, kw.pop("trials", 200), seed=0, **kw)
    return write_json(tmp_path / "cfg.json", cfg.to_dict())


def test_simulate_outage(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", sim_config(tmp_path), "--seed", 3)
    d = json.loads(out)
    assert code == 0 and d["mode"] == "outage_only"
    assert d["outage_rate"] - d["outage_hw"] <= d["lemma1_bound_value"]


def test_simulate_is_byte_identical(capsys, tmp_path):
    cfg = sim_config(tmp_path, mode="surrogate_error")
    first = run(capsys, "simulate", cfg, "--seed", 8)[1]
    second = run(capsys, "simulate", cfg, "--seed", 8)[1]
    assert first == second
    assert first != run(capsys, "simulate", cfg, "--seed", 9)[1]


def test_simulate_seed_flag_wins(capsys, tmp_path):
    path = sim_config(tmp_path)
    out = run(capsys, "simulate", path, "--seed", 4)[1]
    raw = json.loads(path.read_text())
    raw["seed"] = 4
    assert out.strip() == run_experiment(SimConfig.from_dict(raw)).to_json()


def test_simulate_csv_append(capsys, tmp_path):
    path = sim_config(tmp_path)
    out_csv = tmp_path / "runs.csv"
    run(capsys, "simulate", path, "--seed", 1, "--csv", out_csv)
    run(capsys, "simulate", path, "--seed", 2, "--csv", out_csv)
    assert len(out_csv.read_text().splitlines()) == 3


def test_simulate_budget_exit(capsys, tmp_path):
    path = sim_config(tmp_path, mode="exact_decode", M=16)
    raw = json.loads(path.read_text())
    raw["M"] = 4096
    write_json(path, raw)
    code, out, err = run(capsys, "simulate", path, "--seed", 0)
    assert code == 3 and out == "" and "budget" in err


def test_simulate_invalid_mode(capsys, tmp_path):
    assert run(capsys, "simulate", sim_config(tmp_path, mode="outage_only"), "--seed", 0)[0] == 0
    path = tmp_path / "cfg.json"
    raw = json.loads(path.read_text())
    raw["mode"] = "psychic"
    write_json(path, raw)
    assert run(capsys, "simulate", path, "--seed", 0)[0] == 2


def test_simulate_dmc_channel_file(capsys, tmp_path, bsc_file):
    cfg = {"scenario": {"type": "dmc", "channel_file": bsc_file.name, "n": 30, "eps": 0.5,
                        "energy": make_energy_process("constant", 0.2).to_dict()},
           "trials": 50, "mode": "outage_only"}
    code, out, _ = run(capsys, "simulate", write_json(tmp_path / "d.json", cfg), "--seed", 0)
    assert code == 0 and json.loads(out)["trials"] == 50


def test_simulate_requires_seed(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", str(sim_config(tmp_path))])
    assert exc.value.code == 1


def test_help_documents_csv_schema():
    out = subprocess.run([sys.executable, "-m", "ehfbl", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "eps,second_moment,n,m" in out.stdout and "P,capacity,dispersion" in out.stdout
