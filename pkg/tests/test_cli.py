"""CLI tests: parsing, exit codes, output files, dump-config round trip."""

import json

import pytest

from liquidsim.cli import dump_config, load_scenario, main
from liquidsim.sim_engine import CSV_HEADER

LIQUID_PERIODIC = """\
[system]
N = 10
clen = 160
beta = 0.2

[repairer]
kind = liquid
variant = periodic

[run]
failures = 20
trials = 2
seed = 5

[output]
csv = out.csv
"""

ADVANCED_POISSON = """\
[system]
N = 20
clen = 90          # r*N + r(r+1)/2 fragment units
beta = 0.25
lambda = 0.05

[repairer]
kind = advancedLiquid
variant = poisson
eps = 0.3
r = 4

[codec]
backend = symbolic

[run]
failures = 60
trials = 2
seed = 9
peak_window = 2.0
"""


def scenario_file(tmp_path, text, name="scenario.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadScenario:

    def test_liquid_periodic_parses(self, tmp_path):
        sc, out = load_scenario(scenario_file(tmp_path, LIQUID_PERIODIC))
        assert sc.sysParams.N == 10
        assert sc.sysParams.xlen == 8 * 160
        assert sc.repairer == "liquid"
        assert sc.failureCount == 20
        assert sc.trials == 2
        assert out.csv == "out.csv"

    def test_advanced_poisson_parses(self, tmp_path):
        sc, out = load_scenario(scenario_file(tmp_path, ADVANCED_POISSON))
        assert sc.repairer == "advancedLiquid"
        assert sc.variant == "poisson"
        assert sc.advancedR == 4
        assert sc.eps.eps == 0.3
        assert sc.peakWindow == 2.0
        assert sc.sysParams.lam == 0.05

    def test_both_xlen_and_beta_rejected(self, tmp_path):
        text = LIQUID_PERIODIC.replace("beta = 0.2", "beta = 0.2\nxlen = 1280")
        with pytest.raises(Exception) as err:
            load_scenario(scenario_file(tmp_path, text))
        msg = str(err.value)
        assert "xlen" in msg and "beta" in msg
        assert "line 4" in msg or "line 5" in msg

    def test_neither_xlen_nor_beta_rejected(self, tmp_path):
        text = LIQUID_PERIODIC.replace("beta = 0.2\n", "")
        with pytest.raises(Exception):
            load_scenario(scenario_file(tmp_path, text))

    def test_unknown_key_names_line(self, tmp_path):
        text = LIQUID_PERIODIC.replace("[run]", "[run]\nwarmup = 3")
        f = scenario_file(tmp_path, text)
        with pytest.raises(Exception) as err:
            load_scenario(f)
        assert "warmup" in str(err.value)
        lineno = text.splitlines().index("warmup = 3") + 1
        assert f":{lineno}:" in str(err.value)

    def test_unknown_section_rejected(self, tmp_path):
        text = LIQUID_PERIODIC + "\n[plotting]\nstyle = dark\n"
        with pytest.raises(Exception) as err:
            load_scenario(scenario_file(tmp_path, text))
        assert "plotting" in str(err.value)

    def test_dump_config_round_trip(self, tmp_path):
        first = load_scenario(scenario_file(tmp_path, ADVANCED_POISSON))
        echoed = scenario_file(tmp_path, dump_config(*first), "echo.ini")
        assert load_scenario(echoed) == first


class TestCmdRun:

    def test_valid_scenario_exit_zero(self, tmp_path, capsys):
        f = scenario_file(tmp_path, LIQUID_PERIODIC)
        assert main(["run", "--scenario", str(f), "--out",
                     str(tmp_path / "o")]) == 0
        lines = (tmp_path / "o" / "out.csv").read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        assert (tmp_path / "o" / "summary.jsonl").exists()
        assert "trials=2" in capsys.readouterr().out

    def test_config_error_exit_two(self, tmp_path, capsys):
        text = LIQUID_PERIODIC.replace("beta = 0.2", "beta = 0.2\nxlen = 1280")
        f = scenario_file(tmp_path, text)
        assert main(["run", "--scenario", str(f)]) == 2
        err = capsys.readouterr().err
        assert "xlen" in err and "beta" in err

    def test_missing_file_exit_two(self, tmp_path, capsys):
        assert main(["run", "--scenario", str(tmp_path / "nope.ini")]) == 2

    def test_fault_injection_exit_three(self, tmp_path, capsys):
        text = LIQUID_PERIODIC.replace("[run]", "[run]\nfault_injection = on")
        f = scenario_file(tmp_path, text)
        assert main(["run", "--scenario", str(f), "--out",
                     str(tmp_path / "o")]) == 3
        assert "invariant violation" in capsys.readouterr().err

    def test_seed_and_trials_overrides(self, tmp_path, capsys):
        f = scenario_file(tmp_path, LIQUID_PERIODIC)
        assert main(["run", "--scenario", str(f), "--seed", "99", "--trials",
                     "3", "--dump-config"]) == 0
        text = capsys.readouterr().out
        assert "seed = 99" in text
        assert "trials = 3" in text

    def test_same_seed_bit_identical_csv(self, tmp_path):
        f = scenario_file(tmp_path, ADVANCED_POISSON)
        for d in ("a", "b"):
            assert main(["run", "--scenario", str(f), "--out",
                         str(tmp_path / d)]) == 0
        assert ((tmp_path / "a" / "results.csv").read_bytes()
                == (tmp_path / "b" / "results.csv").read_bytes())

    def test_jobs_do_not_change_output(self, tmp_path):
        f = scenario_file(tmp_path, ADVANCED_POISSON)
        for d, jobs in (("j1", "1"), ("j2", "2")):
            assert main(["run", "--scenario", str(f), "--out",
                         str(tmp_path / d), "--jobs", jobs]) == 0
        assert ((tmp_path / "j1" / "results.csv").read_bytes()
                == (tmp_path / "j2" / "results.csv").read_bytes())
        assert ((tmp_path / "j1" / "summary.jsonl").read_bytes()
                == (tmp_path / "j2" / "summary.jsonl").read_bytes())

    def test_trace_file_written(self, tmp_path):
        text = LIQUID_PERIODIC.replace("csv = out.csv",
                                       "csv = out.csv\ntrace = yes")
        f = scenario_file(tmp_path, text)
        assert main(["run", "--scenario", str(f), "--out",
                     str(tmp_path / "o")]) == 0
        lines = (tmp_path / "o" / "trace.csv").read_text().splitlines()
        assert lines[0] == "trial,time,event,counter,bits_read,bits_written"
        assert len(lines) > 2


class TestCmdBounds:

    def test_report_prints_table_and_json(self, capsys):
        assert main(["bounds", "--N", "100000", "--clen", str(10 ** 16),
                     "--beta", "0.1", "--vlen", str(10 ** 13)]) == 0
        out = capsys.readouterr().out
        assert "deltaCore" in out
        table = json.loads(out.splitlines()[-1])
        assert table["F"] == 10000
        assert table["deltaCore"] == pytest.approx(3.0697e-7, rel=1e-3)
        assert table["deltaCore"] <= 3e-7 * 1.03

    def test_unsupported_regime_exit_two(self, capsys):
        assert main(["bounds", "--N", "10", "--clen", "1000",
                     "--beta", "0.5"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_beta_required_without_sweep(self, capsys):
        assert main(["bounds"]) == 2

    def test_sweep_ratio_approaches_half_inverse(self, capsys):
        assert main(["bounds", "--sweep-beta", "0.05,0.02,0.01"]) == 0
        out = capsys.readouterr().out
        rows = json.loads(out.splitlines()[-1])["sweep"]
        assert len(rows) == 3
        closeness = [row["readRatio"] / row["limit"] for row in rows]
        assert all(c < 1 for c in closeness)
        assert closeness == sorted(closeness)
        assert closeness[-1] > 0.97

    def test_sweep_rejects_out_of_range(self, capsys):
        assert main(["bounds", "--sweep-beta", "0.7"]) == 2
