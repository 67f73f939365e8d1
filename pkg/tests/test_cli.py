"""Test cases for the fatiguekit command."""

import json
import os

import pytest

from fatiguekit.basics import ConfigurationError, InvariantViolation
from fatiguekit.cli import RunConfig, UsageError, cmd_synth, main
from fatiguekit.fileio import read_motion, read_phases
from fatiguekit.generator import SCENARIOS
from fatiguekit.report import REPORT_FILE, SUMMARY_FILE

HOLD = os.path.join(os.path.dirname(__file__), "testfiles", "hold_task")
LIFT = os.path.join(os.path.dirname(__file__), "testfiles", "lift_task")


def _hold_args(output):
    return ["analyze", "--worker", os.path.join(HOLD, "worker.json"),
            "--motion", os.path.join(HOLD, "motion.csv"),
            "--mass", os.path.join(HOLD, "mass.csv"),
            "--standards", os.path.join(HOLD, "standards.json"),
            "--output", output]


def test_endurance(capsys):
    """Half MVC lasts 2 ln 2 minutes."""
    assert main(["endurance", "--mvc", "100", "--load", "50"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["endurance_time_min 1.38629436",
                   "u_at_exhaustion_min 1.5"]


def test_endurance_limits(capsys):
    """No load never exhausts; a load at MVC exhausts at once."""
    assert main(["endurance", "--mvc", "100", "--load", "0"]) == 0
    assert capsys.readouterr().out == "no exhaustion\n"
    assert main(["endurance", "--mvc", "100", "--load", "100",
                 "--k", "2"]) == 0
    assert capsys.readouterr().out.splitlines() == \
        ["endurance_time_min 0", "u_at_exhaustion_min 0"]


def test_endurance_bad_values(capsys):
    """Invalid parameters exit with status 1 and a single error line."""
    assert main(["endurance", "--mvc", "0", "--load", "10"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:ParameterError:")
    assert err.count("\n") == 1


def test_analyze_hold(tmp_path, capsys):
    """The hold task writes a report and prints a table."""
    output = str(tmp_path / "report")
    assert main(_hold_args(output)) == 0
    out = capsys.readouterr().out
    assert "arm_flexor" in out
    assert "0.859141" in out
    assert "efficiency 1" in out
    assert os.path.isfile(os.path.join(output, REPORT_FILE))
    assert os.path.isfile(os.path.join(output, SUMMARY_FILE))


def test_analyze_missing_worker(tmp_path, capsys):
    """A missing input file names the file."""
    args = _hold_args(str(tmp_path / "report"))
    missing = str(tmp_path / "nobody.json")
    args[2] = missing
    assert main(args) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:FileNotFoundError:")
    assert missing in err


def test_analyze_missing_settings(capsys):
    """motion, mass and output are required."""
    assert main(["analyze", "--motion", os.path.join(HOLD, "motion.csv")]) \
        == 1
    assert "missing required settings: mass, output" in \
        capsys.readouterr().err


def test_consistency_failure_exit_status(tmp_path, capsys, monkeypatch):
    """Internal consistency failures exit with status 2."""
    def broken(*args, **kwargs):
        raise InvariantViolation("fatigue of arm_flexor is not monotone")

    monkeypatch.setattr("fatiguekit.cli.evaluate_task", broken)
    assert main(_hold_args(str(tmp_path / "report"))) == 2
    assert capsys.readouterr().err.startswith("error:InvariantViolation:")


def test_usage_errors(capsys):
    """Bad command lines exit with status 1."""
    assert main(["analyze", "--bogus"]) == 1
    assert capsys.readouterr().err.startswith("error:UsageError:")
    assert main([]) == 1
    assert main(["synth", "juggle", "--output", "x"]) == 1


def test_config_file(tmp_path, capsys):
    """Paths in a config file are relative to it; flags override it."""
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "worker": os.path.join(HOLD, "worker.json"),
        "motion": os.path.join(HOLD, "motion.csv"),
        "mass": os.path.join(HOLD, "mass.csv"),
        "output": "from_config",
        "endurance_horizon": 60}))
    settings = RunConfig.from_sources(str(config), output=None,
                                      analysis_dt=0.01)
    assert settings.output == str(tmp_path / "from_config")
    assert settings.endurance_horizon == 60
    assert settings.analysis_dt == 0.01
    assert settings.jobs == 1
    assert main(["analyze", "--config", str(config), "--analysis-dt",
                 "0.01"]) == 0
    assert os.path.isfile(str(tmp_path / "from_config" / REPORT_FILE))
    capsys.readouterr()


def test_config_validation():
    """Unknown or non-positive settings are refused."""
    with pytest.raises(ConfigurationError):
        RunConfig(motion="m", mass="a", output="o", colour="blue")
    with pytest.raises(ConfigurationError):
        RunConfig(motion="m", mass="a", output="o", jobs=1.5)
    with pytest.raises(ValueError):
        RunConfig(motion="m", mass="a", output="o", analysis_dt=-1.0)


def test_synth_hold(tmp_path, capsys):
    """A one minute hold at 25 Hz has 1500 frames."""
    output = str(tmp_path / "hold")
    assert main(["synth", "hold", "--output", output]) == 0
    assert capsys.readouterr().out == \
        "wrote 1500 frames and 1 phases to %s\n" % output
    motion = read_motion(os.path.join(output, "motion.csv"))
    assert len(motion) == 1500


def test_synth_lift_cycle(tmp_path, capsys):
    """Three cycles give six phases, which analyze can use as given."""
    output = str(tmp_path / "lift")
    assert main(["synth", "lift-cycle", "--output", output, "--mass",
                 "5"]) == 0
    phases = read_phases(os.path.join(output, "phases.json"))
    assert [phase.label for phase in phases] == \
        ["dwell-1", "move-1", "dwell-2", "move-2", "dwell-3", "move-3"]
    assert main(["analyze", "--motion", os.path.join(output, "motion.csv"),
                 "--mass", os.path.join(output, "mass.csv"),
                 "--phases", os.path.join(output, "phases.json"),
                 "--output", os.path.join(output, "report")]) == 0
    assert "biceps" in capsys.readouterr().out


def test_synth_zero_duration(tmp_path, capsys):
    """A hold without duration cannot be generated."""
    assert main(["synth", "hold", "--output", str(tmp_path / "x"),
                 "--duration-s", "0"]) == 1
    assert capsys.readouterr().err.startswith("error:ParameterError:")


def test_synth_seed(tmp_path, monkeypatch, capsys):
    """Noise is reproducible under a fixed seed."""
    monkeypatch.setenv("FATIGUEKIT_SEED", "7")
    contents = []
    for name in ("a", "b"):
        output = str(tmp_path / name)
        assert main(["synth", "hold", "--output", output, "--duration-s",
                     "2", "--noise", "0.01"]) == 0
        with open(os.path.join(output, "motion.csv"), "rb") as infile:
            contents.append(infile.read())
    assert contents[0] == contents[1]
    monkeypatch.setenv("FATIGUEKIT_SEED", "seven")
    assert main(["synth", "hold", "--output", str(tmp_path / "c")]) == 1
    capsys.readouterr()


def test_synth_every_scenario(tmp_path, capsys):
    """Every listed scenario can be generated; others are usage errors."""
    for scenario in SCENARIOS:
        assert cmd_synth(scenario, str(tmp_path / scenario)) == 0
    capsys.readouterr()
    with pytest.raises(UsageError):
        cmd_synth("juggle", str(tmp_path / "juggle"))


def test_analyze_twice_same_bytes(tmp_path, capsys):
    """Two analyze runs on the same recording write identical files."""
    outputs = [str(tmp_path / name) for name in ("first", "second")]
    for output in outputs:
        assert main(["analyze", "--motion", os.path.join(LIFT, "motion.csv"),
                     "--mass", os.path.join(LIFT, "mass.csv"),
                     "--standards", os.path.join(LIFT, "standards.json"),
                     "--output", output]) == 0
    capsys.readouterr()
    names = sorted(os.listdir(outputs[0]))
    assert names == sorted(os.listdir(outputs[1]))
    assert REPORT_FILE in names and SUMMARY_FILE in names
    for name in names:
        with open(os.path.join(outputs[0], name), "rb") as first, \
                open(os.path.join(outputs[1], name), "rb") as second:
            assert first.read() == second.read(), name
