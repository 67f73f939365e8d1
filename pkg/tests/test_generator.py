"""Test cases for the synthetic task generator."""

import os

import numpy as np
import pytest

from fatiguekit.basics import ParameterError
from fatiguekit.fileio import read_mass_timeline, read_motion, read_phases
from fatiguekit.generator import (HIGH_POSE, HOLD_POSE, LOW_POSE, MASS_FILE,
                                  MOTION_FILE, PHASES_FILE, hold_scenario,
                                  lift_cycle_scenario, write_scenario)
from fatiguekit.motion import PhaseSpan


def test_hold_scenario():
    """A hold keeps its pose for every frame."""
    scenario = hold_scenario(1.0, mass=10.0)
    motion = scenario.motion
    assert len(motion) == 1500
    assert motion.joints == tuple(sorted(HOLD_POSE))
    np.testing.assert_array_equal(motion.angle("shoulder"),
                                  HOLD_POSE["shoulder"])
    assert scenario.phases == [PhaseSpan("dwell-1", 0.0, motion.end)]
    assert scenario.mass_timeline.evaluate(0.5) == 10.0


def test_lift_cycle_scenario():
    """Cycles alternate between the low and the high pose."""
    scenario = lift_cycle_scenario(cycles=2, dwell=2.0 / 60.0,
                                   move=1.0 / 60.0)
    motion = scenario.motion
    assert len(motion) == 150
    assert motion.posture(0) == LOW_POSE
    move = scenario.phases[1]
    assert move.label == "move-1"
    after_move = int(round(move.end * 1500.0))
    assert motion.posture(after_move)["shoulder"] == \
        pytest.approx(HIGH_POSE["shoulder"])
    assert [phase.label for phase in scenario.phases] == \
        ["dwell-1", "move-1", "dwell-2", "move-2"]
    assert scenario.phases[-1].end == motion.end


def test_final_dwell():
    """A final dwell closes the task with hold, move, hold."""
    scenario = lift_cycle_scenario(cycles=1, dwell=0.02, move=0.01,
                                   final_dwell=0.02)
    assert [phase.label for phase in scenario.phases] == \
        ["dwell-1", "move-1", "dwell-2"]


def test_noise_is_seeded():
    """The same seed gives the same noise."""
    first = hold_scenario(0.1, noise=0.01, seed=3).motion
    second = hold_scenario(0.1, noise=0.01, seed=3).motion
    other = hold_scenario(0.1, noise=0.01, seed=4).motion
    assert first == second
    assert first != other


def test_bad_parameters():
    """Scenarios need at least two frames and sensible sizes."""
    with pytest.raises(ParameterError):
        hold_scenario(0.0001)
    with pytest.raises(ParameterError):
        lift_cycle_scenario(cycles=0, dwell=0.1, move=0.1)
    with pytest.raises(ParameterError):
        lift_cycle_scenario(cycles=1, dwell=0.1, move=0.1,
                            high_pose={"shoulder": 1.0})
    with pytest.raises(ParameterError):
        hold_scenario(0.1, noise=-1.0)


def test_write_scenario(tmp_path):
    """The written files read back as the generated task."""
    scenario = lift_cycle_scenario(cycles=1, dwell=0.02, move=0.01, mass=5.0)
    directory = str(tmp_path / "task")
    write_scenario(scenario, directory)
    motion = read_motion(os.path.join(directory, MOTION_FILE))
    assert len(motion) == len(scenario.motion)
    np.testing.assert_allclose(motion.angles, scenario.motion.angles,
                               rtol=1e-11)
    mass = read_mass_timeline(os.path.join(directory, MASS_FILE))
    assert mass.evaluate(0.01) == pytest.approx(5.0)
    assert read_phases(os.path.join(directory, PHASES_FILE)) == \
        scenario.phases
