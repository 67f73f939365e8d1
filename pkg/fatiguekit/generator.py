"""Synthetic recordings with known phase boundaries, for testing the
segmentation and for quick experiments without a capture system.
"""

import logging
import math
import os
import random
from typing import NamedTuple

import numpy as np

from fatiguekit.basics import ParameterError, require_positive
from fatiguekit.fileio import MASS_COLUMN, write_load_csv, write_phases
from fatiguekit.motion import DWELL, MOVE, MotionSeries, PhaseSpan
from fatiguekit.profiles import LINEAR, SampledProfile

logger = logging.getLogger(__name__)

DEFAULT_RATE = 1500.0
"""frames/min (25 Hz)"""

HOLD_POSE = {"lumbar": 0.0, "shoulder": math.pi / 2, "elbow": math.pi / 2,
             "wrist": math.pi / 2}
"""Arm stretched out horizontally, trunk upright."""

LOW_POSE = {"lumbar": 0.6, "shoulder": 0.3, "elbow": 0.9, "wrist": 0.9}
HIGH_POSE = {"lumbar": 0.1, "shoulder": 1.2, "elbow": 1.6, "wrist": 1.6}

MOTION_FILE = "motion.csv"
MASS_FILE = "mass.csv"
PHASES_FILE = "phases.json"


class Scenario(NamedTuple):
    """A synthetic task: the recording, the handled mass and the phases it
    was built from.
    """
    motion: MotionSeries
    mass_timeline: SampledProfile
    phases: list


def _frame_times(duration, rate):
    """round(duration * rate) frames at the given rate, from t = 0."""
    frames = int(round(duration * rate))
    if frames < 2:
        raise ParameterError("%g min at %g frames/min gives fewer than two "
                             "frames" % (duration, rate))
    return np.arange(frames) / rate


def _noisy(angles, noise, seed):
    if not noise:
        return angles
    if noise < 0:
        raise ParameterError("noise must be >= 0, got %r" % noise)
    generator = random.Random(seed)
    return angles + np.array([[generator.gauss(0.0, noise)
                               for _ in range(angles.shape[1])]
                              for _ in range(angles.shape[0])])


def _constant_mass(times, mass):
    if not (math.isfinite(mass) and mass >= 0):
        raise ParameterError("mass must be >= 0, got %r" % mass)
    return SampledProfile.from_arrays([times[0], times[-1]], [mass, mass],
                                      LINEAR)


def hold_scenario(duration, rate=DEFAULT_RATE, pose=None, mass=0.0, noise=0.0,
                  seed=None):
    """A static hold: one posture kept for the whole recording.

    :param duration: minutes
    :param rate: frames per minute
    :param pose: dict of joint angles, HOLD_POSE by default
    :param mass: handled mass in kg
    :param noise: standard deviation of angle noise in radians
    """
    require_positive("duration", duration)
    require_positive("rate", rate)
    pose = dict(HOLD_POSE if pose is None else pose)
    times = _frame_times(duration, rate)
    joints = sorted(pose)
    angles = np.tile([pose[joint] for joint in joints], (len(times), 1))
    phases = [PhaseSpan("%s-1" % DWELL, 0.0, float(times[-1]))]
    motion = MotionSeries(times, joints, _noisy(angles, noise, seed), phases)
    logger.info("generated hold scenario: %s", motion)
    return Scenario(motion, _constant_mass(times, mass), phases)


def lift_cycle_scenario(cycles, dwell, move, rate=DEFAULT_RATE,
                        low_pose=None, high_pose=None, mass=0.0,
                        final_dwell=0.0, noise=0.0, seed=None):
    """Repeated lifting: every cycle dwells in one pose and then moves at
    constant joint speed to the other, alternating between the low and the
    high pose. An optional last dwell closes the recording.

    With cycles=3 the phases are dwell-1, move-1, dwell-2, move-2, dwell-3,
    move-3; with cycles=1 and a final dwell the task is hold, move, hold.

    :param dwell: minutes per dwell
    :param move: minutes per move
    """
    if int(cycles) != cycles or cycles < 1:
        raise ParameterError("cycles must be a positive integer, got %r"
                             % cycles)
    require_positive("dwell", dwell)
    require_positive("move", move)
    require_positive("rate", rate)
    if final_dwell < 0:
        raise ParameterError("final_dwell must be >= 0, got %r" % final_dwell)
    low = dict(LOW_POSE if low_pose is None else low_pose)
    high = dict(HIGH_POSE if high_pose is None else high_pose)
    if set(low) != set(high):
        raise ParameterError("low and high poses name different joints")
    joints = sorted(low)
    poses = [low, high]
    knots = [0.0]
    knot_angles = [[low[joint] for joint in joints]]
    spans = []
    t = 0.0
    for cycle in range(int(cycles)):
        target = poses[(cycle + 1) % 2]
        spans.append(("%s-%d" % (DWELL, cycle + 1), t, t + dwell))
        spans.append(("%s-%d" % (MOVE, cycle + 1), t + dwell,
                      t + dwell + move))
        knots += [t + dwell, t + dwell + move]
        knot_angles += [knot_angles[-1], [target[joint] for joint in joints]]
        t += dwell + move
    if final_dwell > 0:
        spans.append(("%s-%d" % (DWELL, int(cycles) + 1), t, t + final_dwell))
        knots.append(t + final_dwell)
        knot_angles.append(knot_angles[-1])
        t += final_dwell
    times = _frame_times(t, rate)
    knot_angles = np.array(knot_angles)
    angles = np.column_stack([np.interp(times, knots, knot_angles[:, column])
                              for column in range(len(joints))])
    end = float(times[-1])
    phases = [PhaseSpan(label, start, min(stop, end))
              for label, start, stop in spans if start < end]
    motion = MotionSeries(times, joints, _noisy(angles, noise, seed), phases)
    logger.info("generated lift-cycle scenario: %s", motion)
    return Scenario(motion, _constant_mass(times, mass), phases)


SCENARIOS = ("hold", "lift-cycle")
"""Scenario names understood by `fatiguekit synth`."""


def write_scenario(scenario, directory):
    """Writes motion.csv, mass.csv and the ground-truth phases.json."""
    os.makedirs(directory, exist_ok=True)
    scenario.motion.write_to_file(os.path.join(directory, MOTION_FILE), "csv")
    write_load_csv(scenario.mass_timeline, os.path.join(directory, MASS_FILE),
                   MASS_COLUMN)
    write_phases(scenario.phases, os.path.join(directory, PHASES_FILE))
    logger.info("wrote scenario to %s", directory)
