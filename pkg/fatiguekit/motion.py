"""Joint-angle recordings of a worker, and their division into work phases.

A MotionSeries holds one planar (sagittal) angle per joint and frame, in
radians from the vertical, against time in minutes. Angular speeds are in
rad/min.
"""

import logging
import math
from typing import NamedTuple

import numpy as np

from fatiguekit.basics import (ConfigurationError, InsufficientDataError,
                               ParameterError, RejectedInputError,
                               SchemaError, require_positive)

logger = logging.getLogger(__name__)

DEFAULT_VELOCITY_THRESHOLD = 30.0
"""rad/min (0.5 rad/s). Task-dependent; frames faster than this are moving."""

DEFAULT_MIN_PHASE_DURATION = 0.25 / 60.0
"""minutes (0.25 s). Shorter runs are merged into the preceding phase."""

DWELL = "dwell"
MOVE = "move"

UNIFORM_TOLERANCE = 1e-6


class PhaseSpan(NamedTuple):
    """A labelled stretch of a recording, [start, end] in minutes."""
    label: str
    start: float
    end: float

    @property
    def duration(self):
        return self.end - self.start

    @property
    def kind(self):
        """The label without its ordinal, "move-2" -> "move"."""
        return self.label.rsplit("-", 1)[0] if "-" in self.label \
            else self.label


class EfficiencyResult(NamedTuple):
    """Standard time over actual time, per phase label and overall."""
    per_phase: dict
    overall: float


def validate_phases(phases):
    """Check that spans are proper, ordered and non-overlapping.

    :returns: the phases as a list of PhaseSpan
    """
    spans = []
    for phase in phases:
        span = PhaseSpan(str(phase[0]), float(phase[1]), float(phase[2]))
        if not span.label:
            raise SchemaError("phase labels must be non-empty")
        if not span.start < span.end:
            raise ParameterError("phase %r must start before it ends"
                                 % span.label)
        if spans and span.start < spans[-1].end - 1e-12:
            raise ParameterError("phase %r overlaps or precedes phase %r"
                                 % (span.label, spans[-1].label))
        spans.append(span)
    return spans


class MotionSeries():
    """A joint-angle time series.

    :param times: strictly increasing frame times in minutes
    :param joints: joint names, one per angle column
    :param angles: array of shape (frames, joints) in radians
    :param phases: optional ordered list of PhaseSpan
    """

    """Functions that write a MotionSeries to a file, by format name."""
    motion_writers = {}

    @staticmethod
    def add_writer(name, function):
        """Registers a writer.

        :param name: The name (identifier) of the file format
        :param function: A function taking a MotionSeries and a filename
        """
        MotionSeries.motion_writers[name] = function

    def __init__(self, times, joints, angles, phases=None):
        times = np.array(times, dtype=float)
        angles = np.array(angles, dtype=float)
        joints = tuple(str(joint) for joint in joints)
        if times.ndim != 1 or len(times) == 0:
            raise InsufficientDataError("a motion series needs at least one "
                                        "frame")
        if angles.ndim == 1 and len(joints) == 1:
            angles = angles.reshape(-1, 1)
        if angles.shape != (len(times), len(joints)):
            raise SchemaError("angles have shape %r, expected (%d, %d)"
                              % (angles.shape, len(times), len(joints)))
        if len(set(joints)) != len(joints) or not all(joints):
            raise SchemaError("joint names must be unique and non-empty")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(angles))):
            raise RejectedInputError("motion contains non-finite values")
        if np.any(np.diff(times) <= 0):
            raise RejectedInputError("frame times must be strictly increasing")
        times.setflags(write=False)
        angles.setflags(write=False)
        self._times = times
        self._joints = joints
        self._angles = angles
        self._phases = validate_phases(phases) if phases is not None else None

    @property
    def times(self):
        """Frame times in minutes, read-only."""
        return self._times

    @property
    def joints(self):
        """Joint names in column order."""
        return self._joints

    @property
    def angles(self):
        """The (frames, joints) angle array, read-only."""
        return self._angles

    @property
    def phases(self):
        """The attached phases, or None."""
        return self._phases

    @property
    def start(self):
        return float(self._times[0])

    @property
    def end(self):
        return float(self._times[-1])

    @property
    def duration(self):
        return self.end - self.start

    @property
    def rate(self):
        """Frames per minute, or None for a single frame."""
        if len(self._times) < 2:
            return None
        return (len(self._times) - 1) / self.duration

    @property
    def step(self):
        """Mean frame interval in minutes."""
        rate = self.rate
        return None if rate is None else 1.0 / rate

    def __len__(self):
        return len(self._times)

    def is_uniform(self, rel_tol=UNIFORM_TOLERANCE):
        """Are the frames evenly spaced?"""
        if len(self._times) < 3:
            return True
        gaps = np.diff(self._times)
        return bool(np.max(np.abs(gaps - self.step)) <= rel_tol * self.step)

    def angle(self, joint):
        """The angle column of one joint."""
        try:
            return self._angles[:, self._joints.index(joint)]
        except ValueError:
            raise SchemaError("motion has no joint %r" % joint) from None

    def posture(self, index):
        """Joint angles of one frame as a dict."""
        return dict(zip(self._joints, self._angles[index].tolist()))

    @property
    def frames(self):
        """The frames as a list of (t, {joint: angle})."""
        return [(float(t), self.posture(i))
                for i, t in enumerate(self._times)]

    def with_phases(self, phases):
        """The same frames with phases attached."""
        return MotionSeries(self._times, self._joints, self._angles, phases)

    def translated(self, offset):
        """The same recording shifted in time by offset minutes."""
        phases = None
        if self._phases is not None:
            phases = [PhaseSpan(p.label, p.start + offset, p.end + offset)
                      for p in self._phases]
        return MotionSeries(self._times + offset, self._joints, self._angles,
                            phases)

    def angular_speed(self):
        """Largest absolute joint angular speed per frame, rad/min. Central
        differences inside, one-sided differences at the two ends.
        """
        if len(self._times) < 2:
            return np.zeros(len(self._times))
        rates = np.gradient(self._angles, self._times, axis=0)
        return np.max(np.abs(rates), axis=1)

    def write_to_file(self, filename, variant="csv"):
        """Writes the recording to a file."""
        if variant not in MotionSeries.motion_writers:
            raise SchemaError("fatiguekit cannot write motion format %r"
                              % variant)
        MotionSeries.motion_writers[variant](self, filename)

    def __eq__(self, other):
        if not isinstance(other, MotionSeries):
            return NotImplemented
        return (self._joints == other.joints and
                np.array_equal(self._times, other.times) and
                np.array_equal(self._angles, other.angles) and
                self._phases == other.phases)

    def __str__(self):
        rate = self.rate
        return ("MotionSeries with %d frames of %d joints over %g min "
                "(%s frames/min)" % (len(self._times), len(self._joints),
                                     self.duration,
                                     "%g" % rate if rate else "n/a"))


def resample_motion(series, rate):
    """Linearly interpolate every joint angle onto a uniform grid spanning
    the recording. The grid has round(duration * rate) intervals, so both
    endpoints are kept exactly and the actual rate is as close to the
    requested one as the duration allows.
    """
    rate = require_positive("rate", rate)
    if len(series) < 2:
        raise InsufficientDataError("cannot resample a single frame")
    intervals = max(1, int(round(series.duration * rate)))
    grid = np.linspace(series.start, series.end, intervals + 1)
    angles = np.column_stack([np.interp(grid, series.times, column)
                              for column in series.angles.T])
    logger.debug("resampled %d frames to %d", len(series), len(grid))
    return MotionSeries(grid, series.joints, angles, series.phases)


def segment_phases(series, velocity_threshold=DEFAULT_VELOCITY_THRESHOLD,
                   min_phase_duration=DEFAULT_MIN_PHASE_DURATION):
    """Split a recording into alternating dwell and move phases.

    A frame is moving when its largest joint speed exceeds velocity_threshold.
    Runs of equal frames become phases; a run shorter than
    min_phase_duration joins the phase before it (the first phase, if short,
    joins the one after it). Phases are labelled dwell-1, move-1, dwell-2, ...
    and together cover the whole recording.

    :param velocity_threshold: rad/min
    :param min_phase_duration: minutes
    :rtype: list of PhaseSpan
    """
    require_positive("velocity_threshold", velocity_threshold)
    require_positive("min_phase_duration", min_phase_duration)
    if len(series) < 2:
        raise InsufficientDataError("cannot segment a single frame")
    times = series.times
    moving = series.angular_speed() > velocity_threshold
    run_starts = np.concatenate(
        [[0], np.flatnonzero(np.diff(moving.astype(int))) + 1])
    run_ends = np.append(run_starts[1:], len(times) - 1)
    spans = []
    for first, last in zip(run_starts, run_ends):
        kind = MOVE if moving[first] else DWELL
        start, end = float(times[first]), float(times[last])
        if spans and (end - start < min_phase_duration or
                      kind == spans[-1][0]):
            spans[-1][2] = end
        else:
            spans.append([kind, start, end])
    if len(spans) > 1 and spans[0][2] - spans[0][1] < min_phase_duration:
        spans[1][1] = spans[0][1]
        del spans[0]
    counts = {DWELL: 0, MOVE: 0}
    phases = []
    for kind, start, end in spans:
        counts[kind] += 1
        phases.append(PhaseSpan("%s-%d" % (kind, counts[kind]), start, end))
    logger.info("segmented %g min into %d phases", series.duration,
                len(phases))
    return phases


def _standard_time(standard_times, phase):
    for key in (phase.label, phase.kind):
        if key in standard_times:
            value = standard_times[key]
            if not (isinstance(value, (int, float)) and math.isfinite(value)
                    and value > 0):
                raise ConfigurationError("standard time for %r must be > 0, "
                                         "got %r" % (key, value))
            return float(value)
    raise ConfigurationError("no standard time for phase %r" % phase.label)


def efficiency_ratio(phases, standard_times):
    """Compare actual phase durations with standard times.

    A phase is looked up by its full label first and then by its kind, so
    standard_times may hold {"move-1": 0.02} or just {"move": 0.02}.

    :param standard_times: dict of label to minutes
    :returns: EfficiencyResult with standard / actual per phase label, and
        sum of standards / sum of actual durations overall
    """
    if not phases:
        raise InsufficientDataError("no phases to evaluate")
    per_phase = {}
    total_standard = 0.0
    total_actual = 0.0
    for phase in phases:
        standard = _standard_time(standard_times, phase)
        per_phase[phase.label] = standard / phase.duration
        total_standard += standard
        total_actual += phase.duration
    return EfficiencyResult(per_phase, total_standard / total_actual)
