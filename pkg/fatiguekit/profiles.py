"""Demanded external force on a muscle as a function of time.

All times are in minutes and all forces in newtons. Profiles are immutable
after construction. Besides plain evaluation every profile can report its
left limits and the instants where it may jump or kink, which lets the
fatigue integrals treat piecewise-constant and piecewise-linear loads
exactly.
"""

import logging
import math

import numpy as np

from fatiguekit.basics import (DomainError, InsufficientDataError, LoadSample,
                               ParameterError, RejectedInputError,
                               require_positive)
from fatiguekit.fatigue import DEFAULT_INTEGRATION_DT, accumulated_load

logger = logging.getLogger(__name__)

HOLD_PREVIOUS = "hold-previous"
LINEAR = "linear"
INTERPOLATIONS = (HOLD_PREVIOUS, LINEAR)

DOMAIN_TOLERANCE = 1e-9
"""Slack, in minutes, allowed when checking a time against a domain."""

_PHASE_EPS = 1e-12


def _check_level(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value)
            and value >= 0):
        raise RejectedInputError("%s must be a finite force >= 0, got %r"
                                 % (name, value))
    return float(value)


def uniform_grid(start, end, dt):
    """A grid from start to end with step dt. The last step is shortened if
    dt does not divide the range, so both endpoints are hit exactly.
    """
    dt = require_positive("dt", dt)
    if not end > start:
        raise ParameterError("grid end %r must exceed start %r" % (end, start))
    steps = max(1, int(math.ceil((end - start) / dt - 1e-9)))
    grid = start + dt * np.arange(steps + 1, dtype=float)
    grid[-1] = end
    return grid


class LoadProfile():
    """Base class for demanded-force profiles.

    Subclasses implement ``_right`` (the right-continuous value), ``_left``
    (the left limit) and ``breakpoints``; times handed to them are already
    checked against ``domain``.
    """

    @property
    def domain(self):
        """The (start, end) times on which this profile is defined."""
        return (0.0, math.inf)

    @property
    def start(self):
        """First instant of the domain."""
        return self.domain[0]

    @property
    def end(self):
        """Last instant of the domain, possibly infinite."""
        return self.domain[1]

    def _checked(self, times):
        times = np.asarray(times, dtype=float)
        if times.size == 0:
            return times
        if not np.all(np.isfinite(times)):
            raise DomainError("times must be finite")
        start, end = self.domain
        slack = DOMAIN_TOLERANCE * max(1.0, abs(start),
                                       abs(end) if math.isfinite(end) else 1.0)
        low, high = times.min(), times.max()
        if low < start - slack or high > end + slack:
            bad = low if low < start - slack else high
            raise DomainError("t=%g min is outside the profile domain "
                              "[%g, %g]" % (bad, start, end))
        return np.clip(times, start, end)

    def evaluate(self, t):
        """F_Load(t) in newtons."""
        return float(self.evaluate_many(np.array([t]))[0])

    def evaluate_many(self, times):
        """F_Load at every time in an array."""
        return self._right(self._checked(times))

    def evaluate_left(self, t):
        """The left limit of F_Load at t. Equal to evaluate(t) wherever the
        profile is continuous.
        """
        return float(self.evaluate_left_many(np.array([t]))[0])

    def evaluate_left_many(self, times):
        """Left limits at every time in an array."""
        return self._left(self._checked(times))

    def breakpoints(self, t0, t1):
        """Sorted instants strictly inside (t0, t1) where this profile may be
        discontinuous or not smooth.
        """
        return np.empty(0)

    def _right(self, times):
        raise NotImplementedError

    def _left(self, times):
        return self._right(times)


class ConstantProfile(LoadProfile):
    """A load that never changes."""

    def __init__(self, level):
        self._level = _check_level("level", level)

    @property
    def level(self):
        """The load in newtons."""
        return self._level

    def _right(self, times):
        return np.full(times.shape, self._level)

    def __eq__(self, other):
        if not isinstance(other, ConstantProfile):
            return NotImplemented
        return self._level == other.level

    def __repr__(self):
        return "ConstantProfile(%r)" % self._level


class CyclicProfile(LoadProfile):
    """A square wave: high for the first duty fraction of every period, low
    for the rest. At a switching instant the new value applies.
    """

    def __init__(self, high, low, period, duty):
        self._high = _check_level("high", high)
        self._low = _check_level("low", low)
        self._period = require_positive("period", period)
        if not 0 < duty < 1:
            raise ParameterError("duty must lie in (0, 1), got %r" % duty)
        self._duty = float(duty)

    @property
    def high(self):
        return self._high

    @property
    def low(self):
        return self._low

    @property
    def period(self):
        return self._period

    @property
    def duty(self):
        return self._duty

    def _phases(self, times):
        period = self._period
        phase = times - np.floor(times / period) * period
        switch = self._duty * period
        at_start = (phase < _PHASE_EPS * period) | (
            phase > period * (1 - _PHASE_EPS))
        at_switch = np.abs(phase - switch) < _PHASE_EPS * period
        return phase < switch, at_start, at_switch

    def _right(self, times):
        high, at_start, at_switch = self._phases(times)
        high[at_switch] = False
        high[at_start] = True
        return np.where(high, self._high, self._low)

    def _left(self, times):
        high, at_start, at_switch = self._phases(times)
        high[at_switch] = True
        high[at_start] = False
        return np.where(high, self._high, self._low)

    def breakpoints(self, t0, t1):
        first = math.floor(t0 / self._period)
        last = math.ceil(t1 / self._period)
        cycles = np.arange(first, last + 1, dtype=float) * self._period
        candidates = np.concatenate(
            [cycles, cycles + self._duty * self._period])
        slack = _PHASE_EPS * self._period
        inside = (candidates > t0 + slack) & (candidates < t1 - slack)
        return np.unique(candidates[inside])

    def mean_level(self):
        """The time-average of the square wave."""
        return self._duty * self._high + (1 - self._duty) * self._low

    def __eq__(self, other):
        if not isinstance(other, CyclicProfile):
            return NotImplemented
        return ((self._high, self._low, self._period, self._duty) ==
                (other.high, other.low, other.period, other.duty))

    def __repr__(self):
        return ("CyclicProfile(high=%r, low=%r, period=%r, duty=%r)"
                % (self._high, self._low, self._period, self._duty))


class SampledProfile(LoadProfile):
    """A load known at discrete instants, interpolated between them either
    linearly or by holding the previous sample. Never extrapolated.

    :param samples: an iterable of LoadSample or (t, f_load) pairs, with
        strictly increasing times
    :param interpolation: "linear" or "hold-previous"
    """

    def __init__(self, samples, interpolation=LINEAR):
        samples = [LoadSample(float(t), float(f)) for t, f in samples]
        self._init_arrays(np.array([s.t for s in samples], dtype=float),
                          np.array([s.f_load for s in samples], dtype=float),
                          interpolation)

    @classmethod
    def from_arrays(cls, times, values, interpolation=LINEAR):
        """Build a profile from parallel arrays of times and loads."""
        profile = cls.__new__(cls)
        profile._init_arrays(np.array(times, dtype=float),
                             np.array(values, dtype=float), interpolation)
        return profile

    def _init_arrays(self, times, values, interpolation):
        if interpolation not in INTERPOLATIONS:
            raise ParameterError("unknown interpolation %r, expected one of %s"
                                 % (interpolation, ", ".join(INTERPOLATIONS)))
        if times.ndim != 1 or times.shape != values.shape:
            raise RejectedInputError("times and values must be 1-d arrays "
                                     "of the same length")
        if len(times) < 2:
            raise InsufficientDataError("a sampled profile needs at least 2 "
                                        "samples, got %d" % len(times))
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise RejectedInputError("sampled profile contains non-finite "
                                     "values")
        if np.any(values < 0):
            raise RejectedInputError("sampled profile contains negative loads")
        if times[0] < 0:
            raise RejectedInputError("sample times must be >= 0")
        if np.any(np.diff(times) <= 0):
            index = int(np.argmax(np.diff(times) <= 0)) + 1
            raise RejectedInputError("sample times must be strictly "
                                     "increasing (sample %d at t=%g)"
                                     % (index, times[index]))
        times.setflags(write=False)
        values.setflags(write=False)
        self._times = times
        self._values = values
        self._interpolation = interpolation

    @property
    def domain(self):
        return (float(self._times[0]), float(self._times[-1]))

    @property
    def interpolation(self):
        return self._interpolation

    @property
    def times(self):
        """Sample times, read-only."""
        return self._times

    @property
    def values(self):
        """Sample loads, read-only."""
        return self._values

    @property
    def samples(self):
        """The samples as a list of LoadSample."""
        return [LoadSample(float(t), float(f))
                for t, f in zip(self._times, self._values)]

    def __len__(self):
        return len(self._times)

    def _right(self, times):
        if self._interpolation == LINEAR:
            return np.interp(times, self._times, self._values)
        index = np.searchsorted(self._times, times, side="right") - 1
        return self._values[np.clip(index, 0, len(self._times) - 1)]

    def _left(self, times):
        if self._interpolation == LINEAR:
            return np.interp(times, self._times, self._values)
        index = np.searchsorted(self._times, times, side="left") - 1
        return self._values[np.clip(index, 0, len(self._times) - 1)]

    def breakpoints(self, t0, t1):
        first = np.searchsorted(self._times, t0, side="right")
        last = np.searchsorted(self._times, t1, side="left")
        return np.array(self._times[first:last])

    def shifted(self, offset):
        """The same samples moved by offset minutes."""
        return SampledProfile.from_arrays(self._times + offset, self._values,
                                          self._interpolation)

    def scaled(self, factor):
        """The same profile with every load multiplied by factor."""
        return SampledProfile.from_arrays(self._times, self._values * factor,
                                          self._interpolation)

    def __eq__(self, other):
        if not isinstance(other, SampledProfile):
            return NotImplemented
        return (self._interpolation == other.interpolation and
                np.array_equal(self._times, other.times) and
                np.array_equal(self._values, other.values))

    def __repr__(self):
        return ("SampledProfile(%d samples on [%g, %g], %s)"
                % (len(self._times), self._times[0], self._times[-1],
                   self._interpolation))


class CompositeProfile(LoadProfile):
    """Profiles played one after another. Each segment runs its inner profile
    from local time 0 for the given duration.

    :param segments: an iterable of (duration, LoadProfile) pairs
    """

    def __init__(self, segments):
        durations = []
        profiles = []
        for duration, profile in segments:
            duration = require_positive("segment duration", duration)
            if not isinstance(profile, LoadProfile):
                raise ParameterError("segment profile must be a LoadProfile, "
                                     "got %r" % (profile,))
            start, end = profile.domain
            if start > DOMAIN_TOLERANCE or end < duration - DOMAIN_TOLERANCE:
                raise DomainError("segment of %g min does not fit inside its "
                                  "profile domain [%g, %g]"
                                  % (duration, start, end))
            durations.append(duration)
            profiles.append(profile)
        if not profiles:
            raise InsufficientDataError("a composite profile needs at least "
                                        "one segment")
        self._durations = np.array(durations)
        self._profiles = profiles
        self._starts = np.concatenate([[0.0], np.cumsum(self._durations)])

    @property
    def domain(self):
        return (0.0, float(self._starts[-1]))

    @property
    def segments(self):
        """The (duration, profile) pairs."""
        return list(zip(self._durations.tolist(), self._profiles))

    def _dispatch(self, times, index, left):
        out = np.empty(times.shape)
        for segment in np.unique(index):
            mask = index == segment
            local = np.clip(times[mask] - self._starts[segment], 0.0,
                            self._durations[segment])
            profile = self._profiles[segment]
            local = profile._checked(local)
            out[mask] = profile._left(local) if left else profile._right(local)
        return out

    def _right(self, times):
        index = np.searchsorted(self._starts, times, side="right") - 1
        return self._dispatch(times, np.clip(index, 0, len(self._profiles) - 1),
                              left=False)

    def _left(self, times):
        index = np.searchsorted(self._starts, times, side="left") - 1
        return self._dispatch(times, np.clip(index, 0, len(self._profiles) - 1),
                              left=True)

    def breakpoints(self, t0, t1):
        found = [self._starts[1:-1]]
        first = max(0, np.searchsorted(self._starts, t0, side="right") - 1)
        last = min(len(self._profiles) - 1,
                   np.searchsorted(self._starts, t1, side="left") - 1)
        for segment in range(first, last + 1):
            offset = self._starts[segment]
            local0 = max(0.0, t0 - offset)
            local1 = min(self._durations[segment], t1 - offset)
            if local1 > local0:
                found.append(self._profiles[segment].breakpoints(local0,
                                                                 local1)
                             + offset)
        points = np.unique(np.concatenate(found))
        return points[(points > t0) & (points < t1)]

    def __repr__(self):
        return "CompositeProfile(%d segments, %g min)" % (len(self._profiles),
                                                          self._starts[-1])


class FunctionProfile(LoadProfile):
    """A smooth load given by a vectorized callable, for analytic loads such
    as sinusoids.

    :param func: maps an array of times to an array of loads
    :param domain: the (start, end) on which func may be evaluated
    """

    def __init__(self, func, domain=(0.0, math.inf)):
        start, end = float(domain[0]), float(domain[1])
        if start < 0 or not end > start:
            raise ParameterError("invalid domain %r" % (domain,))
        self._func = func
        self._domain = (start, end)

    @property
    def domain(self):
        return self._domain

    def _right(self, times):
        values = np.broadcast_to(np.asarray(self._func(times), dtype=float),
                                 times.shape)
        if not np.all(np.isfinite(values)):
            raise RejectedInputError("load function returned non-finite "
                                     "values")
        if np.any(values < 0):
            raise RejectedInputError("load function returned negative loads")
        return np.array(values)


def evaluate(profile, t):
    """F_Load(t) for any profile."""
    return profile.evaluate(t)


def repeated(profile, count):
    """A profile defined from 0 played count times back to back."""
    start, end = profile.domain
    if not math.isfinite(end):
        raise ParameterError("cannot repeat a profile with an unbounded "
                             "domain")
    if isinstance(profile, SampledProfile) and start != 0:
        profile = profile.shifted(-start)
        start, end = profile.domain
    if start > DOMAIN_TOLERANCE:
        raise DomainError("a repeated profile must start at 0, not %g" % start)
    return CompositeProfile([(end, profile)] * int(count))


def resample(profile, dt, horizon, start=0.0, interpolation=None):
    """Sample profile on a uniform grid of step dt covering [start, horizon].

    :param interpolation: interpolation of the result; defaults to that of a
        sampled source and to hold-previous otherwise
    :rtype: SampledProfile
    """
    require_positive("dt", dt)
    require_positive("horizon", horizon)
    grid = uniform_grid(start, horizon, dt)
    values = profile.evaluate_many(grid)
    if interpolation is None:
        interpolation = getattr(profile, "interpolation", HOLD_PREVIOUS)
    logger.debug("resampled %r onto %d points", profile, len(grid))
    return SampledProfile.from_arrays(grid, values, interpolation)


def mean_relative_load(profile, params, horizon, start=0.0,
                       dt=DEFAULT_INTEGRATION_DT):
    """The average of F_Load / MVC over [start, horizon]."""
    require_positive("horizon", horizon)
    if not horizon > start:
        raise ParameterError("horizon %r must exceed start %r"
                             % (horizon, start))
    load = accumulated_load(profile, params, start, horizon, dt)
    return load / (horizon - start)
