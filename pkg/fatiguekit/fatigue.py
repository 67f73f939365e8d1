"""The dynamic fatigue model.

Capacity decays under load as dF_cem/dt = -k F_cem F_Load / MVC, and the
feeling of fatigue grows as dU/dt = MVC F_Load / F_cem^2. With the
accumulated normalized load F(t) = integral of F_Load / MVC both have closed
forms:

    F_cem(t) = MVC exp(-k F(t))
    U(t)     = (exp(2k F(t)) - exp(2k F(0))) / 2k

The closed forms are the production path. ``step_reference_ode`` integrates
the two differential equations directly with classical RK4 and exists to
cross-check them.

Times are in minutes, forces in newtons, k in 1/min.
"""

import logging
import math

import numpy as np
from scipy.optimize import bisect

from fatiguekit.basics import (CapacityExhaustedError, MuscleState,
                               ParameterError, RejectedInputError,
                               require_positive)

logger = logging.getLogger(__name__)

CAPACITY_FLOOR_RATIO = 1e-9
"""The RK4 oracle gives up once F_cem < CAPACITY_FLOOR_RATIO * MVC."""

ENDURANCE_TOLERANCE = 1e-8
"""Bisection tolerance, in minutes, for endurance times."""

DEFAULT_INTEGRATION_DT = 1e-3

SCAN_CHUNK = 4096
"""Number of scan steps evaluated at once by endurance_time."""


def _scalar_or_array(values):
    if np.ndim(values) == 0:
        return float(values)
    return values


def _check_load(f_load):
    if not (math.isfinite(f_load) and f_load >= 0):
        raise RejectedInputError("f_load must be a finite force >= 0, got %r"
                                 % (f_load,))
    return float(f_load)


def cumulative_load(profile, params, points, dt):
    """The accumulated normalized load F at every one of the sorted points,
    measured from the first.

    Integrates F_Load / MVC by composite Simpson on panels no wider than dt.
    Panel edges always fall on the profile's breakpoints, so loads that are
    piecewise constant or piecewise linear are integrated exactly.

    :param profile: a LoadProfile defined on [points[0], points[-1]]
    :param params: MuscleParameters supplying MVC
    :param points: non-decreasing times in minutes
    :param dt: largest panel width in minutes
    :rtype: numpy array, same length as points
    """
    dt = require_positive("dt", dt)
    points = np.asarray(points, dtype=float)
    if points.ndim != 1 or points.size == 0:
        raise ParameterError("points must be a non-empty 1-d array")
    if np.any(np.diff(points) < 0):
        raise ParameterError("points must be sorted")
    if points[-1] == points[0]:
        return np.zeros(points.shape)
    nodes = np.union1d(points, profile.breakpoints(points[0], points[-1]))
    gaps = np.diff(nodes)
    counts = np.maximum(1, np.ceil(gaps / dt - 1e-9).astype(int))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    within = np.arange(offsets[-1]) - np.repeat(offsets[:-1], counts)
    lefts = (np.repeat(nodes[:-1], counts)
             + np.repeat(gaps / counts, counts) * within)
    rights = np.append(lefts[1:], nodes[-1])
    start_values = profile.evaluate_many(lefts)
    mid_values = profile.evaluate_many(0.5 * (lefts + rights))
    end_values = profile.evaluate_left_many(rights)
    for values in (start_values, mid_values, end_values):
        if not np.all(np.isfinite(values)):
            raise RejectedInputError("load profile produced non-finite "
                                     "samples")
    panels = (rights - lefts) / 6.0 * (start_values + 4.0 * mid_values
                                       + end_values)
    running = np.concatenate([[0.0], np.cumsum(panels)])
    logger.debug("integrated %d panels over [%g, %g]", len(panels),
                 points[0], points[-1])
    return running[offsets[np.searchsorted(nodes, points)]] / params.mvc


def accumulated_load(profile, params, t0, t1, dt):
    """F over [t0, t1]: the integral of F_Load(u) / MVC.

    :rtype: float, dimensionless and >= 0
    """
    dt = require_positive("dt", dt)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ParameterError("t0 and t1 must be finite")
    if t0 < 0 or t1 < t0:
        raise ParameterError("need t1 >= t0 >= 0, got t0=%r, t1=%r"
                             % (t0, t1))
    if t1 == t0:
        return 0.0
    return float(cumulative_load(profile, params, [t0, t1], dt)[-1])


def fcem_closed_form(params, f_acc):
    """Current exertable maximum force, MVC exp(-k F).

    :param f_acc: accumulated normalized load, a scalar or array >= 0
    :rtype: newtons, in (0, MVC]
    """
    values = np.asarray(f_acc, dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ParameterError("accumulated load must be finite and >= 0")
    return _scalar_or_array(params.mvc * np.exp(-params.k * values))


def fatigue_index_closed_form(params, f_t, f_0=0.0):
    """Fatigue index accumulated between accumulation states f_0 and f_t,
    (exp(2k f_t) - exp(2k f_0)) / 2k.

    :rtype: minutes, >= 0
    """
    f_t = np.asarray(f_t, dtype=float)
    f_0 = np.asarray(f_0, dtype=float)
    if not (np.all(np.isfinite(f_t)) and np.all(np.isfinite(f_0))):
        raise ParameterError("accumulated loads must be finite")
    if np.any(f_0 < 0):
        raise ParameterError("f_0 must be >= 0")
    if np.any(f_t < f_0):
        raise ParameterError("f_t must be >= f_0; the fatigue index never "
                             "decreases")
    two_k = 2.0 * params.k
    return _scalar_or_array(np.exp(two_k * f_0) * np.expm1(two_k * (f_t - f_0))
                            / two_k)


def _rk4_step(params, fcem, u, f_acc, f_load, dt, floor):
    """One RK4 step of the coupled system with the load held constant.
    Returns (fcem, u, f_acc).
    """
    mvc = params.mvc
    decay = params.k * f_load / mvc
    relative = f_load / mvc

    def rates(capacity):
        if capacity < floor:
            raise CapacityExhaustedError(
                "F_cem fell to %g N, below the floor of %g N"
                % (capacity, floor))
        return -decay * capacity, mvc * f_load / (capacity * capacity)

    d_fcem1, d_u1 = rates(fcem)
    d_fcem2, d_u2 = rates(fcem + 0.5 * dt * d_fcem1)
    d_fcem3, d_u3 = rates(fcem + 0.5 * dt * d_fcem2)
    d_fcem4, d_u4 = rates(fcem + dt * d_fcem3)
    fcem = fcem + dt / 6.0 * (d_fcem1 + 2 * d_fcem2 + 2 * d_fcem3 + d_fcem4)
    u = u + dt / 6.0 * (d_u1 + 2 * d_u2 + 2 * d_u3 + d_u4)
    if fcem < floor:
        raise CapacityExhaustedError("F_cem fell to %g N, below the floor of "
                                     "%g N" % (fcem, floor))
    return fcem, u, f_acc + relative * dt


def step_reference_ode(state, params, f_load, dt, floor=None):
    """Advance a MuscleState by one RK4 step of length dt under a constant
    load. This is the brute-force oracle for the closed forms.

    :param floor: capacity floor in newtons, default 1e-9 * MVC
    :raises CapacityExhaustedError: if F_cem would drop below the floor
    """
    dt = require_positive("dt", dt)
    f_load = _check_load(f_load)
    if floor is None:
        floor = CAPACITY_FLOOR_RATIO * params.mvc
    fcem, u, f_acc = _rk4_step(params, state.fcem, state.u, state.f_acc,
                               f_load, dt, floor)
    return MuscleState(state.t + dt, fcem, f_acc, u)


def simulate_reference(params, profile, horizon, dt, start=0.0, floor=None):
    """Run the RK4 oracle over [start, horizon] from a rested muscle.

    Steps never straddle a breakpoint of the profile, and the load of each
    step is taken at its midpoint.

    :rtype: MuscleState at horizon
    """
    dt = require_positive("dt", dt)
    if not horizon > start:
        raise ParameterError("horizon must exceed start")
    if floor is None:
        floor = CAPACITY_FLOOR_RATIO * params.mvc
    nodes = np.union1d([start, horizon], profile.breakpoints(start, horizon))
    fcem, u, f_acc = params.mvc, 0.0, 0.0
    for left, right in zip(nodes[:-1], nodes[1:]):
        steps = max(1, int(math.ceil((right - left) / dt - 1e-9)))
        width = (right - left) / steps
        loads = profile.evaluate_many(left + width * (np.arange(steps) + 0.5))
        for f_load in loads.tolist():
            fcem, u, f_acc = _rk4_step(params, fcem, u, f_acc, f_load, width,
                                       floor)
    return MuscleState(horizon, fcem, f_acc, u)


def _scan_grid(start, end, dt):
    steps = max(1, int(math.ceil((end - start) / dt - 1e-9)))
    grid = start + dt * np.arange(steps + 1, dtype=float)
    grid[-1] = end
    return grid


def endurance_time(params, profile, t_max, dt):
    """The earliest instant at which the muscle can no longer sustain the
    demanded load, F_cem(t) <= F_Load(t).

    Load history starts at the beginning of the profile's domain (or 0). The
    profile is scanned at step dt, left limits included so that a load step
    above capacity is caught at the jump, and a crossing inside a smooth piece
    is refined by bisection to ENDURANCE_TOLERANCE.

    :returns: the time in minutes, or None if the muscle is not exhausted by
        t_max
    """
    t_max = require_positive("t_max", t_max)
    dt = require_positive("dt", dt)
    start = max(profile.domain[0], 0.0)
    if not t_max > start:
        raise ParameterError("t_max %r must exceed the profile start %r"
                             % (t_max, start))
    profile.evaluate(t_max)
    mvc, k = params.mvc, params.k
    if profile.evaluate(start) >= mvc:
        logger.debug("%s: load at start already reaches MVC", params.muscle_id)
        return start
    f_acc = 0.0
    chunk_start = start
    while chunk_start < t_max:
        chunk_end = min(chunk_start + SCAN_CHUNK * dt, t_max)
        points = np.union1d(_scan_grid(chunk_start, chunk_end, dt),
                            profile.breakpoints(chunk_start, chunk_end))
        accumulated = f_acc + cumulative_load(profile, params, points, dt)
        capacity = mvc * np.exp(-k * accumulated[1:])
        left_hit = capacity <= profile.evaluate_left_many(points[1:])
        right_hit = capacity <= profile.evaluate_many(points[1:])
        hits = np.flatnonzero(left_hit | right_hit)
        if hits.size:
            hit = hits[0]
            if not left_hit[hit]:
                return float(points[hit + 1])
            return _refine_crossing(params, profile, points[hit],
                                    points[hit + 1], accumulated[hit], dt)
        f_acc = float(accumulated[-1])
        chunk_start = chunk_end
    logger.debug("%s: no exhaustion before %g min", params.muscle_id, t_max)
    return None


def _refine_crossing(params, profile, left, right, f_left, dt):
    """Bisect F_cem(t) - F_Load(t) on a smooth piece (left, right]."""

    def margin(t):
        if t <= left:
            return (params.mvc * math.exp(-params.k * f_left)
                    - profile.evaluate(left))
        f_acc = f_left + cumulative_load(profile, params, [left, t], dt)[-1]
        return (params.mvc * math.exp(-params.k * f_acc)
                - profile.evaluate_left(t))

    logger.debug("%s: bisecting endurance in [%g, %g]", params.muscle_id,
                 left, right)
    return float(bisect(margin, left, right, xtol=ENDURANCE_TOLERANCE))


def constant_endurance_time(params, f_load):
    """Endurance under a constant load, -ln(f) / (k f) with f = F_Load / MVC.

    :returns: minutes; 0 if the load reaches MVC; None for a zero load
    """
    relative = _check_load(f_load) / params.mvc
    if relative == 0:
        return None
    if relative >= 1:
        return 0.0
    return -math.log(relative) / (params.k * relative)


def reference_fatigue_index(params, relative_load):
    """Fatigue index reached at exhaustion under a constant relative load f,
    (f^-2 - 1) / 2k. Used as the scale for normalized fatigue.

    :returns: minutes, or None if f is not in (0, 1)
    """
    if not (math.isfinite(relative_load) and 0 < relative_load < 1):
        return None
    return (relative_load ** -2 - 1.0) / (2.0 * params.k)


class FatigueTracker():
    """Follows one muscle through a simulation loop, one step at a time, under
    a load held constant over each step.

    :param params: MuscleParameters of the muscle
    :param t: starting time in minutes
    """

    def __init__(self, params, t=0.0):
        self._params = params
        self._t = float(t)
        self._f_acc = 0.0
        self._overload_time = 0.0
        self._last_load = 0.0

    @property
    def params(self):
        return self._params

    @property
    def overload_time(self):
        """Minutes so far during which the load exceeded F_cem."""
        return self._overload_time

    @property
    def state(self):
        """The current MuscleState, from the closed forms."""
        return MuscleState(self._t, fcem_closed_form(self._params,
                                                     self._f_acc),
                           self._f_acc,
                           fatigue_index_closed_form(self._params,
                                                     self._f_acc))

    @property
    def exhausted(self):
        """Did the latest load reach the current capacity?"""
        return self._last_load > 0 and self._last_load >= \
            fcem_closed_form(self._params, self._f_acc)

    def update(self, f_load, dt):
        """Hold f_load for dt minutes and return the new state."""
        dt = require_positive("dt", dt)
        f_load = _check_load(f_load)
        params = self._params
        capacity = fcem_closed_form(params, self._f_acc)
        relative = f_load / params.mvc
        if f_load > 0:
            if f_load >= capacity:
                self._overload_time += dt
            else:
                crossing = math.log(capacity / f_load) / (params.k * relative)
                self._overload_time += max(0.0, dt - crossing)
        self._f_acc += relative * dt
        self._t += dt
        self._last_load = f_load
        return self.state
