"""Objective work evaluation: from a recorded task to a fatigue report.

The pipeline loads every frame quasi-statically, turns joint torques into
muscle loads, integrates the fatigue model on the analysis grid and splits
the result by work phase. Reports are plain data and serialize to JSON and
CSV byte-for-byte reproducibly.
"""

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from fatiguekit import __version__
from fatiguekit.basics import (DomainError, InvariantViolation,
                               require_positive)
from fatiguekit.biomech import (joint_load_series,
                                posture_series_to_load_profiles)
from fatiguekit.fatigue import (accumulated_load, cumulative_load,
                                endurance_time, fatigue_index_closed_form,
                                fcem_closed_form, reference_fatigue_index)
from fatiguekit.motion import (DEFAULT_MIN_PHASE_DURATION,
                               DEFAULT_VELOCITY_THRESHOLD, efficiency_ratio,
                               resample_motion, segment_phases)
from fatiguekit.profiles import repeated, resample, uniform_grid

logger = logging.getLogger(__name__)

DEFAULT_ENDURANCE_HORIZON = 480.0
"""minutes: one shift of the task repeated back to back."""

DEFAULT_INERTIAL_THRESHOLD = 120.0
"""rad/min (2 rad/s). Faster joint motion breaks the quasi-static loading."""

CONVERGENCE_WARNING = 1e-4
CONSERVATION_TOLERANCE = 1e-9
CONSERVATION_FLOOR = 1e-15
SIGNIFICANT_DIGITS = 9
SPAN_TOLERANCE = 1e-9

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
TRAJECTORY_FILE = "trajectory_%s.csv"
TRAJECTORY_HEADER = ["t_min", "f_load_N", "fcem_N", "u_min"]
SUMMARY_HEADER = ["muscle_id", "final_u_min", "final_fcem_N",
                  "endurance_time_min", "exhausted_within_task",
                  "peak_relative_load", "mean_relative_load",
                  "normalized_fatigue", "overload_time_min"]


def _round(value):
    """value to SIGNIFICANT_DIGITS significant digits; None stays None."""
    if value is None:
        return None
    return float("%.*g" % (SIGNIFICANT_DIGITS, value))


def _round_all(values):
    return tuple(_round(value) for value in np.asarray(values).tolist())


def _format(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return "%.*g" % (SIGNIFICANT_DIGITS, value)


class MuscleTrajectory(NamedTuple):
    """Fatigue state of one muscle at every point of the analysis grid."""
    t: tuple
    f_load: tuple
    fcem: tuple
    u: tuple


class MuscleResult():
    """Everything the report says about one muscle.

    endurance_time is in minutes from the start of the task, assuming the
    task is repeated back to back, or None if the muscle lasts beyond the
    endurance horizon.
    """

    def __init__(self, muscle_id, mvc, k, trajectory, endurance_time,
                 exhausted_within_task, peak_relative_load,
                 mean_relative_load, normalized_fatigue, overload_spans):
        self.muscle_id = muscle_id
        self.mvc = mvc
        self.k = k
        self.trajectory = trajectory
        self.endurance_time = endurance_time
        self.exhausted_within_task = exhausted_within_task
        self.peak_relative_load = peak_relative_load
        self.mean_relative_load = mean_relative_load
        self.normalized_fatigue = normalized_fatigue
        self.overload_spans = [tuple(span) for span in overload_spans]

    @property
    def final_u(self):
        return self.trajectory.u[-1] if self.trajectory.u else 0.0

    @property
    def final_fcem(self):
        return self.trajectory.fcem[-1] if self.trajectory.fcem else self.mvc

    @property
    def overload_time(self):
        return _round(sum(end - start for start, end in self.overload_spans))

    def to_dict(self):
        return {"muscle_id": self.muscle_id, "mvc_N": self.mvc,
                "k_per_min": self.k, "final_u_min": self.final_u,
                "final_fcem_N": self.final_fcem,
                "endurance_time_min": self.endurance_time,
                "exhausted_within_task": self.exhausted_within_task,
                "peak_relative_load": self.peak_relative_load,
                "mean_relative_load": self.mean_relative_load,
                "normalized_fatigue": self.normalized_fatigue,
                "overload_time_min": self.overload_time,
                "overload_spans": [list(span) for span in self.overload_spans],
                "trajectory": {"t_min": list(self.trajectory.t),
                               "f_load_N": list(self.trajectory.f_load),
                               "fcem_N": list(self.trajectory.fcem),
                               "u_min": list(self.trajectory.u)}}

    @staticmethod
    def from_dict(data):
        trajectory = data["trajectory"]
        return MuscleResult(
            data["muscle_id"], data["mvc_N"], data["k_per_min"],
            MuscleTrajectory(tuple(trajectory["t_min"]),
                             tuple(trajectory["f_load_N"]),
                             tuple(trajectory["fcem_N"]),
                             tuple(trajectory["u_min"])),
            data["endurance_time_min"], data["exhausted_within_task"],
            data["peak_relative_load"], data["mean_relative_load"],
            data["normalized_fatigue"], data["overload_spans"])

    def summary_row(self):
        return [self.muscle_id] + [_format(value) for value in (
            self.final_u, self.final_fcem, self.endurance_time,
            self.exhausted_within_task, self.peak_relative_load,
            self.mean_relative_load, self.normalized_fatigue,
            self.overload_time)]


class PhaseSummary():
    """A work phase with the fatigue each muscle accumulated during it."""

    def __init__(self, label, start, end, delta_u, standard_time=None,
                 efficiency=None):
        self.label = label
        self.start = start
        self.end = end
        self.delta_u = dict(delta_u)
        self.standard_time = standard_time
        self.efficiency = efficiency

    @property
    def duration(self):
        return _round(self.end - self.start)

    def to_dict(self):
        return {"label": self.label, "start_min": self.start,
                "end_min": self.end, "duration_min": self.duration,
                "delta_u_min": dict(sorted(self.delta_u.items())),
                "standard_time_min": self.standard_time,
                "efficiency": self.efficiency}

    @staticmethod
    def from_dict(data):
        return PhaseSummary(data["label"], data["start_min"], data["end_min"],
                            data["delta_u_min"], data["standard_time_min"],
                            data["efficiency"])


class FatigueReport():
    """The evaluation of one recorded task.

    :param muscles: list of MuscleResult, ordered by muscle_id
    :param phases: list of PhaseSummary in time order
    :param efficiency: overall standard over actual time, or None
    :param joints: list of dicts with the peak torque of every joint
    :param quasi_static_violations: (start, end) spans where joints moved
        faster than the inertial threshold
    :param grid_convergence: dict with the half step used and the largest
        relative change of final U
    :param metadata: version, parameters and input digests
    """

    def __init__(self, muscles, phases, efficiency, joints,
                 quasi_static_violations, grid_convergence, metadata):
        self.muscles = sorted(muscles, key=lambda muscle: muscle.muscle_id)
        self.phases = list(phases)
        self.efficiency = efficiency
        self.joints = [dict(joint) for joint in joints]
        self.quasi_static_violations = [tuple(span) for span in
                                        quasi_static_violations]
        self.grid_convergence = dict(grid_convergence)
        self.metadata = metadata

    def muscle(self, muscle_id):
        for muscle in self.muscles:
            if muscle.muscle_id == muscle_id:
                return muscle
        raise KeyError(muscle_id)

    def to_dict(self):
        return {"fatiguekit_version": self.metadata.get("version"),
                "metadata": self.metadata,
                "muscles": [muscle.to_dict() for muscle in self.muscles],
                "phases": [phase.to_dict() for phase in self.phases],
                "efficiency": self.efficiency,
                "joints": self.joints,
                "quasi_static_violations": [list(span) for span in
                                            self.quasi_static_violations],
                "grid_convergence": self.grid_convergence}

    @staticmethod
    def from_dict(data):
        return FatigueReport(
            [MuscleResult.from_dict(entry) for entry in data["muscles"]],
            [PhaseSummary.from_dict(entry) for entry in data["phases"]],
            data["efficiency"], data["joints"],
            data["quasi_static_violations"], data["grid_convergence"],
            data["metadata"])

    def __eq__(self, other):
        if not isinstance(other, FatigueReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __str__(self):
        return ("FatigueReport of %d muscles over %d phases"
                % (len(self.muscles), len(self.phases)))


def _digest(*parts):
    sha = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            part = np.ascontiguousarray(part, dtype="<f8").tobytes()
        elif isinstance(part, str):
            part = part.encode("utf-8")
        sha.update(part)
    return sha.hexdigest()


def _spans_of(times, mask):
    """(first, last) times of every run of True frames."""
    spans = []
    run_start = None
    for index, flag in enumerate(mask.tolist()):
        if flag and run_start is None:
            run_start = index
        if not flag and run_start is not None:
            spans.append((float(times[run_start]), float(times[index - 1])))
            run_start = None
    if run_start is not None:
        spans.append((float(times[run_start]), float(times[-1])))
    return spans


def _overload_spans(params, grid, loads, capacities):
    """Where the load held on each grid interval exceeds the decaying
    capacity. Within an interval the crossing instant is exact.
    """
    held = loads[:-1]
    capacity = capacities[:-1]
    spans = []
    for index in np.flatnonzero(held > 0).tolist():
        load = held[index]
        delay = 0.0
        if capacity[index] > load:
            delay = math.log(capacity[index] / load) / (
                params.k * load / params.mvc)
        start = grid[index] + delay
        end = grid[index + 1]
        if start >= end:
            continue
        if spans and spans[-1][1] == grid[index] and delay == 0.0:
            spans[-1][1] = end
        else:
            spans.append([start, end])
    return [(float(start), float(end)) for start, end in spans]


def _analysis_grid(motion, analysis_dt):
    if analysis_dt is None or analysis_dt <= motion.step * (1 + 1e-9):
        return motion.times, None
    return uniform_grid(motion.start, motion.end, analysis_dt), analysis_dt


def _half_step_loads(worker, motion, mass_timeline, loads, coarse_dt):
    """Muscle loads rebuilt from the inputs at half the analysis step: the
    recorded loads on a grid of coarse_dt / 2, or the recording
    interpolated to twice its frame rate.
    """
    if coarse_dt is not None:
        return {muscle_id: resample(load, coarse_dt / 2.0, motion.end,
                                    start=motion.start)
                for muscle_id, load in loads.items()}
    finer = resample_motion(motion, 2.0 * motion.rate)
    return posture_series_to_load_profiles(worker, finer, mass_timeline)


def _task_phases(motion, velocity_threshold, min_phase_duration):
    if motion.phases is not None:
        phases = motion.phases
        if phases and (phases[0].start < motion.start - SPAN_TOLERANCE or
                       phases[-1].end > motion.end + SPAN_TOLERANCE):
            raise DomainError("phases [%g, %g] leave the recording [%g, %g]"
                              % (phases[0].start, phases[-1].end,
                                 motion.start, motion.end))
        return list(phases)
    if not motion.is_uniform():
        logger.warning("motion is not uniformly sampled; resampling at %g "
                       "frames/min for phase segmentation", motion.rate)
        motion = resample_motion(motion, motion.rate)
    return segment_phases(motion, velocity_threshold, min_phase_duration)


class _MuscleEvaluation(NamedTuple):
    result: MuscleResult
    delta_u: dict
    relative_change: float


def _evaluate_muscle(params, load, half_load, grid, coarse_dt, phases,
                     endurance_horizon):
    start, end = float(grid[0]), float(grid[-1])
    duration = end - start
    if coarse_dt is not None:
        load = resample(load, coarse_dt, end, start=start)
    step = float(np.max(np.diff(grid)))
    boundaries = [phase.start for phase in phases] + \
        [phase.end for phase in phases]
    points = np.union1d(grid, np.clip(boundaries, start, end))
    accumulated = cumulative_load(load, params, points, step)
    f_grid = accumulated[np.searchsorted(points, grid)]
    f_load = load.evaluate_many(grid)
    fcem = fcem_closed_form(params, f_grid)
    u = fatigue_index_closed_form(params, f_grid)
    if np.any(np.diff(fcem) > 0) or np.any(np.diff(u) < 0):
        raise InvariantViolation("fatigue of %s is not monotone"
                                 % params.muscle_id)

    def at(t):
        return accumulated[np.searchsorted(points, min(max(t, start), end))]

    delta_u = {phase.label: fatigue_index_closed_form(params, at(phase.end),
                                                      at(phase.start))
               for phase in phases}
    _check_conservation(params.muscle_id, delta_u, float(u[-1]), phases, start,
                        end)

    mean_relative = float(f_grid[-1]) / duration
    peak_relative = float(np.max(f_load)) / params.mvc
    endurance = None
    if peak_relative > 0:
        task = load.shifted(-start)
        count = max(1, int(math.ceil(endurance_horizon / duration - 1e-9)))
        horizon = min(endurance_horizon, count * duration)
        endurance = endurance_time(params, repeated(task, count), horizon,
                                   duration / (len(grid) - 1))
    exhausted = endurance is not None and endurance <= duration
    reference = reference_fatigue_index(params, mean_relative)
    normalized = None if reference is None else float(u[-1]) / reference

    u_half = fatigue_index_closed_form(
        params, accumulated_load(half_load, params, start, end, step / 2.0))
    relative_change = 0.0
    if u[-1] > 0:
        relative_change = abs(u_half - float(u[-1])) / float(u[-1])

    spans = _overload_spans(params, grid, f_load, fcem)
    if spans:
        logger.warning("%s: load exceeds capacity for %g min",
                       params.muscle_id,
                       sum(end - start for start, end in spans))
    result = MuscleResult(
        params.muscle_id, params.mvc, params.k,
        MuscleTrajectory(_round_all(grid), _round_all(f_load),
                         _round_all(fcem), _round_all(u)),
        _round(endurance), exhausted, _round(peak_relative),
        _round(mean_relative), _round(normalized),
        [(_round(a), _round(b)) for a, b in spans])
    logger.debug("%s: final U %g, endurance %s", params.muscle_id, u[-1],
                 endurance)
    return _MuscleEvaluation(result, delta_u, relative_change)


def _check_conservation(muscle_id, delta_u, final_u, phases, start, end):
    if not phases:
        return
    covered = (abs(phases[0].start - start) <= SPAN_TOLERANCE and
               abs(phases[-1].end - end) <= SPAN_TOLERANCE and
               all(abs(a.end - b.start) <= SPAN_TOLERANCE
                   for a, b in zip(phases[:-1], phases[1:])))
    if not covered:
        return
    total = math.fsum(delta_u.values())
    if abs(total - final_u) > CONSERVATION_TOLERANCE * final_u + \
            CONSERVATION_FLOOR:
        raise InvariantViolation("phase fatigue of %s sums to %r, not %r"
                                 % (muscle_id, total, final_u))


def evaluate_task(worker, motion, mass_timeline, analysis_dt=None,
                  standards=None,
                  velocity_threshold=DEFAULT_VELOCITY_THRESHOLD,
                  min_phase_duration=DEFAULT_MIN_PHASE_DURATION,
                  endurance_horizon=DEFAULT_ENDURANCE_HORIZON,
                  inertial_threshold=DEFAULT_INERTIAL_THRESHOLD, jobs=1):
    """Evaluate a recorded task for a worker.

    :param worker: WorkerProfile
    :param motion: MotionSeries; attached phases are used as given,
        otherwise the recording is segmented into dwell and move phases
    :param mass_timeline: profile of handled mass in kg covering the motion
    :param analysis_dt: analysis grid step in minutes; the motion's own
        frames are used unless this is coarser
    :param standards: optional dict of phase label (or kind) to standard
        minutes, for efficiency ratios
    :param endurance_horizon: minutes of back-to-back repetition searched
        for exhaustion
    :param inertial_threshold: rad/min
    :param jobs: number of threads evaluating muscles
    :rtype: FatigueReport
    """
    if analysis_dt is not None:
        analysis_dt = require_positive("analysis_dt", analysis_dt)
    endurance_horizon = require_positive("endurance_horizon",
                                         endurance_horizon)
    require_positive("inertial_threshold", inertial_threshold)
    jobs = int(require_positive("jobs", jobs))

    loads = posture_series_to_load_profiles(worker, motion, mass_timeline)
    grid, coarse_dt = _analysis_grid(motion, analysis_dt)
    phases = _task_phases(motion, velocity_threshold, min_phase_duration)
    params = {muscle.muscle_id: muscle.params for muscle in worker.muscles}

    half_loads = _half_step_loads(worker, motion, mass_timeline, loads,
                                  coarse_dt)

    def evaluate(muscle_id):
        return _evaluate_muscle(params[muscle_id], loads[muscle_id],
                                half_loads[muscle_id], grid, coarse_dt,
                                phases, endurance_horizon)

    muscle_ids = sorted(loads)
    if jobs > 1 and len(muscle_ids) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            evaluations = list(executor.map(evaluate, muscle_ids))
    else:
        evaluations = [evaluate(muscle_id) for muscle_id in muscle_ids]
    efficiency = None
    per_phase = {}
    if standards is not None:
        result = efficiency_ratio(phases, standards)
        efficiency = _round(result.overall)
        per_phase = result.per_phase
    phase_summaries = []
    for phase in phases:
        standard = None
        if phase.label in per_phase:
            standard = _round(per_phase[phase.label] * phase.duration)
        phase_summaries.append(PhaseSummary(
            phase.label, _round(phase.start), _round(phase.end),
            {muscle_id: _round(evaluation.delta_u[phase.label])
             for muscle_id, evaluation in zip(muscle_ids, evaluations)},
            standard, _round(per_phase.get(phase.label))))

    strengths = worker.joint_strengths
    joints = []
    for joint, series in joint_load_series(worker, motion,
                                           mass_timeline).items():
        peak = series.peak()
        joints.append({"joint": joint, "peak_torque_Nm": _round(peak),
                       "strength_Nm": strengths[joint],
                       "peak_strength_ratio": _round(peak / strengths[joint])})

    violations = _spans_of(motion.times,
                           motion.angular_speed() > inertial_threshold)
    if violations:
        logger.warning("joints move faster than %g rad/min in %d spans; "
                       "quasi-static loads underestimate these",
                       inertial_threshold, len(violations))
    change = max([evaluation.relative_change for evaluation in evaluations],
                 default=0.0)
    if change > CONVERGENCE_WARNING:
        logger.warning("halving the analysis step changes final U by %.3g",
                       change)
    step = float(np.max(np.diff(grid)))
    metadata = {
        "version": __version__,
        "worker": worker.name,
        "parameters": {"analysis_dt_min": analysis_dt,
                       "grid_step_min": _round(step),
                       "velocity_threshold_rad_per_min": velocity_threshold,
                       "min_phase_duration_min": min_phase_duration,
                       "endurance_horizon_min": endurance_horizon,
                       "inertial_threshold_rad_per_min": inertial_threshold,
                       "recruitment": worker.recruitment},
        "task": {"start_min": _round(motion.start),
                 "end_min": _round(motion.end),
                 "duration_min": _round(motion.duration),
                 "frames": len(motion), "grid_points": len(grid)},
        "inputs": {
            "worker_sha256": _digest(json.dumps(worker.to_dict(),
                                                sort_keys=True)),
            "motion_sha256": _digest(",".join(motion.joints), motion.times,
                                     np.asarray(motion.angles)),
            "mass_sha256": _digest(mass_timeline.evaluate_many(grid))}}
    report = FatigueReport(
        [evaluation.result for evaluation in evaluations], phase_summaries,
        efficiency, joints, [(_round(a), _round(b)) for a, b in violations],
        {"half_step_min": _round(step / 2.0),
         "max_relative_change": _round(change)}, metadata)
    logger.info("assembled %s", report)
    return report


def write_report(report, directory):
    """Writes report.json, summary.csv and one trajectory_<muscle>.csv per
    muscle into directory, creating it if needed.
    """
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, REPORT_FILE)
    with open(path, "w", encoding="utf-8", newline="\n") as outfile:
        json.dump(report.to_dict(), outfile, indent=2, sort_keys=True)
        outfile.write("\n")
    for muscle in report.muscles:
        path = os.path.join(directory, TRAJECTORY_FILE % muscle.muscle_id)
        with open(path, "w", encoding="utf-8", newline="") as outfile:
            writer = csv.writer(outfile, lineterminator="\n")
            writer.writerow(TRAJECTORY_HEADER)
            for row in zip(*muscle.trajectory):
                writer.writerow([_format(value) for value in row])
    path = os.path.join(directory, SUMMARY_FILE)
    with open(path, "w", encoding="utf-8", newline="") as outfile:
        writer = csv.writer(outfile, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for muscle in report.muscles:
            writer.writerow(muscle.summary_row())
    logger.info("wrote report for %d muscles to %s", len(report.muscles),
                directory)


def read_report(directory):
    """Parses the report.json in directory back into a FatigueReport."""
    with open(os.path.join(directory, REPORT_FILE), "r",
              encoding="utf-8") as infile:
        return FatigueReport.from_dict(json.load(infile))
