"""Quasi-static loading of a planar (sagittal) linkage.

The worker is a chain of rigid segments joined at named joints. Each joint
angle is the absolute angle of the segment it drives, in radians from the
vertical, so the horizontal reach of a segment is length * sin(angle).
Gravity moments of the segments distal to a joint, plus the handled mass at
the load point, give the torque the joint must resist. Accelerations are
ignored.

Joint torques become muscle loads through equivalent muscles with fixed
moment arms, either by configured share fractions or by min-max recruitment
(see fatiguekit.models).
"""

import copy
import json
import logging
import math
import os

import networkx as nx
import numpy as np

from fatiguekit.basics import (DEFAULT_K, ConfigurationError, DomainError,
                               MuscleParameters, ParameterError,
                               RejectedInputError, SchemaError,
                               require_positive)
from fatiguekit.profiles import HOLD_PREVIOUS, SampledProfile

logger = logging.getLogger(__name__)

GRAVITY = 9.81
"""m/s^2"""

DEFAULT_ANGLE_RANGE = (-math.pi, math.pi)
SHARE_TOLERANCE = 1e-9
SPAN_TOLERANCE = 1e-9

RECRUITMENT_SHARES = "shares"
RECRUITMENT_MINMAX = "minmax"

DEFAULT_WORKER_FILE = os.path.join(os.path.dirname(__file__), "data",
                                   "default_worker.json")


class SegmentSpec():
    """A rigid body segment running from a proximal to a distal joint.

    :param name: segment name
    :param length: metres
    :param mass: kilograms
    :param com_ratio: centre of mass position from the proximal joint, as a
        fraction of the length
    :param proximal: name of the joint that drives this segment
    :param distal: name of the joint (or end point) at the far end
    """

    def __init__(self, name, length, mass, com_ratio, proximal, distal):
        if not name:
            raise SchemaError("segment names must be non-empty")
        self._name = str(name)
        self._length = require_positive("length of %s" % name, length)
        if not (math.isfinite(mass) and mass >= 0):
            raise ParameterError("mass of %s must be >= 0, got %r"
                                 % (name, mass))
        if not 0 <= com_ratio <= 1:
            raise ParameterError("com_ratio of %s must lie in [0, 1], got %r"
                                 % (name, com_ratio))
        if not proximal or not distal or proximal == distal:
            raise SchemaError("segment %s needs distinct proximal and distal "
                              "joints" % name)
        self._mass = float(mass)
        self._com_ratio = float(com_ratio)
        self._proximal = str(proximal)
        self._distal = str(distal)

    @property
    def name(self):
        return self._name

    @property
    def length(self):
        return self._length

    @property
    def mass(self):
        return self._mass

    @property
    def com_ratio(self):
        return self._com_ratio

    @property
    def proximal(self):
        return self._proximal

    @property
    def distal(self):
        return self._distal

    def to_dict(self):
        return {"name": self._name, "proximal": self._proximal,
                "distal": self._distal, "length_m": self._length,
                "mass_kg": self._mass, "com_ratio": self._com_ratio}

    def __repr__(self):
        return "SegmentSpec(%r, %s->%s)" % (self._name, self._proximal,
                                            self._distal)


class MuscleAttachment():
    """An equivalent muscle: fatigue parameters plus where it acts.

    :param params: MuscleParameters
    :param moment_arms: dict of joint name to moment arm in metres
    :param share: fraction of its joint's torque this muscle carries, under
        share recruitment
    """

    def __init__(self, params, moment_arms, share=None):
        if not moment_arms:
            raise SchemaError("muscle %s acts on no joint" % params.muscle_id)
        self._params = params
        self._moment_arms = {}
        for joint, arm in moment_arms.items():
            self._moment_arms[str(joint)] = require_positive(
                "moment arm of %s at %s" % (params.muscle_id, joint), arm)
        if share is not None and not 0 <= share <= 1:
            raise ConfigurationError("share of %s must lie in [0, 1], got %r"
                                     % (params.muscle_id, share))
        self._share = None if share is None else float(share)

    @property
    def params(self):
        return self._params

    @property
    def muscle_id(self):
        return self._params.muscle_id

    @property
    def moment_arms(self):
        return dict(self._moment_arms)

    @property
    def joint(self):
        """The single joint this muscle spans; SchemaError if it spans
        several.
        """
        if len(self._moment_arms) != 1:
            raise SchemaError("muscle %s spans %d joints"
                              % (self.muscle_id, len(self._moment_arms)))
        return next(iter(self._moment_arms))

    @property
    def share(self):
        return self._share

    def with_params(self, params):
        return MuscleAttachment(params, self._moment_arms, self._share)

    def to_dict(self):
        data = {"id": self.muscle_id, "mvc_N": self._params.mvc,
                "k_per_min": self._params.k}
        if len(self._moment_arms) == 1:
            data["joint"] = self.joint
            data["moment_arm_m"] = self._moment_arms[self.joint]
        else:
            data["moment_arms_m"] = dict(sorted(self._moment_arms.items()))
        if self._share is not None:
            data["share"] = self._share
        return data


class WorkerProfile():
    """Anthropometry, joint strengths and equivalent muscles of a worker.

    :param segments: list of SegmentSpec forming one chain
    :param joint_strengths: dict of joint name to maximum static torque, N m
    :param muscles: list of MuscleAttachment
    :param joint_ranges: optional dict of joint name to (low, high) radians
    :param load_point: where the handled mass hangs; defaults to the far end
        of the chain
    :param recruitment: "shares" or "minmax"
    :param stature: reference stature in metres, for scaling
    :param body_mass: reference body mass in kilograms, for scaling
    """

    def __init__(self, segments, joint_strengths, muscles, joint_ranges=None,
                 load_point=None, recruitment=RECRUITMENT_SHARES,
                 stature=None, body_mass=None, name="worker", description=""):
        if not segments:
            raise SchemaError("a worker needs at least one segment")
        graph = nx.DiGraph()
        for segment in segments:
            if graph.has_edge(segment.proximal, segment.distal):
                raise SchemaError("two segments join %s and %s"
                                  % (segment.proximal, segment.distal))
            graph.add_edge(segment.proximal, segment.distal, segment=segment)
        if not nx.is_arborescence(graph):
            raise SchemaError("segments must form a single tree hanging from "
                              "one root joint")
        for node, degree in graph.out_degree():
            if degree > 1:
                raise SchemaError("joint %s drives more than one segment"
                                  % node)
        self._graph = graph
        order = list(nx.topological_sort(graph))
        self._segments = [graph.edges[u, v]["segment"]
                          for u, v in zip(order[:-1], order[1:])]
        self._joints = tuple(segment.proximal for segment in self._segments)
        self._load_point = load_point if load_point is not None else order[-1]
        if self._load_point not in graph:
            raise SchemaError("load point %r is not a joint of the chain"
                              % self._load_point)
        self._strengths = {}
        for joint in self._joints:
            if joint not in joint_strengths:
                raise SchemaError("no strength given for joint %s" % joint)
            self._strengths[joint] = require_positive(
                "strength of %s" % joint, joint_strengths[joint])
        unknown = set(joint_strengths) - set(self._joints)
        if unknown:
            raise SchemaError("strengths given for unknown joints: %s"
                              % ", ".join(sorted(unknown)))
        self._ranges = {joint: DEFAULT_ANGLE_RANGE for joint in self._joints}
        for joint, bounds in (joint_ranges or {}).items():
            if joint not in self._ranges:
                raise SchemaError("range given for unknown joint %s" % joint)
            low, high = float(bounds[0]), float(bounds[1])
            if not low < high:
                raise ConfigurationError("range of %s is empty" % joint)
            self._ranges[joint] = (low, high)
        if recruitment not in (RECRUITMENT_SHARES, RECRUITMENT_MINMAX):
            raise ConfigurationError("unknown recruitment %r" % recruitment)
        self._recruitment = recruitment
        self._muscles = list(muscles)
        self._validate_muscles()
        self._stature = stature
        self._body_mass = body_mass
        self._name = name
        self._description = description

    def _validate_muscles(self):
        seen = set()
        for muscle in self._muscles:
            if muscle.muscle_id in seen:
                raise SchemaError("muscle %s is listed twice"
                                  % muscle.muscle_id)
            seen.add(muscle.muscle_id)
            for joint in muscle.moment_arms:
                if joint not in self._strengths:
                    raise SchemaError("muscle %s references unknown joint %s"
                                      % (muscle.muscle_id, joint))
        if self._recruitment != RECRUITMENT_SHARES:
            return
        by_joint = {}
        for muscle in self._muscles:
            by_joint.setdefault(muscle.joint, []).append(muscle)
        for joint, group in by_joint.items():
            shares = [muscle.share for muscle in group]
            if len(group) == 1 and shares[0] is None:
                continue
            if any(share is None for share in shares):
                raise ConfigurationError("muscles sharing joint %s need "
                                         "share fractions" % joint)
            if abs(sum(shares) - 1.0) > SHARE_TOLERANCE:
                raise ConfigurationError("shares at joint %s sum to %r, not 1"
                                         % (joint, sum(shares)))

    @property
    def name(self):
        return self._name

    @property
    def description(self):
        return self._description

    @property
    def segments(self):
        """Segments from the root outwards."""
        return list(self._segments)

    @property
    def joints(self):
        """Joints that carry an angle, from the root outwards."""
        return self._joints

    @property
    def root(self):
        return self._joints[0]

    @property
    def load_point(self):
        return self._load_point

    @property
    def joint_strengths(self):
        return dict(self._strengths)

    @property
    def joint_ranges(self):
        return dict(self._ranges)

    @property
    def muscles(self):
        """Muscles ordered by muscle_id."""
        return sorted(self._muscles, key=lambda muscle: muscle.muscle_id)

    @property
    def muscle_parameters(self):
        return [muscle.params for muscle in self.muscles]

    @property
    def recruitment(self):
        return self._recruitment

    @property
    def stature(self):
        return self._stature

    @property
    def body_mass(self):
        return self._body_mass

    def muscle(self, muscle_id):
        """The MuscleAttachment with the given id."""
        for muscle in self._muscles:
            if muscle.muscle_id == muscle_id:
                return muscle
        raise SchemaError("worker has no muscle %r" % muscle_id)

    def distal_segments(self, joint):
        """The segments moved by a joint: every segment beyond it."""
        if joint not in self._graph:
            raise SchemaError("unknown joint %r" % joint)
        beyond = nx.descendants(self._graph, joint) | {joint}
        return [segment for segment in self._segments
                if segment.proximal in beyond]

    def carries_load(self, joint):
        """Is the load point beyond this joint?"""
        return self._load_point in nx.descendants(self._graph, joint)

    def _copy(self, segments=None, muscles=None, stature=None, body_mass=None):
        return WorkerProfile(
            segments if segments is not None else self._segments,
            self._strengths,
            muscles if muscles is not None else self._muscles,
            joint_ranges=self._ranges, load_point=self._load_point,
            recruitment=self._recruitment,
            stature=stature if stature is not None else self._stature,
            body_mass=body_mass if body_mass is not None else self._body_mass,
            name=self._name, description=self._description)

    def with_k(self, k):
        """A copy in which every muscle uses rate constant k."""
        return self._copy(muscles=[muscle.with_params(muscle.params.with_k(k))
                                   for muscle in self._muscles])

    def scaled(self, stature=None, body_mass=None):
        """Adapt the anthropometry to an individual: lengths scale with
        stature and masses with body mass, relative to the reference values
        stored with this profile.
        """
        length_factor = 1.0
        mass_factor = 1.0
        if stature is not None:
            if not self._stature:
                raise ConfigurationError("profile has no reference stature")
            length_factor = require_positive("stature", stature) \
                / self._stature
        if body_mass is not None:
            if not self._body_mass:
                raise ConfigurationError("profile has no reference body mass")
            mass_factor = require_positive("body_mass", body_mass) \
                / self._body_mass
        segments = [SegmentSpec(s.name, s.length * length_factor,
                                s.mass * mass_factor, s.com_ratio,
                                s.proximal, s.distal)
                    for s in self._segments]
        logger.info("scaled worker %s: lengths x%g, masses x%g", self._name,
                    length_factor, mass_factor)
        return self._copy(segments=segments, stature=stature,
                          body_mass=body_mass)

    def to_dict(self):
        data = {"name": self._name, "description": self._description,
                "recruitment": self._recruitment,
                "load_point": self._load_point,
                "segments": [segment.to_dict() for segment in self._segments],
                "joints": {joint: {"strength_Nm": self._strengths[joint],
                                   "range_rad": list(self._ranges[joint])}
                           for joint in self._joints},
                "muscles": [muscle.to_dict() for muscle in self.muscles]}
        if self._stature is not None:
            data["stature_m"] = self._stature
        if self._body_mass is not None:
            data["body_mass_kg"] = self._body_mass
        return data

    @staticmethod
    def from_dict(data):
        """Build a profile from the structure of a worker profile file."""
        try:
            segments = [SegmentSpec(s["name"], s["length_m"], s["mass_kg"],
                                    s.get("com_ratio", 0.5), s["proximal"],
                                    s["distal"])
                        for s in data["segments"]]
            joints = data["joints"]
            strengths = {name: spec["strength_Nm"]
                         for name, spec in joints.items()}
            ranges = {name: spec["range_rad"] for name, spec in joints.items()
                      if "range_rad" in spec}
            recruitment = data.get("recruitment", RECRUITMENT_SHARES)
            muscles = [_muscle_from_dict(entry, strengths, recruitment)
                       for entry in data.get("muscles", [])]
        except KeyError as err:
            raise SchemaError("worker profile is missing %s" % err) from None
        except (TypeError, AttributeError) as err:
            raise SchemaError("malformed worker profile: %s" % err) from None
        return WorkerProfile(segments, strengths, muscles,
                             joint_ranges=ranges,
                             load_point=data.get("load_point"),
                             recruitment=recruitment,
                             stature=data.get("stature_m"),
                             body_mass=data.get("body_mass_kg"),
                             name=data.get("name", "worker"),
                             description=data.get("description", ""))

    def __str__(self):
        return ("WorkerProfile %s with %d segments, %d joints and %d muscles"
                % (self._name, len(self._segments), len(self._joints),
                   len(self._muscles)))


def _muscle_from_dict(entry, strengths, recruitment):
    muscle_id = entry["id"]
    if "moment_arms_m" in entry:
        arms = dict(entry["moment_arms_m"])
    else:
        arms = {entry["joint"]: entry["moment_arm_m"]}
    share = entry.get("share")
    mvc = entry.get("mvc_N")
    if mvc is None:
        if len(arms) != 1 or recruitment != RECRUITMENT_SHARES:
            raise ConfigurationError("muscle %s needs mvc_N" % muscle_id)
        joint, arm = next(iter(arms.items()))
        if joint not in strengths:
            raise SchemaError("muscle %s references unknown joint %s"
                              % (muscle_id, joint))
        mvc = strengths[joint] * (1.0 if share is None else share) / arm
    params = MuscleParameters(muscle_id, mvc, entry.get("k_per_min", DEFAULT_K))
    return MuscleAttachment(params, arms, share)


def default_worker_profile():
    """The bundled 50th-percentile placeholder worker."""
    with open(DEFAULT_WORKER_FILE, "r") as infile:
        return WorkerProfile.from_dict(json.load(infile))


class Posture():
    """Joint angles of one instant, radians from the vertical."""

    def __init__(self, joint_angles):
        self._angles = {}
        for joint, angle in joint_angles.items():
            if not math.isfinite(angle):
                raise RejectedInputError("angle of %s is not finite" % joint)
            self._angles[str(joint)] = float(angle)

    @property
    def joint_angles(self):
        return dict(self._angles)

    def mirrored(self):
        """The posture reflected about the vertical."""
        return Posture({joint: -angle for joint, angle in self._angles.items()})

    def check(self, profile):
        """Raise unless the posture names exactly the profile's joints and
        every angle lies within its anatomical range.
        """
        _check_joint_names(profile, self._angles)
        for joint, angle in self._angles.items():
            low, high = profile.joint_ranges[joint]
            if not low <= angle <= high:
                raise RejectedInputError("angle %g of %s is outside [%g, %g]"
                                         % (angle, joint, low, high))


class JointLoadSeries():
    """Torque demanded at one joint over time.

    :param joint: joint name
    :param times: strictly increasing times in minutes
    :param torques: N m
    """

    def __init__(self, joint, times, torques):
        times = np.array(times, dtype=float)
        torques = np.array(torques, dtype=float)
        if times.shape != torques.shape or times.ndim != 1:
            raise RejectedInputError("times and torques must match")
        if np.any(np.diff(times) <= 0):
            raise RejectedInputError("times must be strictly increasing")
        self._joint = joint
        self._times = times
        self._torques = torques

    @property
    def joint(self):
        return self._joint

    @property
    def times(self):
        return self._times

    @property
    def torques(self):
        return self._torques

    @property
    def samples(self):
        return list(zip(self._times.tolist(), self._torques.tolist()))

    def peak(self):
        return float(np.max(self._torques)) if len(self._torques) else 0.0


def _check_joint_names(profile, names):
    unknown = set(names) - set(profile.joints)
    if unknown:
        raise SchemaError("unknown joints in posture: %s"
                          % ", ".join(sorted(unknown)))
    missing = set(profile.joints) - set(names)
    if missing:
        raise SchemaError("posture lacks joints: %s"
                          % ", ".join(sorted(missing)))


def _torque_matrix(profile, angles, masses):
    """Joint torque magnitudes for many frames.

    :param angles: dict of joint name to array of angles, one per frame
    :param masses: array of handled masses in kg, one per frame
    :rtype: dict of joint name to array of torques in N m
    """
    positions = {profile.root: np.zeros_like(masses)}
    centres = {}
    for segment in profile.segments:
        reach = np.sin(angles[segment.proximal]) * segment.length
        base = positions[segment.proximal]
        centres[segment.name] = base + segment.com_ratio * reach
        positions[segment.distal] = base + reach
    torques = {}
    for joint in profile.joints:
        origin = positions[joint]
        moment = np.zeros_like(masses)
        for segment in profile.distal_segments(joint):
            moment = moment + segment.mass * (centres[segment.name] - origin)
        if profile.carries_load(joint):
            moment = moment + masses * (positions[profile.load_point] - origin)
        torques[joint] = np.abs(GRAVITY * moment)
    return torques


def static_joint_torques(profile, posture, hand_load_mass):
    """Gravity torque each joint must resist in a posture while holding
    hand_load_mass kilograms at the load point.

    :param posture: a Posture or a dict of joint angles
    :rtype: dict of joint name to N m
    """
    if not isinstance(posture, Posture):
        posture = Posture(posture)
    if not (math.isfinite(hand_load_mass) and hand_load_mass >= 0):
        raise ParameterError("hand_load_mass must be >= 0, got %r"
                             % hand_load_mass)
    posture.check(profile)
    angles = {joint: np.array([angle])
              for joint, angle in posture.joint_angles.items()}
    torques = _torque_matrix(profile, angles, np.array([float(hand_load_mass)]))
    return {joint: float(values[0]) for joint, values in torques.items()}


def _share_loads(profile, torques):
    loads = {}
    for muscle in profile.muscles:
        joint = muscle.joint
        share = 1.0 if muscle.share is None else muscle.share
        loads[muscle.muscle_id] = share * torques[joint] \
            / muscle.moment_arms[joint]
    return loads


def _check_torques(profile, joint_torques):
    unknown = set(joint_torques) - set(profile.joints)
    if unknown:
        raise SchemaError("torques given for unknown joints: %s"
                          % ", ".join(sorted(unknown)))
    for joint, torque in joint_torques.items():
        if np.any(~np.isfinite(torque)) or np.any(np.asarray(torque) < 0):
            raise ParameterError("torque at %s must be finite and >= 0"
                                 % joint)


def torque_to_muscle_load(profile, joint_torques):
    """Demanded force of every muscle for the given joint torques.

    Under share recruitment a muscle carries share * torque / moment_arm of
    its joint; under min-max recruitment a linear program spreads the
    torques so that the largest relative load is minimal.

    :param joint_torques: dict of joint name to N m, all >= 0
    :rtype: dict of muscle_id to N
    """
    _check_torques(profile, joint_torques)
    torques = {joint: float(joint_torques.get(joint, 0.0))
               for joint in profile.joints}
    if profile.recruitment == RECRUITMENT_MINMAX:
        from fatiguekit.models import MinMaxRecruitment
        return MinMaxRecruitment(profile, torques).solve()
    return _share_loads(profile, torques)


def _check_span(motion, mass_timeline):
    start, end = mass_timeline.domain
    if start > motion.start + SPAN_TOLERANCE or \
            end < motion.end - SPAN_TOLERANCE:
        raise DomainError("mass timeline [%g, %g] min does not cover the "
                          "motion [%g, %g] min"
                          % (start, end, motion.start, motion.end))


def _motion_angles(profile, motion):
    _check_joint_names(profile, motion.joints)
    angles = {joint: motion.angle(joint) for joint in profile.joints}
    for joint, values in angles.items():
        low, high = profile.joint_ranges[joint]
        if np.any(values < low) or np.any(values > high):
            raise RejectedInputError("angles of %s leave [%g, %g]"
                                     % (joint, low, high))
    return angles


def joint_load_series(profile, motion, mass_timeline):
    """Frame-by-frame joint torques of a recording.

    :param mass_timeline: a profile of handled mass in kg over the recording
    :rtype: dict of joint name to JointLoadSeries
    """
    _check_span(motion, mass_timeline)
    masses = mass_timeline.evaluate_many(motion.times)
    torques = _torque_matrix(profile, _motion_angles(profile, motion), masses)
    return {joint: JointLoadSeries(joint, motion.times, torques[joint])
            for joint in profile.joints}


def posture_series_to_load_profiles(profile, motion, mass_timeline):
    """Per-muscle demanded force over a recording.

    Each frame is loaded quasi-statically, then torques are mapped to
    muscles. Over each frame interval the load is held at the mean of its
    two frames, so the accumulated load matches the trapezoid rule and
    converges at second order in the frame step.

    :rtype: dict of muscle_id to SampledProfile (hold-previous)
    """
    if len(motion) < 2:
        raise DomainError("a load profile needs at least two frames")
    series = joint_load_series(profile, motion, mass_timeline)
    torques = {joint: load.torques for joint, load in series.items()}
    if profile.recruitment == RECRUITMENT_MINMAX:
        loads = _minmax_loads(profile, torques, len(motion))
    else:
        loads = _share_loads(profile, torques)
    logger.info("built %d muscle load profiles over %d frames", len(loads),
                len(motion))
    return {muscle_id: SampledProfile.from_arrays(
                motion.times, _interval_means(values), HOLD_PREVIOUS)
            for muscle_id, values in sorted(loads.items())}


def _interval_means(values):
    held = np.array(values, dtype=float)
    held[:-1] = 0.5 * (held[:-1] + held[1:])
    return held


def _minmax_loads(profile, torques, frames):
    from fatiguekit.models import MinMaxRecruitment
    solved = {}
    loads = {muscle.muscle_id: np.zeros(frames) for muscle in profile.muscles}
    for frame in range(frames):
        frame_torques = {joint: float(values[frame])
                         for joint, values in torques.items()}
        key = tuple(round(frame_torques[joint], 12) for joint in profile.joints)
        if key not in solved:
            solved[key] = MinMaxRecruitment(profile, frame_torques).solve()
        for muscle_id, force in solved[key].items():
            loads[muscle_id][frame] = force
    logger.debug("solved %d distinct recruitment problems", len(solved))
    return loads


def scaled_worker(profile, factor):
    """A worker whose segment masses and muscle MVCs are all multiplied by
    factor; relative muscle loads are unchanged.
    """
    data = copy.deepcopy(profile.to_dict())
    for segment in data["segments"]:
        segment["mass_kg"] *= factor
    for muscle in data["muscles"]:
        muscle["mvc_N"] *= factor
    return WorkerProfile.from_dict(data)
