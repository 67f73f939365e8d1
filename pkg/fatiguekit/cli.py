"""Command line front end: ``fatiguekit analyze|endurance|synth``.

Exit status is 0 on success, 1 on any usage or input error and 2 when an
internal consistency check fails. Errors are printed to stderr as a single
line ``error:<kind>:<message>``; logging also goes to stderr, so stdout only
carries results.
"""

import logging
import os
import sys
from argparse import ArgumentParser

from fatiguekit import __version__
from fatiguekit.basics import (DEFAULT_K, ConfigurationError, FatigueKitError,
                               InvariantViolation, MuscleParameters,
                               require_positive)
from fatiguekit.biomech import default_worker_profile
from fatiguekit.fatigue import constant_endurance_time, reference_fatigue_index
from fatiguekit.fileio import (read_json_document, read_mass_timeline,
                               read_motion, read_phases, read_standard_times,
                               read_worker_profile)
from fatiguekit.generator import (DEFAULT_RATE, SCENARIOS, hold_scenario,
                                  lift_cycle_scenario, write_scenario)
from fatiguekit.motion import (DEFAULT_MIN_PHASE_DURATION,
                               DEFAULT_VELOCITY_THRESHOLD)
from fatiguekit.report import (DEFAULT_ENDURANCE_HORIZON,
                               DEFAULT_INERTIAL_THRESHOLD, evaluate_task,
                               write_report)

logger = logging.getLogger(__name__)

SEED_VARIABLE = "FATIGUEKIT_SEED"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class UsageError(FatigueKitError):
    """The command line could not be understood."""


class FatigueArgumentParser(ArgumentParser):
    """An ArgumentParser that raises instead of exiting on bad usage, so
    every failure leaves through the same error line.
    """

    def error(self, message):
        raise UsageError("%s: %s" % (self.prog, message))


class RunConfig():
    """Settings of one ``analyze`` run, merged from an optional JSON config
    file and the command line. Flags override the file; relative paths in
    the file are taken relative to the file.
    """

    PATHS = ("worker", "motion", "mass", "output", "standards", "phases")
    NUMBERS = ("analysis_dt", "k", "velocity_threshold", "min_phase_duration",
               "inertial_threshold", "endurance_horizon", "stature",
               "body_mass", "jobs")
    DEFAULTS = {"velocity_threshold": DEFAULT_VELOCITY_THRESHOLD,
                "min_phase_duration": DEFAULT_MIN_PHASE_DURATION,
                "inertial_threshold": DEFAULT_INERTIAL_THRESHOLD,
                "endurance_horizon": DEFAULT_ENDURANCE_HORIZON,
                "jobs": 1}
    REQUIRED = ("motion", "mass", "output")

    def __init__(self, **settings):
        unknown = set(settings) - set(self.PATHS) - set(self.NUMBERS)
        if unknown:
            raise ConfigurationError("unknown settings: %s"
                                     % ", ".join(sorted(unknown)))
        for name in self.PATHS + self.NUMBERS:
            value = settings.get(name)
            if value is None:
                value = self.DEFAULTS.get(name)
            setattr(self, name, value)
        missing = [name for name in self.REQUIRED if not getattr(self, name)]
        if missing:
            raise ConfigurationError("missing required settings: %s"
                                     % ", ".join(missing))
        for name in self.NUMBERS:
            value = getattr(self, name)
            if value is not None:
                if isinstance(value, bool):
                    raise ConfigurationError("%s must be a number" % name)
                require_positive(name, value)
        if int(self.jobs) != self.jobs:
            raise ConfigurationError("jobs must be an integer")
        self.jobs = int(self.jobs)

    @staticmethod
    def from_sources(config_file=None, **flags):
        """Merge a config file (may be None) with flags; flags that are None
        are not set.
        """
        settings = {}
        if config_file is not None:
            document = read_json_document(config_file)
            if not isinstance(document, dict):
                raise ConfigurationError("%s: a config file must be a JSON "
                                         "object" % config_file)
            base = os.path.dirname(os.path.abspath(config_file))
            for name, value in document.items():
                if name in RunConfig.PATHS and isinstance(value, str):
                    value = os.path.join(base, value)
                settings[name] = value
        for name, value in flags.items():
            if value is not None:
                settings[name] = value
        return RunConfig(**settings)


def cmd_analyze(config):
    """Runs evaluate_task and write_report, then prints a summary."""
    if config.worker:
        worker = read_worker_profile(config.worker)
    else:
        worker = default_worker_profile()
    if config.stature is not None or config.body_mass is not None:
        worker = worker.scaled(config.stature, config.body_mass)
    if config.k is not None:
        worker = worker.with_k(config.k)
    motion = read_motion(config.motion)
    if config.phases:
        motion = motion.with_phases(read_phases(config.phases))
    mass = read_mass_timeline(config.mass)
    standards = None
    if config.standards:
        standards = read_standard_times(config.standards)
    report = evaluate_task(worker, motion, mass,
                           analysis_dt=config.analysis_dt,
                           standards=standards,
                           velocity_threshold=config.velocity_threshold,
                           min_phase_duration=config.min_phase_duration,
                           endurance_horizon=config.endurance_horizon,
                           inertial_threshold=config.inertial_threshold,
                           jobs=config.jobs)
    write_report(report, config.output)
    print("%-20s %14s %16s %14s" % ("muscle", "final_u_min", "endurance_min",
                                    "peak_rel_load"))
    for muscle in report.muscles:
        endurance = "none" if muscle.endurance_time is None \
            else "%.6g" % muscle.endurance_time
        print("%-20s %14.6g %16s %14.6g" % (muscle.muscle_id, muscle.final_u,
                                            endurance,
                                            muscle.peak_relative_load))
    if report.efficiency is not None:
        print("efficiency %.6g" % report.efficiency)
    print("report written to %s" % config.output)
    return 0


def cmd_endurance(mvc, k, load):
    """Prints the endurance time under a constant load and the fatigue index
    reached at that instant.
    """
    params = MuscleParameters("muscle", mvc, k)
    endurance = constant_endurance_time(params, load)
    if endurance is None:
        print("no exhaustion")
        return 0
    print("endurance_time_min %.9g" % endurance)
    u_end = reference_fatigue_index(params, load / mvc)
    print("u_at_exhaustion_min %.9g" % (0.0 if u_end is None else u_end))
    return 0


def _seed():
    value = os.environ.get(SEED_VARIABLE)
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError("%s must be an integer, got %r"
                                 % (SEED_VARIABLE, value)) from None


def cmd_synth(scenario, output, duration_s=None, rate_hz=None, cycles=3,
              dwell_s=2.0, move_s=1.0, final_dwell_s=0.0, mass=0.0,
              noise=0.0):
    """Writes a synthetic recording, its mass timeline and the ground-truth
    phases to output.
    """
    if scenario not in SCENARIOS:
        raise UsageError("unknown scenario %r" % scenario)
    rate = DEFAULT_RATE if rate_hz is None else 60.0 * rate_hz
    seed = _seed()
    if scenario == "hold":
        duration = 60.0 if duration_s is None else duration_s
        built = hold_scenario(duration / 60.0, rate, mass=mass, noise=noise,
                              seed=seed)
    else:
        built = lift_cycle_scenario(cycles, dwell_s / 60.0, move_s / 60.0,
                                    rate, mass=mass,
                                    final_dwell=final_dwell_s / 60.0,
                                    noise=noise, seed=seed)
    write_scenario(built, output)
    print("wrote %d frames and %d phases to %s"
          % (len(built.motion), len(built.phases), output))
    return 0


def _run_analyze(options):
    config = RunConfig.from_sources(
        options.config, worker=options.worker, motion=options.motion,
        mass=options.mass, output=options.output,
        standards=options.standards, phases=options.phases,
        analysis_dt=options.analysis_dt, k=options.k,
        velocity_threshold=options.velocity_threshold,
        min_phase_duration=options.min_phase_duration,
        inertial_threshold=options.inertial_threshold,
        endurance_horizon=options.endurance_horizon,
        stature=options.stature, body_mass=options.body_mass,
        jobs=options.jobs)
    return cmd_analyze(config)


def _run_endurance(options):
    return cmd_endurance(options.mvc, options.k, options.load)


def _run_synth(options):
    return cmd_synth(options.scenario, options.output,
                     duration_s=options.duration_s, rate_hz=options.rate_hz,
                     cycles=options.cycles, dwell_s=options.dwell_s,
                     move_s=options.move_s,
                     final_dwell_s=options.final_dwell_s, mass=options.mass,
                     noise=options.noise)


def build_parser():
    parser = FatigueArgumentParser(
        prog="fatiguekit",
        description="Evaluate muscle fatigue of recorded manual work")
    parser.add_argument("--version", action="version",
                        version="%(prog)s " + __version__)
    parser.add_argument("--verbose", "-v", action="count", default=0,
                        help="More logging on stderr (-v info, -vv debug)")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    analyze = commands.add_parser("analyze", help="Evaluate a recorded task")
    analyze.add_argument("--config", "-c", metavar="FILE",
                         help="JSON file with settings; flags override it")
    analyze.add_argument("--worker", "-w", metavar="FILE",
                         help="Worker profile (default: bundled 50th "
                              "percentile placeholder)")
    analyze.add_argument("--motion", "-m", metavar="FILE",
                         help="Motion recording (csv or xlsx)")
    analyze.add_argument("--mass", metavar="FILE",
                         help="Handled mass timeline, t_min,mass_kg")
    analyze.add_argument("--output", "-o", metavar="DIR",
                         help="Directory for the report files")
    analyze.add_argument("--standards", "-s", metavar="FILE",
                         help="Standard times per phase label, JSON")
    analyze.add_argument("--phases", metavar="FILE",
                         help="Phases to use instead of segmenting, JSON")
    analyze.add_argument("--analysis-dt", type=float, metavar="MIN",
                         help="Analysis grid step in minutes")
    analyze.add_argument("--k", type=float, metavar="PER_MIN",
                         help="Override the rate constant of every muscle")
    analyze.add_argument("--velocity-threshold", type=float,
                         metavar="RAD_PER_MIN",
                         help="Joint speed separating dwell from move "
                              "(default %g)" % DEFAULT_VELOCITY_THRESHOLD)
    analyze.add_argument("--min-phase-duration", type=float, metavar="MIN",
                         help="Shorter phases are merged (default %g)"
                              % DEFAULT_MIN_PHASE_DURATION)
    analyze.add_argument("--inertial-threshold", type=float,
                         metavar="RAD_PER_MIN",
                         help="Joint speed above which quasi-static loading "
                              "is flagged (default %g)"
                              % DEFAULT_INERTIAL_THRESHOLD)
    analyze.add_argument("--endurance-horizon", type=float, metavar="MIN",
                         help="Repeat the task up to this long when looking "
                              "for exhaustion (default %g)"
                              % DEFAULT_ENDURANCE_HORIZON)
    analyze.add_argument("--stature", type=float, metavar="M",
                         help="Scale segment lengths to this stature")
    analyze.add_argument("--body-mass", type=float, metavar="KG",
                         help="Scale segment masses to this body mass")
    analyze.add_argument("--jobs", "-j", type=int, metavar="N",
                         help="Threads evaluating muscles")
    analyze.set_defaults(handler=_run_analyze)

    endurance = commands.add_parser(
        "endurance", help="Endurance time under a constant load")
    endurance.add_argument("--mvc", type=float, required=True, metavar="N",
                           help="Maximum voluntary contraction force")
    endurance.add_argument("--k", type=float, default=DEFAULT_K,
                           metavar="PER_MIN", help="Rate constant")
    endurance.add_argument("--load", type=float, required=True, metavar="N",
                           help="Constant demanded force")
    endurance.set_defaults(handler=_run_endurance)

    synth = commands.add_parser("synth", help="Write a synthetic task")
    synth.add_argument("scenario", choices=sorted(SCENARIOS))
    synth.add_argument("--output", "-o", required=True, metavar="DIR")
    synth.add_argument("--duration-s", type=float, metavar="S",
                       help="Length of a hold (default 60)")
    synth.add_argument("--rate-hz", type=float, metavar="HZ",
                       help="Frame rate (default 25)")
    synth.add_argument("--cycles", type=int, default=3)
    synth.add_argument("--dwell-s", type=float, default=2.0, metavar="S")
    synth.add_argument("--move-s", type=float, default=1.0, metavar="S")
    synth.add_argument("--final-dwell-s", type=float, default=0.0,
                       metavar="S")
    synth.add_argument("--mass", type=float, default=0.0, metavar="KG")
    synth.add_argument("--noise", type=float, default=0.0, metavar="RAD",
                       help="Standard deviation of angle noise; seeded from "
                            "$%s" % SEED_VARIABLE)
    synth.set_defaults(handler=_run_synth)
    return parser


def _configure_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger("fatiguekit").setLevel(level)


def _fail(err):
    message = " ".join(str(err).split())
    print("error:%s:%s" % (type(err).__name__, message), file=sys.stderr)


def main(argv=None):
    """Entry point of the fatiguekit command.

    :param argv: arguments without the program name; sys.argv by default
    :return: the exit status
    """
    try:
        options = build_parser().parse_args(argv)
        _configure_logging(options.verbose)
        return options.handler(options)
    except InvariantViolation as err:
        _fail(err)
        return 2
    except (FatigueKitError, OSError) as err:
        _fail(err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
