"""Test cases for task evaluation and the report files."""

import math
import os

import pytest

from fatiguekit.basics import (DomainError, InvariantViolation,
                               MuscleParameters)
from fatiguekit.biomech import (MuscleAttachment, SegmentSpec, WorkerProfile,
                                default_worker_profile, scaled_worker)
from fatiguekit.fileio import (read_mass_timeline, read_motion,
                               read_standard_times, read_worker_profile)
from fatiguekit.generator import lift_cycle_scenario
from fatiguekit.motion import PhaseSpan
from fatiguekit.profiles import SampledProfile
from fatiguekit.report import (CONVERGENCE_WARNING, REPORT_FILE,
                               SUMMARY_FILE, SUMMARY_HEADER, TRAJECTORY_FILE,
                               _check_conservation, evaluate_task,
                               read_report, write_report)

TESTFILES = os.path.join(os.path.dirname(__file__), "testfiles")


def _task(name):
    directory = os.path.join(TESTFILES, name)
    motion = read_motion(os.path.join(directory, "motion.csv"))
    mass = read_mass_timeline(os.path.join(directory, "mass.csv"))
    standards = read_standard_times(os.path.join(directory, "standards.json"))
    return motion, mass, standards


def _hold_worker():
    return read_worker_profile(os.path.join(TESTFILES, "hold_task",
                                            "worker.json"))


def _hold_report(**kwargs):
    motion, mass, standards = _task("hold_task")
    return evaluate_task(_hold_worker(), motion, mass, standards=standards,
                         **kwargs)


def _lift_report(worker=None, mass=None, **kwargs):
    motion, recorded_mass, standards = _task("lift_task")
    return evaluate_task(worker or default_worker_profile(), motion,
                         mass or recorded_mass, standards=standards, **kwargs)


def test_hold_at_half_mvc():
    """A one minute hold at half MVC against the closed form."""
    report = _hold_report()
    muscle = report.muscle("arm_flexor")
    assert muscle.peak_relative_load == pytest.approx(0.5, rel=1e-9)
    assert muscle.mean_relative_load == pytest.approx(0.5, rel=1e-9)
    assert muscle.final_u == pytest.approx((math.e - 1.0) / 2.0, rel=1e-8)
    assert muscle.final_fcem / muscle.mvc == pytest.approx(math.exp(-0.5),
                                                           rel=1e-8)
    assert muscle.endurance_time == pytest.approx(2.0 * math.log(2.0),
                                                  rel=1e-6)
    assert not muscle.exhausted_within_task
    assert muscle.overload_spans == []
    assert muscle.normalized_fatigue == pytest.approx((math.e - 1.0) / 3.0,
                                                      rel=1e-8)


def test_hold_phases_and_efficiency():
    """A still recording is one dwell taking exactly its standard time."""
    report = _hold_report()
    assert [phase.label for phase in report.phases] == ["dwell-1"]
    phase = report.phases[0]
    assert phase.start == 0.0
    assert phase.end == 1.0
    assert phase.delta_u["arm_flexor"] == pytest.approx(
        report.muscle("arm_flexor").final_u, rel=1e-9)
    assert report.efficiency == pytest.approx(1.0)
    assert phase.efficiency == pytest.approx(1.0)
    assert report.quasi_static_violations == []


def test_hold_joint_peaks():
    """Peak torque of the straight arm: 10 kg at 0.5 m."""
    report = _hold_report()
    assert report.joints == [{"joint": "shoulder",
                              "peak_torque_Nm": pytest.approx(49.05),
                              "strength_Nm": 98.1,
                              "peak_strength_ratio": pytest.approx(0.5)}]


def test_coarser_analysis_grid():
    """A constant load gives the same fatigue on a coarser grid."""
    report = _hold_report(analysis_dt=0.01)
    muscle = report.muscle("arm_flexor")
    assert len(muscle.trajectory.t) == 101
    assert muscle.final_u == pytest.approx((math.e - 1.0) / 2.0, rel=1e-8)
    assert report.metadata["task"]["grid_points"] == 101


def test_zero_load():
    """Without a handled mass the massless arm never tires."""
    motion, _, _ = _task("hold_task")
    nothing = SampledProfile([(0.0, 0.0), (1.0, 0.0)])
    report = evaluate_task(_hold_worker(), motion, nothing)
    muscle = report.muscle("arm_flexor")
    assert muscle.final_u == 0.0
    assert muscle.final_fcem == muscle.mvc
    assert muscle.endurance_time is None
    assert muscle.normalized_fatigue is None
    assert report.efficiency is None


def test_given_phases_split_fatigue():
    """Fatigue of two given phases adds up to the whole; a phase without
    load adds nothing. The last interval before the mass is put down holds
    half the load.
    """
    motion, _, _ = _task("hold_task")
    mass = SampledProfile([(0.0, 10.0), (0.5, 0.0), (1.0, 0.0)],
                          interpolation="hold-previous")
    phases = [PhaseSpan("lift-1", 0.0, 0.5), PhaseSpan("rest-1", 0.5, 1.0)]
    report = evaluate_task(_hold_worker(), motion.with_phases(phases), mass)
    muscle = report.muscle("arm_flexor")
    lift, rest = report.phases
    last_loaded = float(motion.times[749])
    assert motion.times[750] == 0.5
    accumulated = 0.5 * last_loaded + 0.25 * (0.5 - last_loaded)
    assert rest.delta_u["arm_flexor"] == 0.0
    assert lift.delta_u["arm_flexor"] == pytest.approx(
        math.expm1(2.0 * accumulated) / 2.0, rel=1e-8)
    assert muscle.final_u == pytest.approx(lift.delta_u["arm_flexor"],
                                           rel=1e-8)


def test_phases_outside_recording():
    """Given phases must lie within the recording."""
    motion, mass, _ = _task("hold_task")
    outside = motion.with_phases([PhaseSpan("dwell-1", 0.0, 2.0)])
    with pytest.raises(DomainError):
        evaluate_task(_hold_worker(), outside, mass)


def test_lift_task():
    """Three lift cycles: six phases whose fatigue adds up per muscle."""
    report = _lift_report()
    assert [phase.label for phase in report.phases] == \
        ["dwell-1", "move-1", "dwell-2", "move-2", "dwell-3", "move-3"]
    for muscle in report.muscles:
        total = math.fsum(phase.delta_u[muscle.muscle_id]
                          for phase in report.phases)
        assert total == pytest.approx(muscle.final_u, rel=1e-7, abs=1e-12)
        assert muscle.final_u > 0
        assert list(muscle.trajectory.u) == sorted(muscle.trajectory.u)
    assert report.efficiency is not None
    assert report.quasi_static_violations == []
    change = report.grid_convergence["max_relative_change"]
    assert 0 < change < CONVERGENCE_WARNING


def test_coarse_grid_convergence():
    """Holding the load over a coarse step misses the moves, and halving
    the step shows it.
    """
    report = _lift_report(analysis_dt=0.005)
    assert report.grid_convergence["half_step_min"] == 0.0025
    assert report.grid_convergence["max_relative_change"] > \
        CONVERGENCE_WARNING


def test_overload_in_heavy_hold():
    """18 kg is 90 % of MVC: the arm gives out after -ln(0.9)/0.9 minutes
    and stays overloaded for the rest of the hold.
    """
    motion, _, _ = _task("hold_task")
    heavy = SampledProfile([(0.0, 18.0), (1.0, 18.0)])
    muscle = evaluate_task(_hold_worker(), motion, heavy).muscle("arm_flexor")
    exhaustion = -math.log(0.9) / 0.9
    assert muscle.endurance_time == pytest.approx(exhaustion, rel=1e-6)
    assert muscle.exhausted_within_task
    assert len(muscle.overload_spans) == 1
    start, end = muscle.overload_spans[0]
    assert start == pytest.approx(exhaustion, rel=1e-6)
    assert end == 1.0
    assert muscle.overload_time == pytest.approx(1.0 - exhaustion, rel=1e-6)


def test_fast_move_breaks_quasi_static_loading():
    """Moving the shoulder 0.9 rad in 0.3 s is flagged; the move frames
    form one span.
    """
    scenario = lift_cycle_scenario(cycles=1, dwell=0.02, move=0.005,
                                   final_dwell=0.02, mass=5.0)
    report = evaluate_task(default_worker_profile(), scenario.motion,
                           scenario.mass_timeline)
    assert len(report.quasi_static_violations) == 1
    start, end = report.quasi_static_violations[0]
    frame = 1.0 / 1500.0
    assert abs(start - 0.02) <= 2 * frame
    assert abs(end - 0.025) <= 2 * frame


def test_conservation_is_relative():
    """Phase fatigue must add up to the total within 1e-9 relative, even
    when the total is small.
    """
    phases = [PhaseSpan("dwell-1", 0.0, 0.5), PhaseSpan("move-1", 0.5, 1.0)]
    _check_conservation("m", {"dwell-1": 0.004, "move-1": 0.006}, 0.01,
                        phases, 0.0, 1.0)
    with pytest.raises(InvariantViolation):
        _check_conservation("m", {"dwell-1": 0.004, "move-1": 0.0060000001},
                            0.01, phases, 0.0, 1.0)


def test_lift_task_jobs():
    """Evaluating muscles in threads changes nothing."""
    assert _lift_report(jobs=3) == _lift_report()


def test_scaled_worker_same_fatigue():
    """Scaling segment masses, MVCs and the handled mass together leaves
    the fatigue index unchanged.
    """
    heavier = scaled_worker(default_worker_profile(), 4.0)
    base = _lift_report()
    scaled = _lift_report(heavier, SampledProfile([(0.0, 20.0),
                                                   (0.15, 20.0)]))
    for muscle in base.muscles:
        assert scaled.muscle(muscle.muscle_id).final_u == pytest.approx(
            muscle.final_u, rel=1e-7)


def test_no_muscles():
    """A worker without muscles still gets phases and joint peaks."""
    worker = WorkerProfile([SegmentSpec("arm", 0.5, 0.0, 0.5, "shoulder",
                                        "hand")], {"shoulder": 98.1}, [])
    motion, mass, _ = _task("hold_task")
    report = evaluate_task(worker, motion, mass)
    assert report.muscles == []
    assert len(report.phases) == 1
    assert report.joints[0]["peak_torque_Nm"] == pytest.approx(49.05)


def test_write_report(tmp_path):
    """The report directory holds JSON, a summary and trajectories."""
    report = _hold_report()
    directory = str(tmp_path / "out")
    write_report(report, directory)
    assert os.path.isfile(os.path.join(directory, REPORT_FILE))
    with open(os.path.join(directory, TRAJECTORY_FILE % "arm_flexor")) as f:
        rows = f.read().splitlines()
    assert rows[0] == "t_min,f_load_N,fcem_N,u_min"
    assert len(rows) == 1 + 1501
    with open(os.path.join(directory, SUMMARY_FILE)) as f:
        summary = f.read().splitlines()
    assert summary[0] == ",".join(SUMMARY_HEADER)
    assert summary[1].startswith("arm_flexor,0.859140914,")
    assert read_report(directory) == report


def test_reports_are_reproducible(tmp_path):
    """Two runs on the same inputs write identical bytes."""
    first = str(tmp_path / "first")
    second = str(tmp_path / "second")
    write_report(_lift_report(), first)
    write_report(_lift_report(), second)
    assert sorted(os.listdir(first)) == sorted(os.listdir(second))
    for name in os.listdir(first):
        with open(os.path.join(first, name), "rb") as a, \
                open(os.path.join(second, name), "rb") as b:
            assert a.read() == b.read(), name


def test_metadata():
    """Reports record the version, parameters and input digests."""
    report = _hold_report()
    metadata = report.metadata
    assert metadata["worker"] == "hold-example"
    assert metadata["task"]["frames"] == 1501
    assert len(metadata["inputs"]["motion_sha256"]) == 64
    assert report.to_dict()["fatiguekit_version"] == metadata["version"]


def test_scaled_mvc_keeps_relative_results():
    """Only F_Load / MVC matters: a weaker copy of the muscle under the
    same relative load tires the same way.
    """
    worker = _hold_worker()
    weaker = WorkerProfile(worker.segments, worker.joint_strengths,
                           [MuscleAttachment(MuscleParameters("arm_flexor",
                                                              981.0),
                                             {"shoulder": 0.05})])
    motion, _, _ = _task("hold_task")
    half_mass = SampledProfile([(0.0, 5.0), (1.0, 5.0)])
    report = evaluate_task(weaker, motion, half_mass)
    assert report.muscle("arm_flexor").final_u == pytest.approx(
        (math.e - 1.0) / 2.0, rel=1e-8)
