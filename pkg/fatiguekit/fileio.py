"""Read and write recordings, load timelines, worker profiles and the small
JSON documents (standard times, phases) used by fatiguekit.
"""

import csv
import json
import logging
import math

from openpyxl import load_workbook

from fatiguekit.basics import ConfigurationError, ParseError, SchemaError
from fatiguekit.biomech import WorkerProfile
from fatiguekit.motion import MotionSeries, validate_phases
from fatiguekit.profiles import INTERPOLATIONS, LINEAR, SampledProfile

logger = logging.getLogger(__name__)

TIME_COLUMN = "t_min"
ANGLE_SUFFIX = "_rad"
F_LOAD_COLUMN = "f_load_N"
MASS_COLUMN = "mass_kg"


class UnknownFormatException(SchemaError):
    """An unknown format for a motion file."""

    def __init__(self, variant=None):
        message = "fatiguekit either does not support or cannot read this " \
            "file format"
        if variant:
            message += " (%s)" % variant
        super().__init__(message)


MOTION_READERS = {}
"""This dictionary should contain functions that, for a given variant of
motion file format, take as input a filename and return a MotionSeries.
"""


def _csv_records(text):
    """Yield (line number, fields) for every line that is neither blank nor
    a comment.
    """
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield number, next(csv.reader([line]))


def _parse_number(text, what, line, filename):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError("cannot read %s from %r" % (what, text), line,
                         filename) from None
    if not math.isfinite(value):
        raise ParseError("%s is not finite" % what, line, filename)
    return value


def _motion_from_records(records, filename=None):
    """Build a MotionSeries from (line number, fields) records, the first of
    which is the header.
    """
    records = iter(records)
    try:
        line, header = next(records)
    except StopIteration:
        raise ParseError("no header found", None, filename) from None
    header = [str(name).strip() for name in header]
    if not header or header[0] != TIME_COLUMN:
        raise ParseError("first column must be %s, found %r"
                         % (TIME_COLUMN, header[0] if header else ""),
                         line, filename)
    joints = []
    for name in header[1:]:
        if not name.endswith(ANGLE_SUFFIX) or name == ANGLE_SUFFIX:
            raise ParseError("angle column %r must be named <joint>%s"
                             % (name, ANGLE_SUFFIX), line, filename)
        joints.append(name[:-len(ANGLE_SUFFIX)])
    if not joints:
        raise ParseError("no angle columns", line, filename)
    if len(set(joints)) != len(joints):
        raise ParseError("duplicate joint columns", line, filename)
    times = []
    angles = []
    for line, fields in records:
        if len(fields) != len(header):
            raise ParseError("expected %d columns, found %d"
                             % (len(header), len(fields)), line, filename)
        t = _parse_number(fields[0], "time", line, filename)
        if times and t <= times[-1]:
            raise ParseError("time %g does not increase (previous %g)"
                             % (t, times[-1]), line, filename)
        times.append(t)
        angles.append([_parse_number(field, "angle of %s" % joint, line,
                                     filename)
                       for joint, field in zip(joints, fields[1:])])
    if not times:
        raise ParseError("no frames", None, filename)
    return MotionSeries(times, joints, angles)


def _decode(data, filename):
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8-sig")
        except UnicodeDecodeError as err:
            raise ParseError("not UTF-8: %s" % err, None, filename) from None
    if data.startswith("\ufeff"):
        return data[1:]
    return data


def parse_motion_csv(data, filename=None):
    """Parses a motion recording in CSV form.

    The header is ``t_min,<joint>_rad,...``; lines starting with # are
    comments.

    :param data: the file contents as bytes (UTF-8) or str
    :param filename: used in error messages only
    :rtype: MotionSeries
    :raises ParseError: with the offending line number
    """
    series = _motion_from_records(_csv_records(_decode(data, filename)),
                                  filename)
    logger.debug("parsed %s", series)
    return series


def read_motion_csv(filename):
    """Reads a motion recording from a CSV file."""
    with open(filename, "rb") as infile:
        series = parse_motion_csv(infile.read(), filename)
    logger.info("read %d frames from %s", len(series), filename)
    return series


def read_motion_xlsx(filename):
    """Reads a motion recording from the active sheet of an Excel workbook,
    laid out like the CSV format (header in the first row).
    """
    workbook = load_workbook(filename, read_only=True)
    try:
        records = []
        for number, row in enumerate(workbook.active.iter_rows(
                values_only=True), start=1):
            cells = list(row)
            while cells and cells[-1] is None:
                cells.pop()
            if not cells:
                continue
            if isinstance(cells[0], str) and cells[0].startswith("#"):
                continue
            records.append((number, ["" if cell is None else cell
                                     for cell in cells]))
    finally:
        workbook.close()
    series = _motion_from_records(records, filename)
    logger.info("read %d frames from %s", len(series), filename)
    return series


MOTION_READERS["csv"] = read_motion_csv
MOTION_READERS["xlsx"] = read_motion_xlsx


def write_motion_csv(series, filename):
    """Writes a MotionSeries in the CSV format."""
    with open(filename, "w", newline="") as outfile:
        writer = csv.writer(outfile, lineterminator="\n")
        writer.writerow([TIME_COLUMN] + [joint + ANGLE_SUFFIX
                                         for joint in series.joints])
        for t, row in zip(series.times, series.angles):
            writer.writerow(["%.12g" % t] + ["%.12g" % angle
                                             for angle in row])
    logger.info("wrote %d frames to %s", len(series), filename)


MotionSeries.add_writer("csv", write_motion_csv)


def read_motion_filetype(filename):
    """Given the name of a file containing a motion recording, tries to
    determine the variant.

    :return: the variant as a string
    """
    if filename.lower().endswith((".xlsx", ".xlsm")):
        return "xlsx"
    with open(filename, "rb") as infile:
        for raw in infile:
            line = raw.decode("utf-8-sig", errors="replace").strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith(TIME_COLUMN + ","):
                return "csv"
            return line
    return "csv"


def read_motion(filename, variant=None):
    """Reads a motion recording and returns the resulting MotionSeries.

    :param variant: The type of the file. If not present, will be
        autodetected.
    """
    if variant is None:
        variant = read_motion_filetype(filename)
    if variant in MOTION_READERS:
        return MOTION_READERS[variant](filename)
    raise UnknownFormatException(variant)


def read_load_csv(filename, column=F_LOAD_COLUMN, interpolation=LINEAR):
    """Reads a timeline ``t_min,<column>`` into a SampledProfile.

    :param column: F_LOAD_COLUMN for forces, MASS_COLUMN for handled masses
    """
    if interpolation not in INTERPOLATIONS:
        raise ConfigurationError("unknown interpolation %r" % interpolation)
    with open(filename, "rb") as infile:
        text = _decode(infile.read(), filename)
    records = _csv_records(text)
    try:
        line, header = next(records)
    except StopIteration:
        raise ParseError("no header found", None, filename) from None
    if [name.strip() for name in header] != [TIME_COLUMN, column]:
        raise ParseError("header must be %s,%s" % (TIME_COLUMN, column), line,
                         filename)
    times = []
    values = []
    for line, fields in records:
        if len(fields) != 2:
            raise ParseError("expected 2 columns, found %d" % len(fields),
                             line, filename)
        t = _parse_number(fields[0], "time", line, filename)
        value = _parse_number(fields[1], column, line, filename)
        if t < 0 or value < 0:
            raise ParseError("negative values are not allowed", line,
                             filename)
        if times and t <= times[-1]:
            raise ParseError("time %g does not increase (previous %g)"
                             % (t, times[-1]), line, filename)
        times.append(t)
        values.append(value)
    if len(times) < 2:
        raise ParseError("a timeline needs at least 2 rows, found %d"
                         % len(times), None, filename)
    logger.info("read %d samples of %s from %s", len(times), column, filename)
    return SampledProfile.from_arrays(times, values, interpolation)


def read_mass_timeline(filename, interpolation=LINEAR):
    """Reads a handled-mass timeline, ``t_min,mass_kg``."""
    return read_load_csv(filename, MASS_COLUMN, interpolation)


def write_load_csv(profile, filename, column=F_LOAD_COLUMN):
    """Writes the samples of a SampledProfile as ``t_min,<column>``."""
    with open(filename, "w", newline="") as outfile:
        writer = csv.writer(outfile, lineterminator="\n")
        writer.writerow([TIME_COLUMN, column])
        for t, value in zip(profile.times, profile.values):
            writer.writerow(["%.12g" % t, "%.12g" % value])
    logger.info("wrote %d samples to %s", len(profile), filename)


def read_json_document(filename):
    """Loads a JSON file, reporting syntax errors with their line."""
    with open(filename, "r", encoding="utf-8") as infile:
        try:
            return json.load(infile)
        except json.JSONDecodeError as err:
            raise ParseError(err.msg, err.lineno, filename) from None


def write_json_document(document, filename):
    with open(filename, "w", encoding="utf-8") as outfile:
        json.dump(document, outfile, indent=2, sort_keys=True)
        outfile.write("\n")


def read_worker_profile(filename):
    """Reads a WorkerProfile from a JSON file."""
    data = read_json_document(filename)
    if not isinstance(data, dict):
        raise SchemaError("%s: a worker profile must be a JSON object"
                          % filename)
    try:
        profile = WorkerProfile.from_dict(data)
    except SchemaError as err:
        raise SchemaError("%s: %s" % (filename, err)) from None
    logger.info("read %s from %s", profile, filename)
    return profile


def write_worker_profile(profile, filename):
    write_json_document(profile.to_dict(), filename)


def read_standard_times(filename):
    """Reads standard times: a JSON object mapping phase labels (or kinds) to
    minutes.
    """
    data = read_json_document(filename)
    if not isinstance(data, dict):
        raise SchemaError("%s: standard times must be a JSON object"
                          % filename)
    standards = {}
    for label, value in data.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or not math.isfinite(value) or value <= 0:
            raise ConfigurationError("%s: standard time for %r must be a "
                                     "number > 0" % (filename, label))
        standards[str(label)] = float(value)
    return standards


def read_phases(filename):
    """Reads phases from a JSON list of {label, start, end} objects.

    :rtype: list of PhaseSpan
    """
    data = read_json_document(filename)
    if not isinstance(data, list):
        raise SchemaError("%s: phases must be a JSON list" % filename)
    try:
        return validate_phases((entry["label"], entry["start"], entry["end"])
                               for entry in data)
    except (KeyError, TypeError) as err:
        raise SchemaError("%s: malformed phase entry (%s)"
                          % (filename, err)) from None


def write_phases(phases, filename):
    write_json_document([{"label": phase.label, "start": phase.start,
                          "end": phase.end} for phase in phases], filename)
